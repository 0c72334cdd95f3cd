"""Per-point tangent frames and pairwise orthogonal connections.

Frames are p x q column-orthonormal matrices, either read off a chart
(ground truth) or estimated by local PCA. The connection between two
framed points is the orthogonal polar factor of F_i^T F_j, the closest
element of O(q) to the frame overlap; for nearby points on a manifold it
approximates parallel transport expressed in the two frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LavdmError, RankDeficient, TooFewNeighbors
from .manifolds import PointCloud, ground_truth_frame

GROUND_TRUTH = "truth"
LOCAL_PCA = "pca"


@dataclass(frozen=True)
class FrameField:
    """Stack of per-point orthonormal frames, shape (n, p, q)."""

    frames: np.ndarray
    source: str

    def __post_init__(self):
        fr = np.ascontiguousarray(np.asarray(self.frames, dtype=float))
        if fr.ndim != 3:
            raise LavdmError("frames must be an (n, p, q) stack")
        gram = np.einsum("npq,npr->nqr", fr, fr)
        eye = np.eye(fr.shape[2])
        if np.max(np.abs(gram - eye)) > 1e-10:
            raise LavdmError("frames are not column-orthonormal to 1e-10")
        fr.flags.writeable = False
        object.__setattr__(self, "frames", fr)

    @property
    def n(self) -> int:
        return self.frames.shape[0]

    @property
    def q(self) -> int:
        return self.frames.shape[2]

    def subset(self, indices) -> "FrameField":
        return FrameField(self.frames[np.asarray(indices)], self.source)

    def gauge(self, rotations: np.ndarray) -> "FrameField":
        """Right-multiply each frame by its own O(q) element."""
        return FrameField(np.einsum("npq,nqr->npr", self.frames, rotations), self.source)


def _sign_fix(columns: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(columns), axis=0)
    signs = np.sign(columns[idx, np.arange(columns.shape[1])])
    signs[signs == 0] = 1.0
    return columns * signs


def local_pca_frame(X: PointCloud, i: int, radius: float, d: int) -> np.ndarray:
    """Tangent frame at point i from PCA of its radius-neighborhood.

    Displacements of neighbors from point i are centered at their mean;
    the frame is the top-d left singular subspace, columns ordered by
    singular value with the largest-entry-positive sign convention.
    """
    pts = X.points
    dist = np.linalg.norm(pts - pts[i], axis=1)
    nbr = np.where((dist > 0) & (dist <= radius))[0]
    if nbr.size < d + 1:
        raise TooFewNeighbors(i, int(nbr.size), d + 1)
    disp = pts[nbr] - pts[i]
    disp = disp - disp.mean(axis=0)
    _, sv, vt = np.linalg.svd(disp, full_matrices=False)
    if sv[d - 1] < 1e-8 * sv[0]:
        raise RankDeficient(f"point {i}: neighborhood has rank < {d}")
    return _sign_fix(vt[:d].T)


def local_pca_frame_knn(X: PointCloud, i: int, k: int, d: int) -> np.ndarray:
    """Tangent frame at point i from PCA of its k nearest neighbors."""
    pts = X.points
    dist = np.linalg.norm(pts - pts[i], axis=1)
    order = np.argsort(dist, kind="stable")
    nbr = order[(dist[order] > 0)][:k]
    if nbr.size < d + 1:
        raise TooFewNeighbors(i, int(nbr.size), d + 1)
    disp = pts[nbr] - pts[i]
    disp = disp - disp.mean(axis=0)
    _, sv, vt = np.linalg.svd(disp, full_matrices=False)
    if sv[d - 1] < 1e-8 * sv[0]:
        raise RankDeficient(f"point {i}: neighborhood has rank < {d}")
    return _sign_fix(vt[:d].T)


def frame_field(
    X: PointCloud,
    mode: str = GROUND_TRUTH,
    d: int = 2,
    pca_radius: float | None = None,
    pca_neighbors: int | None = None,
) -> FrameField:
    """Frames for every point of X.

    mode "truth" reads exact tangent frames off the chart (X must carry
    params); mode "pca" estimates them, by radius when pca_radius is given
    else by k nearest neighbors.
    """
    if mode == GROUND_TRUTH:
        if X.chart is None or X.params is None:
            raise LavdmError("ground-truth frames need a chart-backed cloud")
        frames = ground_truth_frame(X.chart, X.params[:, 0], X.params[:, 1])
        return FrameField(frames, GROUND_TRUTH)
    if mode != LOCAL_PCA:
        raise LavdmError(f"unknown frame mode {mode!r}")
    if pca_radius is None and pca_neighbors is None:
        raise LavdmError("local PCA frames need pca_radius or pca_neighbors")
    out = np.empty((X.n, X.p, d))
    for i in range(X.n):
        if pca_radius is not None:
            out[i] = local_pca_frame(X, i, pca_radius, d)
        else:
            out[i] = local_pca_frame_knn(X, i, pca_neighbors, d)
    return FrameField(out, LOCAL_PCA)


def _polar_o2(M: np.ndarray) -> np.ndarray:
    """Closest O(2) element to each 2x2 matrix in a (..., 2, 2) stack.

    Closed form: the best rotation has trace alignment
    sqrt((a+d)^2 + (c-b)^2), the best reflection sqrt((a-d)^2 + (b+c)^2);
    the polar factor is whichever is larger (they differ by sign(det M)).
    """
    a = M[..., 0, 0]
    b = M[..., 0, 1]
    c = M[..., 1, 0]
    d = M[..., 1, 1]
    r_rot = np.hypot(a + d, c - b)
    r_ref = np.hypot(a - d, b + c)
    if np.any((r_rot == 0.0) & (r_ref == 0.0)):
        raise LavdmError("polar factor undefined for a zero frame overlap")
    use_rot = r_rot >= r_ref
    denom_rot = np.where(r_rot == 0.0, 1.0, r_rot)
    denom_ref = np.where(r_ref == 0.0, 1.0, r_ref)
    cos_r = (a + d) / denom_rot
    sin_r = (c - b) / denom_rot
    cos_s = (a - d) / denom_ref
    sin_s = (b + c) / denom_ref
    out = np.empty_like(M)
    out[..., 0, 0] = np.where(use_rot, cos_r, cos_s)
    out[..., 0, 1] = np.where(use_rot, -sin_r, sin_s)
    out[..., 1, 0] = np.where(use_rot, sin_r, sin_s)
    out[..., 1, 1] = np.where(use_rot, cos_r, -cos_s)
    return out


def orthogonal_polar(M: np.ndarray) -> np.ndarray:
    """Closest orthogonal matrix U V^T to each matrix in a (..., q, q) stack."""
    M = np.asarray(M, dtype=float)
    if M.shape[-1] != M.shape[-2]:
        raise LavdmError("polar factor needs square blocks")
    if M.shape[-1] == 1:
        s = np.sign(M)
        s[s == 0] = 1.0
        return s
    if M.shape[-1] == 2:
        return _polar_o2(M)
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def align_connection(frame_i: np.ndarray, frame_j: np.ndarray) -> np.ndarray:
    """Orthogonal connection from the fiber at j to the fiber at i.

    Returns the polar factor of frame_i^T frame_j; by construction
    align_connection(F_j, F_i) is its transpose.
    """
    frame_i = np.asarray(frame_i, dtype=float)
    frame_j = np.asarray(frame_j, dtype=float)
    return orthogonal_polar(frame_i.T @ frame_j)


def align_connections(frames_i: np.ndarray, frames_j: np.ndarray) -> np.ndarray:
    """Batched connections for stacks of frames, shape (N, q, q)."""
    overlaps = np.einsum("npq,npr->nqr", frames_i, frames_j)
    return orthogonal_polar(overlaps)


def build_connection_field(
    X: PointCloud,
    Z: PointCloud,
    frames_X: FrameField,
    frames_Z: FrameField,
    edges: np.ndarray,
) -> dict:
    """Connection for every (i, k) edge between the two framed clouds.

    Returns {(i, k): (q, q) array}. Cost is linear in the edge count.
    """
    edges = np.asarray(edges, dtype=int)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise LavdmError("edges must be an (E, 2) index array")
    blocks = align_connections(
        frames_X.frames[edges[:, 0]], frames_Z.frames[edges[:, 1]]
    )
    return {(int(i), int(k)): blocks[e] for e, (i, k) in enumerate(edges)}
