"""Gaussian affinity matrices with optional distance truncation, and degrees.

The kernel convention is K(d) = exp(-d^2 / eps) with eps a squared-distance
scale: every downstream matrix is row-normalized, so the kernel's
multiplicative constant is immaterial. Truncation is on squared distance,
entries with d^2 > trunc * eps are structurally zero.

Storage switches from dense to CSR above DENSE_ENTRY_LIMIT entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .errors import BadBandwidth, DimensionMismatch, IsolatedPoint, LavdmError

DENSE_ENTRY_LIMIT = 4_000_000
_ROW_CHUNK = 1024


@dataclass(frozen=True)
class AffinityMatrix:
    """Non-negative (n, m) kernel matrix plus its bandwidth metadata.

    matrix is a read-only ndarray or scipy CSR; epsilon is the bandwidth
    (squared-distance scale); trunc the truncation radius as a multiple of
    epsilon on squared distance (inf when untruncated).
    """

    matrix: object
    epsilon: float
    trunc: float = np.inf

    def __post_init__(self):
        if sparse.issparse(self.matrix):
            mat = self.matrix.tocsr()
            mat.data.flags.writeable = False
        else:
            mat = np.ascontiguousarray(np.asarray(self.matrix, dtype=float))
            mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_dense(self) -> bool:
        return not sparse.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        if self.is_dense:
            return np.array(self.matrix)
        return self.matrix.toarray()

    def row_sums(self) -> np.ndarray:
        if self.is_dense:
            return self.matrix.sum(axis=1)
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        if self.is_dense:
            return self.matrix.sum(axis=0)
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix.T @ x

    def scaled(self, row, col) -> "AffinityMatrix":
        """Entrywise row[i] * W[i, k] * col[k], same sparsity."""
        row = np.asarray(row, dtype=float)
        col = np.asarray(col, dtype=float)
        if self.is_dense:
            out = row[:, None] * self.matrix * col[None, :]
        else:
            out = sparse.diags(row) @ self.matrix @ sparse.diags(col)
        return AffinityMatrix(out, self.epsilon, self.trunc)


def _points_of(obj) -> np.ndarray:
    pts = getattr(obj, "points", obj)
    return np.asarray(pts, dtype=float)


def gaussian_affinity(A, B, epsilon: float, trunc: float = np.inf) -> AffinityMatrix:
    """Kernel matrix exp(-|a_i - b_k|^2 / epsilon) with squared-distance truncation.

    A and B are PointClouds or (n, p) arrays. When A and B hold identical
    points the result is exactly symmetric with unit diagonal.
    """
    if epsilon <= 0:
        raise BadBandwidth(f"bandwidth must be positive, got {epsilon}")
    pa = _points_of(A)
    pb = _points_of(B)
    if pa.ndim != 2 or pb.ndim != 2 or pa.shape[1] != pb.shape[1]:
        raise DimensionMismatch(
            f"ambient dimensions differ: {pa.shape} vs {pb.shape}"
        )
    n, m = pa.shape[0], pb.shape[0]
    same = pa is pb or (pa.shape == pb.shape and np.array_equal(pa, pb))
    cut = trunc * epsilon
    dense = n * m <= DENSE_ENTRY_LIMIT

    bb = np.sum(pb * pb, axis=1)
    rows = []
    for start in range(0, n, _ROW_CHUNK):
        block = pa[start : start + _ROW_CHUNK]
        d2 = np.sum(block * block, axis=1)[:, None] + bb[None, :] - 2.0 * block @ pb.T
        np.maximum(d2, 0.0, out=d2)
        w = np.exp(-d2 / epsilon)
        if np.isfinite(cut):
            w[d2 > cut] = 0.0
        rows.append(w if dense else sparse.csr_matrix(w))
    if dense:
        W = np.vstack(rows) if len(rows) > 1 else rows[0]
        if same:
            W = 0.5 * (W + W.T)
            np.fill_diagonal(W, 1.0)
    else:
        W = sparse.vstack(rows, format="csr")
        if same:
            W = (W + W.T) * 0.5
            W = W.tolil()
            W.setdiag(1.0)
            W = W.tocsr()
    return AffinityMatrix(W, float(epsilon), float(trunc))


def row_degrees(W: AffinityMatrix) -> np.ndarray:
    """Row sums of the affinity matrix; raises IsolatedPoint on an empty row."""
    deg = W.row_sums()
    if np.any(deg <= 0.0):
        raise IsolatedPoint(int(np.argmax(deg <= 0.0)))
    return deg


def alpha_normalize(W: AffinityMatrix, degrees: np.ndarray, alpha: float) -> AffinityMatrix:
    """Density normalization W_alpha = D^-alpha W D^-alpha for square W."""
    if W.shape[0] != W.shape[1]:
        raise LavdmError("alpha normalization requires a square affinity matrix")
    if not 0.0 <= alpha <= 1.0:
        raise LavdmError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return W
    degrees = np.asarray(degrees, dtype=float)
    if np.any(degrees <= 0.0):
        raise IsolatedPoint(int(np.argmax(degrees <= 0.0)))
    scale = degrees**-alpha
    return W.scaled(scale, scale)
