"""Vanilla vector diffusion maps: block operator, spectrum, and embedding.

The affinity-connection operator S has q x q orthogonal blocks weighted by
a symmetric affinity; D is its block-scalar degree. The Markov operator
D^-1 S is diagonalized through the similar symmetric matrix
D^-1/2 S D^-1/2, eigenvectors are mapped back by D^-1/2, unit-normalized,
and given a deterministic sign that is invariant under per-point gauge
changes (the sign of a weighted overlap with the leading eigenvector).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as splinalg

from .errors import (
    AsymmetricInput,
    FractionalPowerOfNegative,
    LavdmError,
    SolverFailure,
)
from .kernels import AffinityMatrix

DENSE_EIG_LIMIT = 2000
SPECTRAL_RADIUS_TOL = 1e-10


@dataclass(frozen=True)
class BlockMatrix:
    """Sparse-by-block (n, m) matrix of q x q blocks, stored as BSR."""

    bsr: sparse.bsr_matrix
    n: int
    m: int
    q: int

    @classmethod
    def from_coo(cls, rows, cols, blocks, n: int, m: int) -> "BlockMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        blocks = np.asarray(blocks, dtype=float)
        q = blocks.shape[-1]
        order = np.lexsort((cols, rows))
        indptr = np.searchsorted(rows[order], np.arange(n + 1))
        mat = sparse.bsr_matrix(
            (blocks[order], cols[order], indptr), shape=(n * q, m * q)
        )
        return cls(mat, n, m, q)

    @property
    def shape(self):
        return (self.n, self.m)

    def block(self, i: int, j: int) -> np.ndarray:
        start, stop = self.bsr.indptr[i], self.bsr.indptr[i + 1]
        hits = np.where(self.bsr.indices[start:stop] == j)[0]
        if hits.size == 0:
            return np.zeros((self.q, self.q))
        return np.array(self.bsr.data[start + hits[0]])

    def toarray(self) -> np.ndarray:
        return self.bsr.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.bsr @ x

    def transpose(self) -> "BlockMatrix":
        return BlockMatrix(
            self.bsr.T.tobsr(blocksize=(self.q, self.q)), self.m, self.n, self.q
        )

    def block_rows(self) -> np.ndarray:
        """Block-row index of each stored block."""
        counts = np.diff(self.bsr.indptr)
        return np.repeat(np.arange(self.n), counts)

    def scale_blocks(self, row_scale=None, col_scale=None) -> "BlockMatrix":
        """Multiply block (i, k) by row_scale[i] * col_scale[k]."""
        data = self.bsr.data.copy()
        if row_scale is not None:
            data *= np.asarray(row_scale, dtype=float)[self.block_rows(), None, None]
        if col_scale is not None:
            data *= np.asarray(col_scale, dtype=float)[self.bsr.indices, None, None]
        mat = sparse.bsr_matrix(
            (data, self.bsr.indices, self.bsr.indptr), shape=self.bsr.shape
        )
        return BlockMatrix(mat, self.n, self.m, self.q)


@dataclass(frozen=True)
class SpectralResult:
    """Ordered eigen/singular data of a block Markov operator.

    values: r reals, descending. vectors: (n*q, r), read in q-blocks; unit
    Euclidean columns under the default normalization.
    """

    values: np.ndarray
    vectors: np.ndarray
    q: int
    normalization: str = "euclidean"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vecs = np.asarray(self.vectors, dtype=float)
        if np.any(np.diff(vals) > 1e-12):
            raise LavdmError("spectral values must be sorted descending")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "vectors", vecs)

    @property
    def n(self) -> int:
        return self.vectors.shape[0] // self.q

    @property
    def r(self) -> int:
        return self.values.shape[0]

    def blocks(self) -> np.ndarray:
        """Vectors reshaped to (n, q, r)."""
        return self.vectors.reshape(self.n, self.q, self.r)


@dataclass(frozen=True)
class Embedding:
    """Per-point r x r feature matrices at diffusion time t."""

    matrices: np.ndarray
    t: float

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def r(self) -> int:
        return self.matrices.shape[1]

    def affinity(self, i: int, j: int) -> float:
        """Frobenius inner product <Psi(i), Psi(j)>; symmetric in (i, j)."""
        return float(np.sum(self.matrices[i] * self.matrices[j]))


def canonical_signs(vectors: np.ndarray, q: int) -> np.ndarray:
    """Deterministic, gauge-invariant column signs.

    The sign of column l is the sign of sum_i |u_1[i]|^2 <u_l[i], u_1[i]>,
    which only involves blockwise inner products and is therefore
    unchanged when every block is rotated by a per-point gauge. Column 1
    itself (and any column with a degenerate overlap) falls back to the
    largest-entry-positive rule.
    """
    vecs = np.array(vectors)
    n = vecs.shape[0] // q
    r = vecs.shape[1]
    blocks = vecs.reshape(n, q, r)
    lead = np.argmax(np.abs(vecs[:, 0]))
    s0 = 1.0 if vecs[lead, 0] >= 0 else -1.0
    ref = blocks[:, :, 0] * s0
    weights = np.sum(ref * ref, axis=1)
    overlaps = np.einsum("i,iq,iql->l", weights, ref, blocks)
    floor = 1e-10 * max(float(np.sum(weights * np.sqrt(weights))), 1e-300)
    signs = np.where(np.abs(overlaps) > floor, np.sign(overlaps), 0.0)
    signs[0] = s0
    for l in np.where(signs == 0.0)[0]:
        idx = np.argmax(np.abs(vecs[:, l]))
        signs[l] = 1.0 if vecs[idx, l] >= 0 else -1.0
    return vecs * signs


def _block_expand(values: np.ndarray, q: int) -> np.ndarray:
    return np.repeat(np.asarray(values, dtype=float), q)


def assemble_vdm(W_alpha: AffinityMatrix, omega) -> tuple:
    """Affinity-connection operator S and its scalar block degree D.

    omega supplies the orthogonal block for each stored affinity entry:
    either a mapping {(i, j): (q, q)} or a callable (rows, cols) ->
    (nnz, q, q). W_alpha must be symmetric; blocks on the diagonal default
    to w * I through the same interface.
    """
    Wm = W_alpha.matrix
    n = Wm.shape[0]
    if Wm.shape[0] != Wm.shape[1]:
        raise AsymmetricInput("affinity matrix must be square")
    if W_alpha.is_dense:
        if not np.allclose(Wm, Wm.T, rtol=0, atol=1e-12 * max(Wm.max(), 1.0)):
            raise AsymmetricInput("affinity matrix must be symmetric")
        rows, cols = np.nonzero(Wm)
        weights = Wm[rows, cols]
        degrees = Wm.sum(axis=1)
    else:
        gap = (Wm - Wm.T)
        if gap.nnz and np.max(np.abs(gap.data)) > 1e-12 * max(Wm.data.max(), 1.0):
            raise AsymmetricInput("affinity matrix must be symmetric")
        coo = Wm.tocoo()
        rows, cols, weights = coo.row, coo.col, coo.data
        degrees = np.asarray(Wm.sum(axis=1)).ravel()
    if callable(omega):
        blocks = np.asarray(omega(rows, cols), dtype=float)
    else:
        blocks = np.stack([np.asarray(omega[(int(i), int(j))]) for i, j in zip(rows, cols)])
    q = blocks.shape[-1]
    S = BlockMatrix.from_coo(rows, cols, weights[:, None, None] * blocks, n, n)
    return S, degrees


def vdm_spectrum(
    S: BlockMatrix,
    degrees: np.ndarray,
    r: int,
    method: str = "auto",
    v0_seed: int = 0,
) -> SpectralResult:
    """Top-r eigenpairs of the block Markov operator D^-1 S.

    Solves the similar symmetric problem D^-1/2 S D^-1/2, maps eigenvectors
    through D^-1/2, unit-normalizes, and applies the canonical sign. Values
    are checked against the unit spectral radius bound.
    """
    n, q = S.n, S.q
    nq = n * q
    if r > nq:
        raise LavdmError(f"requested {r} eigenpairs from an operator of size {nq}")
    degrees = np.asarray(degrees, dtype=float)
    if np.any(degrees <= 0):
        raise LavdmError("degrees must be strictly positive")
    inv_sqrt = degrees**-0.5
    sym = S.scale_blocks(inv_sqrt, inv_sqrt)
    use_dense = method == "dense" or (method == "auto" and (nq <= DENSE_EIG_LIMIT or r > nq // 4))
    if use_dense:
        A = sym.toarray()
        A = 0.5 * (A + A.T)
        vals, vecs = np.linalg.eigh(A)
        vals, vecs = vals[::-1][:r], vecs[:, ::-1][:, :r]
    else:
        rng = np.random.default_rng(v0_seed)
        v0 = rng.standard_normal(nq)
        try:
            vals, vecs = splinalg.eigsh(sym.bsr, k=r, which="LA", v0=v0)
        except splinalg.ArpackError as exc:
            raise SolverFailure(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
    if np.max(np.abs(vals)) > 1.0 + SPECTRAL_RADIUS_TOL:
        raise SolverFailure(
            f"spectral radius bound violated: max |lambda| = {np.max(np.abs(vals))}"
        )
    vecs = vecs * _block_expand(inv_sqrt, q)[:, None]
    vecs /= np.linalg.norm(vecs, axis=0, keepdims=True)
    vecs = canonical_signs(vecs, q)
    return SpectralResult(vals, vecs, q)


def _eig_power(products: np.ndarray, t: float) -> np.ndarray:
    if float(t) != float(int(t)) and np.any(products < 0):
        raise FractionalPowerOfNegative(
            "negative eigenvalue product with non-integer diffusion time"
        )
    # numpy accepts a negative base with an integral float exponent
    return products**t


def vdm_embed(spec: SpectralResult, t: float, r: int | None = None) -> Embedding:
    """Embedding matrices ((lambda_l lambda_s)^t <u_l[i], u_s[i]>)_{l,s<=r}."""
    if t <= 0:
        raise LavdmError("diffusion time must be positive")
    r = spec.r if r is None else int(r)
    if r > spec.r:
        raise LavdmError(f"requested r={r} but only {spec.r} pairs are available")
    vals = spec.values[:r]
    blocks = spec.blocks()[:, :, :r]
    powers = _eig_power(np.outer(vals, vals), t)
    gram = np.einsum("nql,nqs->nls", blocks, blocks)
    return Embedding(gram * powers[None, :, :], float(t))
