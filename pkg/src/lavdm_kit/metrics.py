"""Comparison metrics between two spectral decompositions.

Eigenpair indices are 1-based throughout, matching the experiment tables
("1st, 3rd, 5th eigenvector"). Masked vectors are plain float arrays with
NaN marking masked entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllMasked, LavdmError, ZeroReferenceEigenvalue

MASK_CUTOFF = 1e-7


def _eigpair(spec, l: int):
    """(value, unit vector, q) of the l-th (1-based) eigenpair."""
    values = getattr(spec, "values", None)
    if values is None:
        values = spec.markov_eigenvalues
    if l < 1 or l > len(values):
        raise LavdmError(f"eigenpair index {l} out of range 1..{len(values)}")
    vec = spec.vectors[:, l - 1]
    nrm = np.linalg.norm(vec)
    if nrm == 0.0:
        raise LavdmError(f"eigenvector {l} is zero")
    return float(values[l - 1]), vec / nrm, spec.q


@dataclass(frozen=True)
class EigenComparison:
    """Scalar comparison of one eigenpair across two methods."""

    index: int
    value_diff_ratio: float
    cosine: float
    aligned_l2: float
    sign: int


@dataclass(frozen=True)
class PointwiseFields:
    """Pointwise eigenvector-field discrepancies, NaN where masked.

    i2: relative block L2 difference; ia: blockwise cosine; im: relative
    magnitude difference. i2 and im are masked where the reference block
    norm is below 1e-7; ia additionally where the candidate block norm is.
    """

    i2: np.ndarray
    ia: np.ndarray
    im: np.ndarray


def compare_eigenpair(l: int, candidate, reference) -> EigenComparison:
    """Eigenvalue difference ratio, raw cosine, and sign-aligned L2 gap.

    candidate and reference are spectral results (landmark or vanilla);
    vectors are unit-normalized before comparison and the L2 gap takes the
    better of the two global signs.
    """
    lam, w, _ = _eigpair(candidate, l)
    mu, v, _ = _eigpair(reference, l)
    if mu == 0.0:
        raise ZeroReferenceEigenvalue(f"reference eigenvalue {l} is zero")
    ratio = abs(lam - mu) / abs(mu)
    cosine = float(w @ v)
    d_plus = float(np.linalg.norm(w - v))
    d_minus = float(np.linalg.norm(w + v))
    sign = 1 if d_plus <= d_minus else -1
    return EigenComparison(l, ratio, cosine, min(d_plus, d_minus), sign)


def pointwise_fields(l: int, candidate, reference, align_sign: bool = True) -> PointwiseFields:
    """The three pointwise discrepancy fields for the l-th eigenvectors.

    With align_sign (default) the candidate is first flipped to the global
    sign minimizing the L2 gap, so the fields measure shape rather than a
    sign convention.
    """
    _, w, qw = _eigpair(candidate, l)
    _, v, qv = _eigpair(reference, l)
    if qw != qv or w.shape != v.shape:
        raise LavdmError("spectra have inconsistent block structure")
    if align_sign:
        w = w * compare_eigenpair(l, candidate, reference).sign
    q = qw
    n = w.shape[0] // q
    wb = w.reshape(n, q)
    vb = v.reshape(n, q)
    nw = np.linalg.norm(wb, axis=1)
    nv = np.linalg.norm(vb, axis=1)
    ref_ok = nv >= MASK_CUTOFF
    both_ok = ref_ok & (nw >= MASK_CUTOFF)
    i2 = np.full(n, np.nan)
    ia = np.full(n, np.nan)
    im = np.full(n, np.nan)
    i2[ref_ok] = np.linalg.norm(wb - vb, axis=1)[ref_ok] / nv[ref_ok]
    ia[both_ok] = np.sum(wb * vb, axis=1)[both_ok] / (nw[both_ok] * nv[both_ok])
    im[ref_ok] = np.abs(nv - nw)[ref_ok] / nv[ref_ok]
    return PointwiseFields(i2, ia, im)


def median_mad(values: np.ndarray) -> tuple:
    """Median and unscaled median absolute deviation over unmasked entries."""
    values = np.asarray(values, dtype=float)
    keep = values[~np.isnan(values)]
    if keep.size == 0:
        raise AllMasked("all entries are masked")
    med = float(np.median(keep))
    return med, float(np.median(np.abs(keep - med)))


def match_eigenvectors(
    reference, candidate, r: int, mode: str = "index", window: float = 0.02
) -> np.ndarray:
    """Pair the first r reference eigenpairs with candidate eigenpairs.

    mode "index" pairs by descending-eigenvalue position. mode "window"
    pairs each reference vector with the unused candidate of maximal
    |cosine| among those whose eigenvalue lies within the given relative
    window, falling back to the index position when the window is empty.
    Returns 0-based candidate positions.
    """
    if mode == "index":
        return np.arange(r)
    if mode != "window":
        raise LavdmError(f"unknown matching mode {mode!r}")
    ref_vals = np.array([_eigpair(reference, l)[0] for l in range(1, r + 1)])
    cand_count = len(getattr(candidate, "values", None) if hasattr(candidate, "values") else candidate.markov_eigenvalues)
    cand_vals = np.array([_eigpair(candidate, l)[0] for l in range(1, cand_count + 1)])
    pairing = np.full(r, -1)
    used = np.zeros(cand_count, dtype=bool)
    for pos in range(r):
        scale = max(abs(ref_vals[pos]), 1e-300)
        near = np.where(
            (~used) & (np.abs(cand_vals - ref_vals[pos]) / scale <= window)
        )[0]
        if near.size == 0:
            choice = pos if pos < cand_count and not used[pos] else int(np.argmax(~used))
        else:
            _, v_ref, _ = _eigpair(reference, pos + 1)
            cosines = [
                abs(float(_eigpair(candidate, int(c) + 1)[1] @ v_ref)) for c in near
            ]
            choice = int(near[int(np.argmax(cosines))])
        pairing[pos] = choice
        used[choice] = True
    return pairing
