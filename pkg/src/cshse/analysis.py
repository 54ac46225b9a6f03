"""Sparse-recovery diagnostics of a measurement matrix.

Mutual coherence is the workhorse (cheap, always computable); spark, the
null-space property and restricted-isometry constants are exact but
combinatorial, so they are offered for small matrices only, with an explicit
subset-count guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

_DEP_TOL = 1e-10          # rank / dependence tolerance, relative to largest sv
_SUBSET_GUARD = 10_000_000


class SubsetBudgetError(Exception):
    """Raised when an exhaustive search would enumerate too many subsets."""


@dataclass(frozen=True)
class MatrixDiagnostics:
    coherence: float
    spark_lower_bound: float
    rank: int
    spark_exact: int | None = None


def coherence(h: np.ndarray) -> float:
    """Largest normalized inner product between two distinct columns."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[1] < 2:
        raise ValueError("coherence needs a matrix with at least 2 columns")
    norms = np.linalg.norm(h, axis=0)
    bad = np.nonzero(norms == 0)[0]
    if bad.size:
        raise ValueError(f"column {bad[0]} is zero")
    g = (h.conj().T @ h) / np.outer(norms, norms)
    np.fill_diagonal(g, 0.0)
    return float(np.max(np.abs(g)))


def spark_exact(h: np.ndarray, max_cols: int | None = None) -> int | None:
    """Smallest number of linearly dependent columns, or None if every
    subset of size <= max_cols is independent.

    Exhaustive over column subsets of increasing size; a subset counts as
    dependent when its smallest singular value is <= 1e-10 relative to its
    largest.  Refuses instances with more than 10^7 subsets at the largest
    size.
    """
    h = np.asarray(h)
    n = h.shape[1]
    if max_cols is None:
        max_cols = n
    max_cols = min(max_cols, n)
    if math.comb(n, max_cols) > _SUBSET_GUARD:
        raise SubsetBudgetError(
            f"C({n},{max_cols}) subsets exceed the {_SUBSET_GUARD:.0e} budget"
        )
    norms = np.linalg.norm(h, axis=0)
    if np.any(norms <= _DEP_TOL * max(norms.max(), 1.0)):
        return 1
    for s in range(2, max_cols + 1):
        for cols in combinations(range(n), s):
            sub = h[:, cols]
            sv = np.linalg.svd(sub, compute_uv=False)
            if sv[-1] <= _DEP_TOL * sv[0]:
                return s
    return None


def spark_lower_bound(h: np.ndarray) -> float:
    """Coherence bound 1 + 1/mu(H); guaranteed <= spark(H).

    Returns inf for orthogonal columns (coherence 0).
    """
    mu = coherence(h)
    if mu == 0:
        return math.inf
    return 1.0 + 1.0 / mu


def matrix_rank(h: np.ndarray) -> int:
    h = np.asarray(h)
    sv = np.linalg.svd(h, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > _DEP_TOL * sv[0]))


def diagnostics(h: np.ndarray, max_cols: int | None = None) -> MatrixDiagnostics:
    mu = coherence(h)
    try:
        spark = spark_exact(h, max_cols)
    except SubsetBudgetError:
        spark = None
    return MatrixDiagnostics(
        coherence=mu,
        spark_lower_bound=(math.inf if mu == 0 else 1.0 + 1.0 / mu),
        rank=matrix_rank(h),
        spark_exact=spark,
    )


def null_space(h: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the null space (columns), via SVD."""
    h = np.asarray(h, dtype=float) if not np.iscomplexobj(h) else np.asarray(h)
    m, n = h.shape
    u, sv, vh = np.linalg.svd(h)
    if sv.size and sv[0] > 0:
        r = int(np.sum(sv > _DEP_TOL * sv[0]))
    else:
        r = 0
    return vh[r:].conj().T


def nsp_coefficient(
    h: np.ndarray, k: int, n_samples: int = 10_000, seed: int = 0
) -> float:
    """Smallest C with ||v_s||_1 <= C ||v_{s^c}||_1 over null-space directions
    and all supports of size k.

    The worst support of a direction v is the k largest |v_i|, so no subset
    enumeration is needed; the supremum over the null space is approximated
    by the canonical basis plus ``n_samples`` random unit directions (exact
    for 1-D null spaces).  Returns 0 for a trivial null space and inf when a
    null-space direction is itself k-sparse.
    """
    h = np.asarray(h)
    if k < 1 or k > h.shape[1]:
        raise ValueError(f"k must be in 1..{h.shape[1]}")
    basis = null_space(h)
    d = basis.shape[1]
    if d == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=(d, n_samples))
    if np.iscomplexobj(basis):
        coeffs = coeffs + 1j * rng.normal(size=(d, n_samples))
    dirs = np.concatenate([basis, basis @ coeffs], axis=1)
    mags = np.sort(np.abs(dirs), axis=0)[::-1]
    top = mags[:k].sum(axis=0)
    rest = mags[k:].sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rest > 0, top / rest, np.inf)
    return float(np.max(ratios))


def rip_constant(h: np.ndarray, k: int) -> float:
    """Restricted isometry constant delta_k of the column-normalized matrix.

    Exhaustive over size-k column subsets: delta_k is the worst deviation of
    a subset Gram spectrum from 1.
    """
    h = np.asarray(h)
    n = h.shape[1]
    if k < 1 or k > n:
        raise ValueError(f"k must be in 1..{n}")
    if math.comb(n, k) > _SUBSET_GUARD:
        raise SubsetBudgetError(
            f"C({n},{k}) subsets exceed the {_SUBSET_GUARD:.0e} budget"
        )
    norms = np.linalg.norm(h, axis=0)
    bad = np.nonzero(norms == 0)[0]
    if bad.size:
        raise ValueError(f"column {bad[0]} is zero")
    hn = h / norms
    delta = 0.0
    for cols in combinations(range(n), k):
        g = hn[:, cols].conj().T @ hn[:, cols]
        eigs = np.linalg.eigvalsh(g)
        delta = max(delta, abs(eigs[-1] - 1.0), abs(1.0 - eigs[0]))
    return float(delta)
