"""Nonparametric and classical test statistics used by the descriptive tables."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import DegenerateSample, EmptySample


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n_a: int
    n_b: int
    df: float | None = None


# exact enumeration only while the subset count stays tractable
_MAX_EXACT_COMBINATIONS = 2_000_000


def _u_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """U for sample a via midranks (tie-aware)."""
    pooled = np.concatenate([a, b])
    ranks = sps.rankdata(pooled)
    r_a = ranks[: a.size].sum()
    return float(r_a - a.size * (a.size + 1) / 2.0)


def mann_whitney_u(a, b, exact_limit: int = 10_000) -> TestResult:
    """Two-sided Mann-Whitney U test.

    Uses exact enumeration over group assignments when n_a*n_b <= exact_limit
    and the number of assignments is tractable; otherwise the tie-corrected
    normal approximation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be non-empty")
    n_a, n_b = a.size, b.size
    u = _u_statistic(a, b)
    mean_u = n_a * n_b / 2.0

    if n_a * n_b <= exact_limit and math.comb(n_a + n_b, n_a) <= _MAX_EXACT_COMBINATIONS:
        pooled = np.concatenate([a, b])
        ranks = sps.rankdata(pooled)
        offset = n_a * (n_a + 1) / 2.0
        dev = abs(u - mean_u)
        hits = 0
        total = 0
        for idx in itertools.combinations(range(n_a + n_b), n_a):
            u_perm = ranks[list(idx)].sum() - offset
            if abs(u_perm - mean_u) >= dev - 1e-12:
                hits += 1
            total += 1
        return TestResult(u, hits / total, "mann-whitney-exact", n_a, n_b)

    # tie-corrected normal approximation
    pooled = np.concatenate([a, b])
    n = n_a + n_b
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = ((tie_counts**3 - tie_counts).sum()) / (n * (n - 1)) if n > 1 else 0.0
    var_u = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if var_u <= 0:
        return TestResult(u, 1.0, "mann-whitney-normal", n_a, n_b)
    z = (u - mean_u) / math.sqrt(var_u)
    p = 2.0 * sps.norm.sf(abs(z))
    return TestResult(u, min(1.0, p), "mann-whitney-normal", n_a, n_b)


def welch_t(a, b) -> TestResult:
    """Welch's unequal-variance t test with Welch-Satterthwaite df, two-sided."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise EmptySample("each sample needs at least 2 values")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    if va + vb == 0:
        if a.mean() == b.mean():
            raise DegenerateSample("zero variance in both samples")
        raise DegenerateSample("zero variance with unequal means")
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    p = 2.0 * sps.t.sf(abs(t), df)
    return TestResult(float(t), float(p), "welch-t", a.size, b.size, df=float(df))


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: sup |ECDF_a - ECDF_b|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def bh_adjust(pvalues) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values."""
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(adj[::-1])[::-1]
    adj = np.minimum(adj, 1.0)
    out = np.empty(m)
    out[order] = adj
    return out
