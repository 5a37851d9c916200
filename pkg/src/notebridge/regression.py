"""OLS with CR2 leverage-adjusted cluster-robust covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import t as t_dist

from .errors import RankDeficientDesign


@dataclass
class OLSFit:
    beta: np.ndarray
    se: np.ndarray
    cov: np.ndarray
    df: int
    n_obs: int
    n_clusters: int

    @property
    def t(self) -> np.ndarray:
        return self.beta / self.se

    @property
    def p(self) -> np.ndarray:
        return 2.0 * t_dist.sf(np.abs(self.t), self.df)


def _sym_inv_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root via eigendecomposition (pinv on tiny eigs)."""
    w, V = np.linalg.eigh((M + M.T) / 2.0)
    inv_sqrt = np.where(w > 1e-12, 1.0 / np.sqrt(np.clip(w, 1e-12, None)), 0.0)
    return (V * inv_sqrt) @ V.T


def fit_ols_cr2(X, y, clusters) -> OLSFit:
    """OLS point estimates with CR2 cluster-robust SEs, t tests on G-1 df."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    clusters = np.asarray(clusters)
    n, p = X.shape
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficientDesign("design matrix is rank deficient")

    XtX = X.T @ X
    bread = np.linalg.inv(XtX)
    beta = bread @ (X.T @ y)
    resid = y - X @ beta

    meat = np.zeros((p, p))
    labels = np.unique(clusters)
    for g in labels:
        mask = clusters == g
        Xg = X[mask]
        eg = resid[mask]
        Hgg = Xg @ bread @ Xg.T
        Ag = _sym_inv_sqrt(np.eye(Xg.shape[0]) - Hgg)
        s = Xg.T @ (Ag @ eg)
        meat += np.outer(s, s)
    cov = bread @ meat @ bread
    se = np.sqrt(np.diag(cov))
    return OLSFit(
        beta=beta,
        se=se,
        cov=cov,
        df=max(labels.size - 1, 1),
        n_obs=n,
        n_clusters=labels.size,
    )
