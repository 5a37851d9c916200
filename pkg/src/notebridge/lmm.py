"""Gaussian linear mixed model with crossed random intercepts, fit by REML.

The variance ratios theta_k = sigma_k^2 / sigma_e^2 are profiled out of the
restricted likelihood via a sparse penalized least-squares solve; a bounded
quasi-Newton search runs over log(theta).  Fixed effects get Wald z tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import splu
from scipy.stats import norm

from .errors import RankDeficientDesign

_LOG_THETA_MIN = math.log(1e-10)
_LOG_THETA_MAX = math.log(1e6)
_SINGULAR_SD_TOL = 1e-4


@dataclass
class LMMFit:
    beta: np.ndarray
    se: np.ndarray
    cov: np.ndarray
    theta: np.ndarray
    sigma: float
    group_sd: np.ndarray
    reml_loglik: float
    n_obs: int
    converged: bool
    singular: bool

    @property
    def z(self) -> np.ndarray:
        return self.beta / self.se

    @property
    def p(self) -> np.ndarray:
        return 2.0 * norm.sf(np.abs(self.z))


class _REMLProblem:
    """Precomputed cross-products for one (X, y, groups) problem."""

    def __init__(self, X, y, group_codes):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        if np.linalg.matrix_rank(X) < p:
            raise RankDeficientDesign("fixed-effect design is rank deficient")
        self.n, self.p = n, p
        self.X, self.y = X, y
        self.q_sizes = []
        blocks = []
        for codes in group_codes:
            codes = np.asarray(codes)
            uniq, enc = np.unique(codes, return_inverse=True)
            q = uniq.size
            self.q_sizes.append(q)
            Z = sparse.csr_matrix(
                (np.ones(n), (np.arange(n), enc)), shape=(n, q)
            )
            blocks.append(Z)
        self.Z = sparse.hstack(blocks, format="csc") if blocks else None
        self.q = sum(self.q_sizes)
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)
        if self.Z is not None:
            self.ZtZ = (self.Z.T @ self.Z).tocsc()
            self.ZtX = np.asarray(self.Z.T @ X)
            self.Zty = np.asarray(self.Z.T @ y).ravel()

    def _omega(self, theta):
        inv = np.concatenate(
            [np.full(q, 1.0 / t) for q, t in zip(self.q_sizes, theta)]
        )
        return (self.ZtZ + sparse.diags(inv)).tocsc()

    def profile(self, theta):
        """Profiled REML pieces at a given variance-ratio vector."""
        n, p = self.n, self.p
        if self.Z is None or len(theta) == 0:
            xtvx = self.XtX
            xtvy = self.Xty
            ytvy = self.yty
            logdet_v = 0.0
        else:
            omega = self._omega(theta)
            lu = splu(omega)
            rhs = np.column_stack([self.ZtX, self.Zty])
            sol = lu.solve(rhs)
            xtvx = self.XtX - self.ZtX.T @ sol[:, :p]
            xtvy = self.Xty - self.ZtX.T @ sol[:, p]
            ytvy = self.yty - float(self.Zty @ sol[:, p])
            logdet_omega = float(np.log(np.abs(lu.U.diagonal())).sum())
            logdet_v = logdet_omega + float(
                sum(q * math.log(t) for q, t in zip(self.q_sizes, theta))
            )
        try:
            beta = np.linalg.solve(xtvx, xtvy)
        except np.linalg.LinAlgError:
            beta = np.linalg.pinv(xtvx) @ xtvy
        rss = ytvy - float(beta @ xtvy)
        rss = max(rss, 1e-300)
        sigma2 = rss / (n - p)
        sign, logdet_xtvx = np.linalg.slogdet(xtvx)
        if sign <= 0 or not math.isfinite(logdet_xtvx):
            # fixed effects unidentified at this variance ratio; steer away
            return beta, sigma2, xtvx, math.inf
        neg2 = (
            logdet_v
            + logdet_xtvx
            + (n - p) * (math.log(sigma2) + 1.0 + math.log(2.0 * math.pi))
        )
        return beta, sigma2, xtvx, neg2

    def neg2_reml(self, log_theta):
        return self.profile(np.exp(log_theta))[3]


def fit_reml(X, y, group_codes, start_theta=None) -> LMMFit:
    """Fit y = X beta + sum_k Z_k b_k + e by REML.

    group_codes: one label array per crossed random-intercept term.
    """
    prob = _REMLProblem(X, y, group_codes)
    k = len(prob.q_sizes)
    converged = True
    if k == 0:
        theta = np.array([])
    else:
        x0 = np.log(np.full(k, 0.5) if start_theta is None else np.asarray(start_theta, float))
        res = optimize.minimize(
            prob.neg2_reml,
            x0,
            method="L-BFGS-B",
            bounds=[(_LOG_THETA_MIN, _LOG_THETA_MAX)] * k,
            options={"maxiter": 200, "ftol": 1e-12, "gtol": 1e-9},
        )
        # polish with a simplex pass; cheap and guards against a flat L-BFGS stop
        res2 = optimize.minimize(
            prob.neg2_reml, res.x, method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000},
        )
        best = res2 if res2.fun <= res.fun else res
        theta = np.exp(np.clip(best.x, _LOG_THETA_MIN, _LOG_THETA_MAX))
        converged = bool(res.success or res2.success)
        # parsimony tie-break: when the criterion is flat in a component
        # (e.g. singleton groups), prefer the zero-variance boundary
        best_val = prob.profile(theta)[3]
        for j in range(k):
            trial = theta.copy()
            trial[j] = 1e-10
            val = prob.profile(trial)[3]
            if val <= best_val + 1e-7:
                theta, best_val = trial, val

    beta, sigma2, xtvx, neg2 = prob.profile(theta)
    sigma = math.sqrt(sigma2)
    cov = sigma2 * np.linalg.inv(xtvx)
    se = np.sqrt(np.diag(cov))
    group_sd = np.sqrt(theta) * sigma if k else np.array([])
    singular = bool(np.any(group_sd < _SINGULAR_SD_TOL * sigma)) if k else False
    return LMMFit(
        beta=beta,
        se=se,
        cov=cov,
        theta=theta,
        sigma=sigma,
        group_sd=group_sd,
        reml_loglik=-0.5 * neg2,
        n_obs=prob.n,
        converged=converged,
        singular=singular,
    )


def reml_neg2_dense(X, y, group_codes, sigmas, sigma_e):
    """Dense-matrix REML criterion, written independently of the sparse path.

    Used as an oracle: builds V = sigma_e^2 I + sum sigma_k^2 Z_k Z_k' and
    evaluates -2 l_R directly.  Only feasible for small n.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    V = sigma_e**2 * np.eye(n)
    for codes, s in zip(group_codes, sigmas):
        codes = np.asarray(codes)
        Z = (codes[:, None] == np.unique(codes)[None, :]).astype(float)
        V += s**2 * (Z @ Z.T)
    Vinv = np.linalg.inv(V)
    xtvx = X.T @ Vinv @ X
    beta = np.linalg.solve(xtvx, X.T @ Vinv @ y)
    r = y - X @ beta
    _, ld_v = np.linalg.slogdet(V)
    _, ld_x = np.linalg.slogdet(xtvx)
    return float(ld_v + ld_x + r @ Vinv @ r + (n - p) * math.log(2.0 * math.pi))
