"""Matrix-factorization bridging scorer.

Fits r_un ~ mu + i_u + i_n + f_u . f_n by alternating ridge updates.  Each
side's update is an exact small ridge solve, so the penalized objective is
non-increasing sweep over sweep.  The note intercept i_n is the helpfulness
score; ridge shrinkage on intercepts is what deflates low-rating-count notes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .data import Dataset, NoteStatusRecord, Status
from .errors import InvalidConfig, NoRatings


@dataclass(frozen=True)
class ScoringConfig:
    factor_dim: int = 1
    lambda_intercept: float = 0.15
    lambda_factor: float = 0.03
    crh_threshold: float = 0.40
    crnh_threshold: float = -0.05
    max_iterations: int = 500
    convergence_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lambda_intercept <= 0:
            raise InvalidConfig("lambda_intercept must be > 0")
        if self.lambda_factor < 0:
            raise InvalidConfig("lambda_factor must be >= 0")
        if self.crnh_threshold >= self.crh_threshold:
            raise InvalidConfig("crnh_threshold must be below crh_threshold")
        if self.factor_dim < 0:
            raise InvalidConfig("factor_dim must be >= 0")


@dataclass
class ScoringResult:
    global_intercept: float
    rater_params: dict[str, tuple[float, np.ndarray]]
    note_params: dict[str, tuple[float, np.ndarray]]
    statuses: dict[str, NoteStatusRecord]
    objective: float
    iterations_used: int
    converged: bool = True

    def note_scores(self) -> dict[str, float]:
        return {nid: p[0] for nid, p in self.note_params.items()}

    def to_rows(self):
        for nid in sorted(self.note_params):
            score, _ = self.note_params[nid]
            yield nid, score, self.statuses[nid].status.value

    def to_dict(self) -> dict:
        return {
            "global_intercept": self.global_intercept,
            "objective": self.objective,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "raters": {
                rid: {"intercept": i, "factor": list(map(float, f))}
                for rid, (i, f) in sorted(self.rater_params.items())
            },
            "notes": {
                nid: {
                    "helpfulness_score": s,
                    "factor": list(map(float, f)),
                    "status": self.statuses[nid].status.value,
                }
                for nid, (s, f) in sorted(self.note_params.items())
            },
        }


def _ratings_arrays(ratings):
    """Integer-code rater and note ids; ids are sorted for label invariance."""
    rater_ids = sorted({r.rater_id for r in ratings})
    note_ids = sorted({r.note_id for r in ratings})
    rmap = {r: i for i, r in enumerate(rater_ids)}
    nmap = {n: i for i, n in enumerate(note_ids)}
    u = np.array([rmap[r.rater_id] for r in ratings], dtype=np.intp)
    n = np.array([nmap[r.note_id] for r in ratings], dtype=np.intp)
    v = np.array([r.value for r in ratings], dtype=float)
    return rater_ids, note_ids, u, n, v


class BridgingScorer(BaseEstimator):
    """Alternating-ridge bridging matrix factorization.

    Parameters mirror :class:`ScoringConfig`.  ``fit`` accepts three aligned
    integer/float arrays (rater codes, note codes, rating values).
    """

    def __init__(self, factor_dim=1, lambda_intercept=0.15, lambda_factor=0.03,
                 crh_threshold=0.40, crnh_threshold=-0.05, max_iterations=500,
                 convergence_tol=1e-8, seed=0):
        self.factor_dim = factor_dim
        self.lambda_intercept = lambda_intercept
        self.lambda_factor = lambda_factor
        self.crh_threshold = crh_threshold
        self.crnh_threshold = crnh_threshold
        self.max_iterations = max_iterations
        self.convergence_tol = convergence_tol
        self.seed = seed

    def _config(self) -> ScoringConfig:
        return ScoringConfig(
            factor_dim=self.factor_dim,
            lambda_intercept=self.lambda_intercept,
            lambda_factor=self.lambda_factor,
            crh_threshold=self.crh_threshold,
            crnh_threshold=self.crnh_threshold,
            max_iterations=self.max_iterations,
            convergence_tol=self.convergence_tol,
            seed=self.seed,
        )

    def objective(self, u, n, v, mu, ri, rf, ni, nf):
        resid = v - mu - ri[u] - ni[n] - np.sum(rf[u] * nf[n], axis=1)
        li, lf = self.lambda_intercept, self.lambda_factor
        return (
            float(resid @ resid)
            + li * (mu * mu + float(ri @ ri) + float(ni @ ni))
            + lf * (float((rf * rf).sum()) + float((nf * nf).sum()))
        )

    def fit(self, rater_codes, note_codes, values):
        cfg = self._config()
        u = np.asarray(rater_codes, dtype=np.intp)
        n = np.asarray(note_codes, dtype=np.intp)
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            raise NoRatings("no ratings to fit")
        n_raters = int(u.max()) + 1
        n_notes = int(n.max()) + 1
        k = cfg.factor_dim

        rng = np.random.default_rng(cfg.seed)
        mu = 0.0
        ri = np.zeros(n_raters)
        ni = np.zeros(n_notes)
        rf = rng.uniform(-0.1, 0.1, size=(n_raters, k))
        nf = rng.uniform(-0.1, 0.1, size=(n_notes, k))

        li, lf = cfg.lambda_intercept, cfg.lambda_factor
        penalty = np.diag(np.concatenate([[li], np.full(k, lf)]))
        n_obs = v.size

        prev = self.objective(u, n, v, mu, ri, rf, ni, nf)
        converged = False
        it = 0
        for it in range(1, cfg.max_iterations + 1):
            # global intercept
            resid = v - ri[u] - ni[n] - np.sum(rf[u] * nf[n], axis=1)
            mu = float(resid.sum() / (n_obs + li))

            # rater side: joint (intercept, factor) ridge per rater
            ri, rf = self._update_side(u, n, v - mu - ni[n], nf, n_raters, penalty, k)
            # note side
            ni, nf = self._update_side(n, u, v - mu - ri[u], rf, n_notes, penalty, k)

            obj = self.objective(u, n, v, mu, ri, rf, ni, nf)
            if prev - obj < cfg.convergence_tol:
                converged = True
                prev = obj
                break
            prev = obj

        self.global_intercept_ = mu
        self.rater_intercepts_ = ri
        self.rater_factors_ = rf
        self.note_intercepts_ = ni
        self.note_factors_ = nf
        self.objective_ = prev
        self.n_iter_ = it
        self.converged_ = converged
        return self

    @staticmethod
    def _update_side(own, other, target, other_factors, n_own, penalty, k):
        """Exact ridge solve for one side's (intercept, factor) blocks."""
        design = np.empty((own.size, 1 + k))
        design[:, 0] = 1.0
        design[:, 1:] = other_factors[other]
        gram = np.zeros((n_own, 1 + k, 1 + k))
        rhs = np.zeros((n_own, 1 + k))
        outer = design[:, :, None] * design[:, None, :]
        np.add.at(gram, own, outer)
        np.add.at(rhs, own, design * target[:, None])
        gram += penalty[None, :, :]
        sol = np.linalg.solve(gram, rhs[:, :, None])[:, :, 0]
        return sol[:, 0].copy(), sol[:, 1:].copy()


def fit_bridging(d: Dataset | list, cfg: ScoringConfig = ScoringConfig()) -> ScoringResult:
    """Fit the bridging MF on a Dataset (or rating list) and assign statuses."""
    ratings = d.ratings if isinstance(d, Dataset) else list(d)
    if not ratings:
        raise NoRatings("dataset has no ratings")
    rater_ids, note_ids, u, n, v = _ratings_arrays(ratings)
    est = BridgingScorer(**_config_kwargs(cfg)).fit(u, n, v)
    rater_params = {
        rid: (float(est.rater_intercepts_[i]), est.rater_factors_[i].copy())
        for i, rid in enumerate(rater_ids)
    }
    note_params = {
        nid: (float(est.note_intercepts_[i]), est.note_factors_[i].copy())
        for i, nid in enumerate(note_ids)
    }
    res = ScoringResult(
        global_intercept=float(est.global_intercept_),
        rater_params=rater_params,
        note_params=note_params,
        statuses={},
        objective=float(est.objective_),
        iterations_used=est.n_iter_,
        converged=bool(est.converged_),
    )
    res.statuses = assign_status(res, cfg)
    return res


def _config_kwargs(cfg: ScoringConfig) -> dict:
    return {
        "factor_dim": cfg.factor_dim,
        "lambda_intercept": cfg.lambda_intercept,
        "lambda_factor": cfg.lambda_factor,
        "crh_threshold": cfg.crh_threshold,
        "crnh_threshold": cfg.crnh_threshold,
        "max_iterations": cfg.max_iterations,
        "convergence_tol": cfg.convergence_tol,
        "seed": cfg.seed,
    }


def assign_status(res: ScoringResult, cfg: ScoringConfig) -> dict[str, NoteStatusRecord]:
    """Threshold the note scores; ties resolve inclusively toward the status."""
    statuses = {}
    for nid, (score, _) in res.note_params.items():
        if score >= cfg.crh_threshold:
            status = Status.CRH
        elif score <= cfg.crnh_threshold:
            status = Status.CRNH
        else:
            status = Status.NMR
        statuses[nid] = NoteStatusRecord(note_id=nid, status=status)
    return statuses


def _profile_values(profile: dict[float, float], count: int) -> np.ndarray:
    """Expand a {value: weight} mixture into exactly `count` ratings.

    Largest-remainder rounding keeps the empirical mix as close to the
    profile as integer counts allow.
    """
    values = sorted(profile)
    weights = np.array([profile[v] for v in values], dtype=float)
    weights = weights / weights.sum()
    raw = weights * count
    base = np.floor(raw).astype(int)
    short = count - base.sum()
    order = np.argsort(-(raw - base))
    for j in order[:short]:
        base[j] += 1
    return np.repeat(values, base).astype(float)


def shrinkage_curve(profile: dict[float, float], counts, cfg: ScoringConfig = ScoringConfig(),
                    rater_intercept: float = 0.0, rater_factor: float = 0.0,
                    global_intercept: float = 0.0):
    """Fitted note intercept vs rating count for a fixed rating mixture.

    Rater parameters and the global intercept are held fixed so the curve
    isolates how the ridge penalty on the note intercept fades as the data
    term grows with rating count.  count 0 returns the pure-shrinkage score 0.
    """
    counts = list(counts)
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise InvalidConfig("counts must be strictly increasing")
    k = cfg.factor_dim
    out = []
    for count in counts:
        if count == 0:
            out.append((0, 0.0))
            continue
        v = _profile_values(profile, count)
        # ridge solve for (i_n, f_n) with rater side fixed
        design = np.empty((count, 1 + k))
        design[:, 0] = 1.0
        design[:, 1:] = rater_factor
        target = v - global_intercept - rater_intercept
        penalty = np.diag(np.concatenate([[cfg.lambda_intercept], np.full(k, cfg.lambda_factor)]))
        sol = np.linalg.solve(design.T @ design + penalty, design.T @ target)
        out.append((count, float(sol[0])))
    return out
