"""Regression layer: the rating-level mixed-model grid, equal-exposure
note-level outcome models, and subgroup re-estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data import Bucket, BucketConfig, Dataset, Status, TopicLabel, bucket_factor
from .errors import SubsetTooSmall
from .lmm import fit_reml
from .regression import fit_ols_cr2
from .scorer import ScoringResult
from .stats import bh_adjust


class Estimator(str, enum.Enum):
    REML_LMM = "reml-lmm"
    OLS_CR2 = "ols-cr2"


@dataclass(frozen=True)
class ModelSpec:
    outcome: str
    fixed_terms: tuple[str, ...]
    random_intercepts: tuple[str, ...] = ()
    estimator: Estimator = Estimator.REML_LMM
    cluster: str | None = None

    def __post_init__(self):
        if "factor2" in self.fixed_terms and "factor" not in self.fixed_terms:
            raise ValueError("factor2 requires factor (term hierarchy)")


@dataclass(frozen=True)
class Coef:
    estimate: float
    se: float
    stat: float
    p: float
    adj_p: float | None = None


@dataclass
class FitResult:
    coefficients: dict[str, Coef]
    variance_components: dict[str, float]
    residual_sd: float
    n_obs: int
    converged: bool
    log_restricted_likelihood: float | None = None
    method: str = "reml-lmm"
    singular: bool = False
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "singular": self.singular,
            "log_restricted_likelihood": self.log_restricted_likelihood,
            "residual_sd": self.residual_sd,
            "variance_components": self.variance_components,
            "coefficients": {
                term: {
                    "estimate": c.estimate,
                    "se": c.se,
                    "stat": c.stat,
                    "p": c.p,
                    "adj_p": c.adj_p,
                }
                for term, c in self.coefficients.items()
            },
        }


_TERM_BUILDERS = {
    "AI": lambda f: f["AI"].to_numpy(float),
    "factor": lambda f: f["factor"].to_numpy(float),
    "factor2": lambda f: f["factor"].to_numpy(float) ** 2,
    "AI:factor": lambda f: f["AI"].to_numpy(float) * f["factor"].to_numpy(float),
    "AI:factor2": lambda f: f["AI"].to_numpy(float) * f["factor"].to_numpy(float) ** 2,
    "left": lambda f: (f["bucket"] == Bucket.LEFT.value).to_numpy(float),
    "right": lambda f: (f["bucket"] == Bucket.RIGHT.value).to_numpy(float),
    "AI:left": lambda f: f["AI"].to_numpy(float) * (f["bucket"] == Bucket.LEFT.value).to_numpy(float),
    "AI:right": lambda f: f["AI"].to_numpy(float) * (f["bucket"] == Bucket.RIGHT.value).to_numpy(float),
}


def build_design(frame: pd.DataFrame, terms) -> tuple[np.ndarray, list[str]]:
    """Intercept-first design matrix from named terms over the analysis frame."""
    cols = [np.ones(len(frame))]
    names = ["(Intercept)"]
    for term in terms:
        cols.append(_TERM_BUILDERS[term](frame))
        names.append(term)
    return np.column_stack(cols), names


def rating_frame(d: Dataset, bucket_cfg: BucketConfig = BucketConfig()) -> pd.DataFrame:
    """Rating-level analysis frame: value, AI, factor, bucket, grouping ids."""
    df = d.ratings_frame(with_context=True)
    df = df[df["factor"].notna() & df["isAi"].notna()].copy()
    df["AI"] = df["isAi"].astype(float)
    df["bucket"] = [bucket_factor(f, bucket_cfg).value for f in df["factor"]]
    return df


def _lmm_fit_result(frame, outcome, terms, random_intercepts) -> FitResult:
    X, names = build_design(frame, terms)
    y = frame[outcome].to_numpy(float)
    groups = [frame[g].to_numpy() for g in random_intercepts]
    fit = fit_reml(X, y, groups)
    coefs = {
        name: Coef(float(b), float(s), float(z), float(p))
        for name, b, s, z, p in zip(names, fit.beta, fit.se, fit.z, fit.p)
    }
    return FitResult(
        coefficients=coefs,
        variance_components={g: float(sd) for g, sd in zip(random_intercepts, fit.group_sd)},
        residual_sd=float(fit.sigma),
        n_obs=fit.n_obs,
        converged=fit.converged,
        log_restricted_likelihood=float(fit.reml_loglik),
        method="reml-lmm",
        singular=fit.singular,
    )


def _ols_fit_result(frame, outcome, terms, cluster) -> FitResult:
    X, names = build_design(frame, terms)
    y = frame[outcome].to_numpy(float)
    fit = fit_ols_cr2(X, y, frame[cluster].to_numpy())
    coefs = {
        name: Coef(float(b), float(s), float(t), float(p))
        for name, b, s, t, p in zip(names, fit.beta, fit.se, fit.t, fit.p)
    }
    return FitResult(
        coefficients=coefs,
        variance_components={},
        residual_sd=float(np.std(y - X @ fit.beta, ddof=X.shape[1])),
        n_obs=fit.n_obs,
        converged=True,
        method="ols-cr2",
        notes={"n_clusters": fit.n_clusters, "df": fit.df},
    )


def fit_model(frame: pd.DataFrame, spec: ModelSpec) -> FitResult:
    if spec.estimator is Estimator.REML_LMM:
        return _lmm_fit_result(frame, spec.outcome, spec.fixed_terms, spec.random_intercepts)
    if spec.cluster is None:
        raise ValueError("OLS-CR2 requires a cluster field")
    return _ols_fit_result(frame, spec.outcome, spec.fixed_terms, spec.cluster)


MAIN_TERMS = ("AI", "factor", "factor2", "AI:factor", "AI:factor2")
GROUP_TERMS = ("AI", "left", "right", "AI:left", "AI:right")

TABLE1_SPECS = {
    "model1_note_rater_re": ModelSpec("value", MAIN_TERMS, ("noteId", "raterId")),
    "model2_tweet_rater_re": ModelSpec("value", MAIN_TERMS, ("tweetId", "raterId")),
    "model3_ols_cr2": ModelSpec("value", MAIN_TERMS, estimator=Estimator.OLS_CR2, cluster="noteId"),
    "model4_bucket_re": ModelSpec("value", GROUP_TERMS, ("noteId", "raterId")),
}


def run_table1(d: Dataset, bucket_cfg: BucketConfig = BucketConfig()) -> dict[str, FitResult]:
    """The four rating-level specifications, keyed by model name."""
    frame = rating_frame(d, bucket_cfg)
    return {name: fit_model(frame, spec) for name, spec in TABLE1_SPECS.items()}


EQ2_OUTCOMES = ("helpfulness_score", "crh", "crnh")


def note_outcome_frame(scores: ScoringResult, d: Dataset) -> pd.DataFrame:
    """Per-note outcomes for scored notes: score, CRH/CRNH indicators, AI, tweet."""
    rows = []
    for nid, (score, _) in scores.note_params.items():
        note = d.notes.get(nid)
        if note is None:
            continue
        status = scores.statuses[nid].status
        rows.append(
            (nid, note.tweet_id, float(note.is_ai), score,
             float(status is Status.CRH), float(status is Status.CRNH))
        )
    return pd.DataFrame(
        rows, columns=["noteId", "tweetId", "AI", "helpfulness_score", "crh", "crnh"]
    ).sort_values("noteId", ignore_index=True)


def run_eq2_outcomes(scores: ScoringResult, d: Dataset) -> dict[str, FitResult]:
    """outcome ~ AI + (1|tweetId) per note-level outcome, BH-adjusted AI p-values.

    Binary statuses enter as linear probability models.
    """
    frame = note_outcome_frame(scores, d)
    results = {}
    for outcome in EQ2_OUTCOMES:
        results[outcome] = _lmm_fit_result(frame, outcome, ("AI",), ("tweetId",))
    raw = [results[o].coefficients["AI"].p for o in EQ2_OUTCOMES]
    adj = bh_adjust(raw)
    for outcome, a in zip(EQ2_OUTCOMES, adj):
        c = results[outcome].coefficients["AI"]
        results[outcome].coefficients["AI"] = Coef(c.estimate, c.se, c.stat, c.p, float(a))
    return results


def subgroup_fits(d: Dataset, labels: list[TopicLabel], axis: str,
                  bucket_cfg: BucketConfig = BucketConfig(),
                  min_ratings: int = 500) -> dict[str, FitResult]:
    """Re-estimate the main rating-level model within each tweet label.

    Labels whose rating subset falls below min_ratings are skipped; the skip
    is recorded in the returned notice list attached to each FitResult absent.
    """
    if axis not in ("topic", "modality"):
        raise ValueError("axis must be 'topic' or 'modality'")
    label_of = {lab.tweet_id: getattr(lab, axis) for lab in labels}
    frame = rating_frame(d, bucket_cfg)
    frame["label"] = frame["tweetId"].map(label_of)
    spec = TABLE1_SPECS["model1_note_rater_re"]
    results: dict[str, FitResult] = {}
    for label, sub in frame.groupby("label", sort=True):
        if len(sub) < min_ratings:
            raise SubsetTooSmall(
                f"label {label!r} has {len(sub)} ratings (< {min_ratings})"
            )
        results[str(label)] = fit_model(sub.reset_index(drop=True), spec)
    return results


def subgroup_fits_with_notices(d, labels, axis, bucket_cfg=BucketConfig(),
                               min_ratings: int = 500):
    """Like subgroup_fits but skips small subsets, returning (fits, notices)."""
    label_of = {lab.tweet_id: getattr(lab, axis) for lab in labels}
    frame = rating_frame(d, bucket_cfg)
    frame["label"] = frame["tweetId"].map(label_of)
    spec = TABLE1_SPECS["model1_note_rater_re"]
    results: dict[str, FitResult] = {}
    notices: list[str] = []
    for label, sub in frame.groupby("label", sort=True):
        if len(sub) < min_ratings:
            notices.append(f"skipped {label!r}: {len(sub)} ratings < {min_ratings}")
            continue
        results[str(label)] = fit_model(sub.reset_index(drop=True), spec)
    return results, notices


def ai_effect_table(fits: dict[str, FitResult], ci_level: float = 0.95) -> pd.DataFrame:
    """Plot-ready AI main effect with Wald CI per label."""
    from scipy.stats import norm

    zcrit = float(norm.ppf(0.5 + ci_level / 2.0))
    rows = []
    for label in sorted(fits):
        c = fits[label].coefficients["AI"]
        rows.append((label, c.estimate, c.estimate - zcrit * c.se, c.estimate + zcrit * c.se))
    return pd.DataFrame(rows, columns=["label", "estimate", "ci_low", "ci_high"])
