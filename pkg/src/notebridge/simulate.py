"""Synthetic platform simulator: raters, notes, timing-dependent rating
arrivals, and discretized ratings from a known generative model.

Each tweet draws from its own seeded substream, so parallel and serial runs
produce identical output.  The emitted Dataset loads through the normal
ingestion path unchanged; the generating parameters come back as SimTruth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, Note, Rating, RaterProfile
from .errors import InvalidConfig
from .exposure import build_complete_blocks, rescore_equal_exposure
from .scorer import ScoringConfig, fit_bridging

MS_PER_HOUR = 3_600_000


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: float
    sd: float


# polarized population: two wings plus a neutral center
DEFAULT_FACTOR_MIXTURE = (
    MixtureComponent(0.4, -0.5, 0.15),
    MixtureComponent(0.4, +0.5, 0.15),
    MixtureComponent(0.2, 0.0, 0.05),
)


@dataclass(frozen=True)
class GroupQuality:
    mean: float
    sd: float


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_tweets: int = 150
    notes_per_tweet: int = 2
    n_raters: int = 500
    rater_pool_size: int = 15
    rater_factor_mixture: tuple[MixtureComponent, ...] = DEFAULT_FACTOR_MIXTURE
    rater_intercept_sd: float = 0.05
    llm_quality: GroupQuality = GroupQuality(0.35, 0.10)
    human_quality: GroupQuality = GroupQuality(0.25, 0.10)
    note_factor_sd: float = 0.10
    ai_lag_hours: float = 6.0
    ai_lag_fixed: bool = False
    arrival_base_rate: float = 3.0  # expected visitors per hour at tweet age 0
    arrival_decay_hours: float = 2.0
    horizon_hours: float = 48.0
    global_intercept: float = 0.45
    noise_sd: float = 0.08
    discretization_cuts: tuple[float, float] = (0.35, 0.75)
    # low-quality, heavily rated background corpus that anchors the global
    # intercept below the comparison notes (shrinkage then deflates toward it)
    background_tweets: int = 200
    background_quality: GroupQuality = GroupQuality(-0.55, 0.10)

    def __post_init__(self):
        if self.discretization_cuts[0] >= self.discretization_cuts[1]:
            raise InvalidConfig("discretization_cuts must be strictly increasing")
        if self.horizon_hours <= 0:
            raise InvalidConfig("horizon must be positive")
        for sd in (self.rater_intercept_sd, self.noise_sd, self.note_factor_sd,
                   self.llm_quality.sd, self.human_quality.sd):
            if sd < 0:
                raise InvalidConfig("standard deviations must be >= 0")
        if abs(sum(c.weight for c in self.rater_factor_mixture) - 1.0) > 1e-9:
            raise InvalidConfig("mixture weights must sum to 1")


@dataclass
class SimTruth:
    rater_intercepts: dict[str, float]
    rater_factors: dict[str, float]
    note_quality: dict[str, float]
    note_group: dict[str, str]
    note_created_at: dict[str, int]
    rating_latents: list[tuple[str, str, float, float]]  # (rater, note, latent, value)

    def to_dict(self) -> dict:
        return {
            "rater_intercepts": self.rater_intercepts,
            "rater_factors": self.rater_factors,
            "note_quality": self.note_quality,
            "note_group": self.note_group,
            "note_created_at": self.note_created_at,
            "rating_latents": [list(t) for t in self.rating_latents],
        }


def expected_arrivals(cfg: SimConfig, note_age_offset_hours: float) -> float:
    """Integral of the decaying arrival rate from the note's creation to horizon."""
    r0, tau, h = cfg.arrival_base_rate, cfg.arrival_decay_hours, cfg.horizon_hours
    a0 = min(note_age_offset_hours, h)
    return r0 * tau * (math.exp(-a0 / tau) - math.exp(-h / tau))


def _sample_arrival_times(rng, cfg: SimConfig, offset_hours: float, count: int) -> np.ndarray:
    """Inverse-CDF draws from the truncated exponential arrival profile."""
    tau, h = cfg.arrival_decay_hours, cfg.horizon_hours
    lo = math.exp(-offset_hours / tau)
    hi = math.exp(-h / tau)
    u = rng.uniform(0.0, 1.0, size=count)
    return -tau * np.log(lo - u * (lo - hi))


def _discretize(latent: np.ndarray, cuts) -> np.ndarray:
    lo, hi = cuts
    if math.isinf(lo) and math.isinf(hi):
        # disabled mode: emit the latent value itself (in-memory use only)
        return latent.copy()
    out = np.full(latent.shape, 0.5)
    out[latent < lo] = 0.0
    out[latent >= hi] = 1.0
    return out


def simulate(cfg: SimConfig) -> tuple[Dataset, SimTruth]:
    """Draw a full synthetic corpus; deterministic given cfg.seed."""
    root = np.random.SeedSequence(cfg.seed)
    rater_stream, *tweet_streams = root.spawn(cfg.n_tweets + cfg.background_tweets + 1)
    rng = np.random.default_rng(rater_stream)

    # rater population
    weights = np.array([c.weight for c in cfg.rater_factor_mixture])
    comp = rng.choice(len(weights), size=cfg.n_raters, p=weights / weights.sum())
    means = np.array([c.mean for c in cfg.rater_factor_mixture])[comp]
    sds = np.array([c.sd for c in cfg.rater_factor_mixture])[comp]
    factors = rng.normal(means, sds)
    intercepts = rng.normal(0.0, cfg.rater_intercept_sd, size=cfg.n_raters)
    rater_ids = [f"r{i:05d}" for i in range(cfg.n_raters)]
    raters = {
        rid: RaterProfile(rid, float(f), float(b))
        for rid, f, b in zip(rater_ids, factors, intercepts)
    }

    notes: dict[str, Note] = {}
    ratings: list[Rating] = []
    truth = SimTruth({}, {}, {}, {}, {}, [])
    truth.rater_intercepts = {rid: float(b) for rid, b in zip(rater_ids, intercepts)}
    truth.rater_factors = {rid: float(f) for rid, f in zip(rater_ids, factors)}

    pool_size = min(cfg.rater_pool_size, cfg.n_raters)

    def run_tweet(trng, tweet_id, note_specs):
        """Visitors arrive over the tweet's lifetime and rate every note
        already present at their visit time.  note_specs: (note_id, is_ai,
        group, lag_hours, quality)."""
        note_factor = {
            spec[0]: float(trng.normal(0.0, cfg.note_factor_sd))
            for spec in note_specs
        }
        for note_id, is_ai, group, lag, quality in note_specs:
            created = max(int(round(lag * MS_PER_HOUR)), 1)
            notes[note_id] = Note(
                note_id=note_id, tweet_id=tweet_id, is_ai=is_ai,
                created_at=created, text="", is_media_note=False,
            )
            truth.note_quality[note_id] = quality
            truth.note_group[note_id] = group
            truth.note_created_at[note_id] = created

        pool = trng.choice(cfg.n_raters, size=pool_size, replace=False)
        n_visits = min(int(trng.poisson(expected_arrivals(cfg, 0.0))), len(pool))
        if n_visits == 0:
            return
        visitors = trng.choice(pool, size=n_visits, replace=False)
        visit_times = np.sort(_sample_arrival_times(trng, cfg, 0.0, n_visits))
        for rpos, tm in zip(visitors, visit_times):
            rid = rater_ids[rpos]
            for note_id, _, _, lag, quality in note_specs:
                if tm < lag:
                    continue
                lv = (
                    cfg.global_intercept
                    + intercepts[rpos]
                    + quality
                    + factors[rpos] * note_factor[note_id]
                    + float(trng.normal(0.0, cfg.noise_sd))
                )
                val = float(_discretize(np.array([lv]), cfg.discretization_cuts)[0])
                ratings.append(
                    Rating(rater_id=rid, note_id=note_id, value=val,
                           created_at=int(round(tm * MS_PER_HOUR)))
                )
                truth.rating_latents.append((rid, note_id, float(lv), val))

    for t_idx in range(cfg.n_tweets):
        trng = np.random.default_rng(tweet_streams[t_idx])
        tweet_id = f"t{t_idx:05d}"
        specs = []
        for n_idx in range(cfg.notes_per_tweet):
            is_ai = n_idx % 2 == 1  # human note first on each tweet
            note_id = f"{tweet_id}n{n_idx}"
            if is_ai:
                lag = cfg.ai_lag_hours if cfg.ai_lag_fixed else float(
                    trng.exponential(cfg.ai_lag_hours)
                )
            else:
                lag = 0.0
            q_cfg = cfg.llm_quality if is_ai else cfg.human_quality
            quality = float(trng.normal(q_cfg.mean, q_cfg.sd))
            specs.append((note_id, is_ai, "LLM" if is_ai else "Human", lag, quality))
        run_tweet(trng, tweet_id, specs)

    for b_idx in range(cfg.background_tweets):
        trng = np.random.default_rng(tweet_streams[cfg.n_tweets + b_idx])
        tweet_id = f"b{b_idx:05d}"
        quality = float(trng.normal(cfg.background_quality.mean, cfg.background_quality.sd))
        run_tweet(trng, tweet_id,
                  [(f"{tweet_id}n0", False, "Background", 0.0, quality)])

    dataset = Dataset(notes=notes, ratings=ratings, raters=raters)
    return dataset, truth


@dataclass
class ConfoundReport:
    full_sample: dict
    equal_exposure: dict
    zero_lag_counterfactual: dict
    rank_agreement: dict
    pattern_holds: bool
    crh_biased_against_llm: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "full_sample": self.full_sample,
            "equal_exposure": self.equal_exposure,
            "zero_lag_counterfactual": self.zero_lag_counterfactual,
            "rank_agreement": self.rank_agreement,
            "pattern_holds": self.pattern_holds,
            "crh_biased_against_llm": self.crh_biased_against_llm,
            "details": self.details,
        }


def _group_metrics(scores, truth: SimTruth, scoring_cfg: ScoringConfig,
                   all_notes: dict[str, str]) -> dict:
    """Score and status summaries per group; CRH denominators use all notes."""
    by_group: dict[str, list[float]] = {"LLM": [], "Human": []}
    crh: dict[str, int] = {"LLM": 0, "Human": 0}
    totals: dict[str, int] = {"LLM": 0, "Human": 0}
    for nid, group in all_notes.items():
        if group not in totals:  # background corpus stays out of the comparison
            continue
        totals[group] += 1
        if nid in scores.note_params:
            s = scores.note_params[nid][0]
            by_group[group].append(s)
            if s >= scoring_cfg.crh_threshold:
                crh[group] += 1
    out = {}
    for g in ("LLM", "Human"):
        scored = by_group[g]
        out[g] = {
            "n_total": totals[g],
            "n_scored": len(scored),
            "mean_score": float(np.mean(scored)) if scored else float("nan"),
            "crh_rate": crh[g] / totals[g] if totals[g] else float("nan"),
        }
    out["score_gap"] = out["LLM"]["mean_score"] - out["Human"]["mean_score"]
    out["crh_rate_gap"] = out["LLM"]["crh_rate"] - out["Human"]["crh_rate"]
    return out


def _rank_agreement(scores, truth: SimTruth) -> float:
    """Spearman correlation of estimated scores with true quality."""
    from scipy.stats import spearmanr

    nids = [nid for nid in scores.note_params if nid in truth.note_quality]
    if len(nids) < 3:
        return float("nan")
    est = [scores.note_params[nid][0] for nid in nids]
    true = [truth.note_quality[nid] for nid in nids]
    rho = spearmanr(est, true).statistic
    return float(rho)


def confound_experiment(cfg: SimConfig, scoring: ScoringConfig = ScoringConfig()) -> ConfoundReport:
    """Simulate, score the full sample, re-score under equal exposure, and
    check whether the timing/exposure confound pattern appears."""
    if cfg.llm_quality.mean <= cfg.human_quality.mean:
        raise InvalidConfig("confound experiment requires LLM quality above human")
    if cfg.ai_lag_hours <= 0:
        raise InvalidConfig("confound experiment requires a positive LLM lag")
    dataset, truth = simulate(cfg)
    all_notes = dict(truth.note_group)

    full_scores = fit_bridging(dataset, scoring)
    full = _group_metrics(full_scores, truth, scoring, all_notes)

    blocks = build_complete_blocks(dataset)
    ee_scores = rescore_equal_exposure(blocks, scoring)
    equal = _group_metrics(ee_scores, truth, scoring, all_notes)

    # zero-lag counterfactual on the same seed isolates the timing effect
    cf_cfg = replace(cfg, ai_lag_hours=1e-6, ai_lag_fixed=True)
    cf_dataset, cf_truth = simulate(cf_cfg)
    cf_scores = fit_bridging(cf_dataset, scoring)
    counterfactual = _group_metrics(cf_scores, cf_truth, scoring, dict(cf_truth.note_group))

    true_gap = cfg.llm_quality.mean - cfg.human_quality.mean
    pattern = equal["score_gap"] > full["score_gap"]
    crh_bias = full["crh_rate_gap"] < counterfactual["crh_rate_gap"]
    return ConfoundReport(
        full_sample=full,
        equal_exposure=equal,
        zero_lag_counterfactual=counterfactual,
        rank_agreement={
            "full_sample": _rank_agreement(full_scores, truth),
            "equal_exposure": _rank_agreement(ee_scores, truth),
        },
        pattern_holds=bool(pattern),
        crh_biased_against_llm=bool(crh_bias),
        details={
            "true_quality_gap": true_gap,
            "n_complete_blocks": len(blocks),
            "n_equal_exposure_ratings": sum(len(b.ratings) for b in blocks),
        },
    )
