"""Equal-exposure rating subset: complete raters per tweet, re-scoring,
and rater representativeness diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Rating
from .errors import NoRatings
from .scorer import ScoringConfig, ScoringResult, fit_bridging
from .stats import ks_statistic


@dataclass(frozen=True)
class CompleteBlock:
    tweet_id: str
    note_ids: frozenset[str]
    rater_ids: frozenset[str]
    ratings: tuple[Rating, ...]


def build_complete_blocks(d: Dataset) -> list[CompleteBlock]:
    """Per tweet, keep only ratings from raters who rated every note on it."""
    notes_by_tweet: dict[str, set[str]] = {}
    for n in d.notes.values():
        notes_by_tweet.setdefault(n.tweet_id, set()).add(n.note_id)

    tweet_of_note = {n.note_id: n.tweet_id for n in d.notes.values()}
    ratings_by_tweet: dict[str, list[Rating]] = {}
    for r in d.ratings:
        tid = tweet_of_note.get(r.note_id)
        if tid is not None:
            ratings_by_tweet.setdefault(tid, []).append(r)

    blocks = []
    for tid in sorted(ratings_by_tweet):
        note_ids = notes_by_tweet[tid]
        coverage: dict[str, set[str]] = {}
        for r in ratings_by_tweet[tid]:
            coverage.setdefault(r.rater_id, set()).add(r.note_id)
        complete = {rid for rid, seen in coverage.items() if seen >= note_ids}
        if not complete:
            continue
        kept = tuple(r for r in ratings_by_tweet[tid] if r.rater_id in complete)
        blocks.append(
            CompleteBlock(
                tweet_id=tid,
                note_ids=frozenset(note_ids),
                rater_ids=frozenset(complete),
                ratings=kept,
            )
        )
    return blocks


def rescore_equal_exposure(blocks: list[CompleteBlock], cfg: ScoringConfig = ScoringConfig()) -> ScoringResult:
    """One pooled MF fit over all retained ratings (raters bridge across tweets)."""
    ratings = [r for b in blocks for r in b.ratings]
    if not ratings:
        raise NoRatings("no equal-exposure ratings")
    return fit_bridging(ratings, cfg)


def _summary(values: np.ndarray) -> dict:
    deciles = np.percentile(values, np.arange(10, 100, 10)) if values.size else np.array([])
    return {
        "n": int(values.size),
        "mean": float(values.mean()) if values.size else float("nan"),
        "sd": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "deciles": [float(x) for x in deciles],
    }


def _histogram(values: np.ndarray, bins: int = 30) -> dict:
    counts, edges = np.histogram(values, bins=bins)
    return {"counts": counts.tolist(), "edges": [float(e) for e in edges]}


@dataclass
class DistributionComparison:
    """Full-population vs complete-rater distributions of factor and intercept."""

    variables: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"variables": self.variables}


def representativeness_report(d: Dataset, blocks: list[CompleteBlock]) -> DistributionComparison:
    complete_ids = set().union(*(b.rater_ids for b in blocks)) if blocks else set()
    all_profiles = [p for p in d.raters.values()]
    complete_profiles = [p for p in all_profiles if p.rater_id in complete_ids]

    report = DistributionComparison()
    for name, getter in (("factor", lambda p: p.factor), ("intercept", lambda p: p.intercept)):
        full = np.array([getter(p) for p in all_profiles], dtype=float)
        sub = np.array([getter(p) for p in complete_profiles], dtype=float)
        entry = {
            "population": _summary(full),
            "complete_raters": _summary(sub),
        }
        if full.size and sub.size:
            entry["ks_statistic"] = ks_statistic(full, sub)
            entry["population_hist"] = _histogram(full)
            entry["complete_hist"] = _histogram(sub)
        report.variables[name] = entry
    return report
