"""Within-rater pairwise comparison of LLM vs human notes on shared tweets.

Non-tied outcomes feed an intercept-only Bradley-Terry logistic model whose
MLE is logit(win share); SEs are cluster-robust by rater.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.stats import norm

from .data import Dataset
from .errors import AllTies, NoPairs


class PairResult(str, enum.Enum):
    WIN = "win"
    LOSS = "loss"
    TIE = "tie"


@dataclass(frozen=True)
class PairOutcome:
    rater_id: str
    tweet_id: str
    llm_note_id: str
    human_note_id: str
    result: PairResult


@dataclass
class PairwiseReport:
    n_pairs: int
    n_observations: int
    n_raters: int
    tie_rate: float
    win_share: float
    beta: float
    se: float
    z: float
    p: float
    odds_ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def build_pair_outcomes(d: Dataset) -> list[PairOutcome]:
    """All (rater, LLM note, human note) triples where the rater rated both
    notes of an LLM-human cross pair on the same tweet."""
    by_tweet: dict[str, tuple[list[str], list[str]]] = {}
    for n in d.notes.values():
        llm, human = by_tweet.setdefault(n.tweet_id, ([], []))
        (llm if n.is_ai else human).append(n.note_id)

    value_of: dict[tuple[str, str], float] = {
        (r.rater_id, r.note_id): r.value for r in d.ratings
    }
    raters_of: dict[str, set[str]] = {}
    for r in d.ratings:
        raters_of.setdefault(r.note_id, set()).add(r.rater_id)

    outcomes = []
    for tid in sorted(by_tweet):
        llm_notes, human_notes = by_tweet[tid]
        for ln in sorted(llm_notes):
            for hn in sorted(human_notes):
                shared = raters_of.get(ln, set()) & raters_of.get(hn, set())
                for rid in sorted(shared):
                    lv = value_of[(rid, ln)]
                    hv = value_of[(rid, hn)]
                    if lv > hv:
                        res = PairResult.WIN
                    elif lv < hv:
                        res = PairResult.LOSS
                    else:
                        res = PairResult.TIE
                    outcomes.append(PairOutcome(rid, tid, ln, hn, res))
    return outcomes


def bradley_terry_from_outcomes(outcomes: list[PairOutcome]) -> PairwiseReport:
    if not outcomes:
        raise NoPairs("no rater rated both notes of any LLM-human pair")
    n_obs = len(outcomes)
    n_pairs = len({(o.llm_note_id, o.human_note_id) for o in outcomes})
    n_raters = len({o.rater_id for o in outcomes})
    ties = sum(1 for o in outcomes if o.result is PairResult.TIE)
    tie_rate = ties / n_obs
    decided = [o for o in outcomes if o.result is not PairResult.TIE]
    if not decided:
        raise AllTies(f"all {n_obs} comparisons tied")

    wins = sum(1 for o in decided if o.result is PairResult.WIN)
    n = len(decided)
    share = wins / n
    if wins == 0 or wins == n:
        beta = math.copysign(float("inf"), share - 0.5)
        se = float("nan")
        z = beta
        p = 0.0
    else:
        beta = math.log(share / (1.0 - share))
        # rater-clustered sandwich around the intercept-only logistic MLE
        info = n * share * (1.0 - share)
        cluster_scores: dict[str, float] = {}
        for o in decided:
            yv = 1.0 if o.result is PairResult.WIN else 0.0
            cluster_scores[o.rater_id] = cluster_scores.get(o.rater_id, 0.0) + (yv - share)
        meat = sum(s * s for s in cluster_scores.values())
        se = math.sqrt(meat) / info
        z = beta / se
        p = 2.0 * float(norm.sf(abs(z)))
    return PairwiseReport(
        n_pairs=n_pairs,
        n_observations=n_obs,
        n_raters=n_raters,
        tie_rate=tie_rate,
        win_share=share,
        beta=beta,
        se=se,
        z=z,
        p=p,
        odds_ratio=math.exp(beta) if math.isfinite(beta) else float("inf"),
    )


def pairwise_bradley_terry(d: Dataset) -> PairwiseReport:
    return bradley_terry_from_outcomes(build_pair_outcomes(d))
