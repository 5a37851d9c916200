"""Descriptive tables: ideology-bucket helpfulness percentages, robustness
subsets, writer percentile benchmarks, and note text/URL/domain profiles."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit

import numpy as np
import pandas as pd

from .data import BucketConfig, Dataset, Note, bucket_factor
from .inference import run_eq2_outcomes
from .scorer import ScoringResult
from .stats import mann_whitney_u

Z95 = 1.959963984540054


@dataclass(frozen=True)
class WriterStats:
    writer_id: str
    total_notes: int
    crh_count: int
    crnh_count: int

    @property
    def crh_rate(self) -> float:
        return self.crh_count / self.total_notes

    @property
    def hit_rate(self) -> float:
        return (self.crh_count - self.crnh_count) / self.total_notes


def bucket_table(d: Dataset, bucket_cfg: BucketConfig = BucketConfig()) -> pd.DataFrame:
    """Mean % helpful / % unhelpful ratings per note, by group x ideology bucket.

    Per-note percentages come first; the cell mean is unweighted across notes
    with a normal-approximation 95% CI.  A note enters a bucket cell only if
    it has at least one rating from that bucket.
    """
    df = d.ratings_frame(with_context=True)
    df = df[df["factor"].notna() & df["isAi"].notna()].copy()
    df["bucket"] = [bucket_factor(f, bucket_cfg).value for f in df["factor"]]
    df["helpful"] = (df["value"] == 1.0).astype(float) * 100.0
    df["unhelpful"] = (df["value"] == 0.0).astype(float) * 100.0

    per_note = (
        df.groupby(["isAi", "bucket", "noteId"], sort=True)[["helpful", "unhelpful"]]
        .mean()
        .reset_index()
    )
    rows = []
    for (is_ai, bucket), sub in per_note.groupby(["isAi", "bucket"], sort=True):
        group = "LLM" if is_ai else "Human"
        n = len(sub)
        for metric in ("helpful", "unhelpful"):
            mean = sub[metric].mean()
            se = sub[metric].std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
            rows.append((group, bucket, metric, float(mean),
                         float(mean - Z95 * se), float(mean + Z95 * se), n))
    return pd.DataFrame(
        rows, columns=["group", "bucket", "metric", "mean", "ci_low", "ci_high", "n_notes"]
    )


_URL_RE = re.compile(r"https?://[^\s]+")
_TRAILING_PUNCT = ".,;:!?)]}\"'"


def extract_urls(text: str) -> list[str]:
    return [u.rstrip(_TRAILING_PUNCT) for u in _URL_RE.findall(text)]


def url_domain(url: str) -> str | None:
    """Lowercased host, leading www. stripped; x.com/grok kept path-aware."""
    try:
        parts = urlsplit(url)
    except ValueError:
        return None
    host = (parts.hostname or "").lower()
    if not host:
        return None
    if host.startswith("www."):
        host = host[4:]
    if host == "x.com" and parts.path.lstrip("/").lower().startswith("grok"):
        return "x.com/grok"
    return host


def word_count(text: str) -> int:
    """Whitespace tokens after stripping URLs."""
    return len(_URL_RE.sub(" ", text).split())


@dataclass
class TextProfileReport:
    groups: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"groups": self.groups}


def text_profile(notes: list[Note], top_n: int = 10) -> TextProfileReport:
    """Word-count, URL-count, and top-domain statistics per authorship group.

    A note counts once per distinct domain regardless of how many URLs from
    that domain it cites.
    """
    report = TextProfileReport()
    for group, is_ai in (("LLM", True), ("Human", False)):
        subset = [n for n in notes if n.is_ai == is_ai]
        if not subset:
            report.groups[group] = {"n_notes": 0}
            continue
        wc = np.array([word_count(n.text) for n in subset], dtype=float)
        urls_per_note = [extract_urls(n.text) for n in subset]
        uc = np.array([len(u) for u in urls_per_note], dtype=float)
        domain_notes: dict[str, int] = {}
        for urls in urls_per_note:
            domains = {d for d in (url_domain(u) for u in urls) if d}
            for dname in domains:
                domain_notes[dname] = domain_notes.get(dname, 0) + 1
        ranked = sorted(domain_notes.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
        report.groups[group] = {
            "n_notes": len(subset),
            "word_count": {"mean": float(wc.mean()), "sd": float(wc.std(ddof=1)) if len(subset) > 1 else 0.0},
            "url_count": {"mean": float(uc.mean()), "sd": float(uc.std(ddof=1)) if len(subset) > 1 else 0.0},
            "top_domains": [
                {"domain": dname, "pct_notes": 100.0 * cnt / len(subset)}
                for dname, cnt in ranked
            ],
        }
    return report


@dataclass
class PercentileReport:
    subject: dict
    overall: dict
    restricted: dict
    min_notes: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def writer_percentiles(all_writers: list[WriterStats], subject: WriterStats,
                       min_notes: int = 30) -> PercentileReport:
    """Share of comparison writers with a strictly lower metric value."""

    def pct(pool, metric):
        if not pool:
            return float("nan")
        value = getattr(subject, metric)
        below = sum(1 for w in pool if getattr(w, metric) < value)
        return 100.0 * below / len(pool)

    restricted_pool = [w for w in all_writers if w.total_notes >= min_notes]
    return PercentileReport(
        subject={
            "crh_rate": subject.crh_rate,
            "hit_rate": subject.hit_rate,
            "total_notes": subject.total_notes,
        },
        overall={
            "n_writers": len(all_writers),
            "crh_rate_percentile": pct(all_writers, "crh_rate"),
            "hit_rate_percentile": pct(all_writers, "hit_rate"),
        },
        restricted={
            "n_writers": len(restricted_pool),
            "crh_rate_percentile": pct(restricted_pool, "crh_rate"),
            "hit_rate_percentile": pct(restricted_pool, "hit_rate"),
        },
        min_notes=min_notes,
    )


def _group_summary(frame: pd.DataFrame) -> dict:
    out = {}
    for group, is_ai in (("LLM", 1.0), ("Human", 0.0)):
        sub = frame[frame["AI"] == is_ai]
        out[group] = {
            "n_notes": int(len(sub)),
            "crh_rate": float(sub["crh"].mean()) if len(sub) else float("nan"),
            "crnh_rate": float(sub["crnh"].mean()) if len(sub) else float("nan"),
            "mean_score": float(sub["helpfulness_score"].mean()) if len(sub) else float("nan"),
        }
    return out


@dataclass
class SubsetReport:
    name: str
    n_notes: dict[str, int]
    summary: dict
    models: dict
    match_rate: float | None = None
    rating_count_test: dict | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def robustness_subsets(d: Dataset, scores: ScoringResult,
                       min_ratings: int = 30,
                       windows_minutes=(30, 60, 90)) -> list[SubsetReport]:
    """The >=min_ratings subset plus creation-time-matched subsets.

    Timing-matched subsets keep human notes created within the window of any
    LLM note on the same tweet (inclusive bounds), together with those LLM
    notes; each subset reruns the note-level outcome models.
    """
    from .inference import note_outcome_frame

    rating_counts: dict[str, int] = {}
    for r in d.ratings:
        rating_counts[r.note_id] = rating_counts.get(r.note_id, 0) + 1

    reports = []

    # (a) rating-count floor
    keep = {nid for nid, c in rating_counts.items() if c >= min_ratings}
    reports.append(_subset_report(d, scores, keep, f"min_{min_ratings}_ratings", rating_counts))

    # (b) timing-matched windows
    llm_times: dict[str, list[int]] = {}
    for n in d.notes.values():
        if n.is_ai:
            llm_times.setdefault(n.tweet_id, []).append(n.created_at)
    n_llm_total = sum(len(v) for v in llm_times.values())
    for minutes in windows_minutes:
        window_ms = minutes * 60_000
        kept_notes: set[str] = set()
        matched_llm: set[str] = set()
        for n in d.notes.values():
            if n.is_ai:
                continue
            for t in llm_times.get(n.tweet_id, ()):
                if abs(n.created_at - t) <= window_ms:
                    kept_notes.add(n.note_id)
                    break
        for n in d.notes.values():
            if not n.is_ai:
                continue
            humans = [m for m in d.notes.values()
                      if m.tweet_id == n.tweet_id and not m.is_ai]
            if any(abs(m.created_at - n.created_at) <= window_ms for m in humans):
                kept_notes.add(n.note_id)
                matched_llm.add(n.note_id)
        report = _subset_report(d, scores, kept_notes, f"window_{minutes}min", rating_counts)
        report.match_rate = len(matched_llm) / n_llm_total if n_llm_total else float("nan")
        reports.append(report)
    return reports


def _subset_report(d, scores, note_ids, name, rating_counts) -> SubsetReport:
    from .inference import note_outcome_frame

    sub = Dataset(
        notes={nid: n for nid, n in d.notes.items() if nid in note_ids},
        ratings=[r for r in d.ratings if r.note_id in note_ids],
        raters=dict(d.raters),
    )
    frame = note_outcome_frame(scores, sub)
    n_llm = int((frame["AI"] == 1.0).sum())
    n_human = int((frame["AI"] == 0.0).sum())
    models = {}
    if n_llm and n_human and frame["tweetId"].nunique() >= 2:
        models = {k: v.to_dict() for k, v in run_eq2_outcomes(scores, sub).items()}
    test = None
    llm_counts = [rating_counts.get(nid, 0) for nid, n in sub.notes.items() if n.is_ai]
    human_counts = [rating_counts.get(nid, 0) for nid, n in sub.notes.items() if not n.is_ai]
    if llm_counts and human_counts:
        t = mann_whitney_u(llm_counts, human_counts, exact_limit=0)
        test = {"U": t.statistic, "p": t.p_value, "method": t.method}
    return SubsetReport(
        name=name,
        n_notes={"LLM": n_llm, "Human": n_human},
        summary=_group_summary(frame),
        models=models,
        rating_count_test=test,
    )
