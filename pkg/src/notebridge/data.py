"""Domain records, TSV ingestion, and dataset-level filters.

File schemas follow the public Community Notes data release column names
(noteId, raterParticipantId, helpfulnessLevel, coreRaterFactor1, ...) so
real exports load unchanged.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import pandas as pd

from .errors import DuplicateKey, MalformedRow, MissingColumn

NOTE_COLUMNS = ["noteId", "tweetId", "isAi", "createdAtMillis", "isMediaNote", "summary"]
RATING_COLUMNS = ["raterParticipantId", "noteId", "helpfulnessLevel", "createdAtMillis"]
RATER_COLUMNS = ["raterParticipantId", "coreRaterFactor1", "coreRaterIntercept"]
TOPIC_COLUMNS = ["tweetId", "topic", "modality"]

HELPFULNESS_VALUES = {
    "HELPFUL": 1.0,
    "SOMEWHAT_HELPFUL": 0.5,
    "NOT_HELPFUL": 0.0,
    "1.0": 1.0,
    "0.5": 0.5,
    "0.0": 0.0,
    "1": 1.0,
    "0": 0.0,
}

TOPIC_CATEGORIES = (
    "Politics & Elections",
    "Geopolitics & International Conflicts",
    "Health & Medicine",
    "Social/Cultural Issues",
    "Economy & Finance",
    "Science & Technology",
    "Conspiracy & Pseudoscience",
    "Celebrity / Entertainment / Viral",
    "Sports",
    "AI generated content",
    "Other / Miscellaneous",
)

MODALITIES = ("TextOnly", "Image", "Video")


@dataclass(frozen=True)
class Note:
    note_id: str
    tweet_id: str
    is_ai: bool
    created_at: int
    text: str = ""
    is_media_note: bool = False


@dataclass(frozen=True)
class Rating:
    rater_id: str
    note_id: str
    value: float
    created_at: int


@dataclass(frozen=True)
class RaterProfile:
    rater_id: str
    factor: float
    intercept: float


class Bucket(str, enum.Enum):
    LEFT = "left"
    NEUTRAL = "neutral"
    RIGHT = "right"


@dataclass(frozen=True)
class BucketConfig:
    left_cut: float = -0.15
    right_cut: float = 0.15


class Status(str, enum.Enum):
    CRH = "CRH"
    CRNH = "CRNH"
    NMR = "NMR"


@dataclass(frozen=True)
class NoteStatusRecord:
    note_id: str
    status: Status
    first_crh_at: int | None = None


@dataclass(frozen=True)
class TopicLabel:
    tweet_id: str
    topic: str
    modality: str

    def __post_init__(self):
        if self.topic not in TOPIC_CATEGORIES:
            raise ValueError(f"unknown topic category: {self.topic!r}")
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality: {self.modality!r}")


def bucket_factor(factor: float, cfg: BucketConfig = BucketConfig()) -> Bucket:
    """Map a rater factor onto the left/neutral/right bands (boundaries neutral)."""
    if not math.isfinite(factor):
        raise ValueError("factor must be finite")
    if factor < cfg.left_cut:
        return Bucket.LEFT
    if factor > cfg.right_cut:
        return Bucket.RIGHT
    return Bucket.NEUTRAL


def bucket_rater(profile: RaterProfile, cfg: BucketConfig = BucketConfig()) -> Bucket:
    return bucket_factor(profile.factor, cfg)


@dataclass
class Dataset:
    """Immutable-by-convention container for the three input collections."""

    notes: dict[str, Note]
    ratings: list[Rating]
    raters: dict[str, RaterProfile]
    source_paths: dict[str, str] = field(default_factory=dict)

    def notes_frame(self) -> pd.DataFrame:
        rows = [
            (n.note_id, n.tweet_id, n.is_ai, n.created_at, n.is_media_note, n.text)
            for n in self.notes.values()
        ]
        return pd.DataFrame(rows, columns=["noteId", "tweetId", "isAi", "createdAtMillis", "isMediaNote", "summary"])

    def ratings_frame(self, with_context: bool = True) -> pd.DataFrame:
        """Rating rows, optionally merged with note and rater attributes."""
        rows = [(r.rater_id, r.note_id, r.value, r.created_at) for r in self.ratings]
        df = pd.DataFrame(rows, columns=["raterId", "noteId", "value", "createdAtMillis"])
        if not with_context:
            return df
        notes = self.notes_frame()[["noteId", "tweetId", "isAi"]]
        df = df.merge(notes, on="noteId", how="left")
        raters = pd.DataFrame(
            [(p.rater_id, p.factor, p.intercept) for p in self.raters.values()],
            columns=["raterId", "factor", "intercept"],
        )
        return df.merge(raters, on="raterId", how="left")

    def counts(self) -> dict[str, int]:
        return {
            "notes": len(self.notes),
            "ratings": len(self.ratings),
            "raters": len(self.raters),
            "tweets": len({n.tweet_id for n in self.notes.values()}),
        }


def _read_tsv(path, required_columns):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("empty file", path=path) from None
        missing = [c for c in required_columns if c not in header]
        if missing:
            raise MissingColumn(f"missing columns {missing}", path=path, line=1)
        idx = {c: header.index(c) for c in required_columns}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < len(header):
                raise MalformedRow(f"expected {len(header)} fields, got {len(row)}", path=path, line=lineno)
            yield lineno, {c: row[idx[c]] for c in required_columns}


def _parse_bool(raw, path, lineno, column):
    low = raw.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no", ""):
        return False
    raise MalformedRow(f"bad boolean {raw!r} in {column}", path=path, line=lineno)


def _parse_int(raw, path, lineno, column):
    try:
        return int(float(raw))
    except ValueError:
        raise MalformedRow(f"bad integer {raw!r} in {column}", path=path, line=lineno) from None


def _parse_float(raw, path, lineno, column):
    try:
        return float(raw)
    except ValueError:
        raise MalformedRow(f"bad number {raw!r} in {column}", path=path, line=lineno) from None


def load_notes(path) -> dict[str, Note]:
    notes: dict[str, Note] = {}
    for lineno, row in _read_tsv(path, NOTE_COLUMNS):
        note = Note(
            note_id=row["noteId"],
            tweet_id=row["tweetId"],
            is_ai=_parse_bool(row["isAi"], path, lineno, "isAi"),
            created_at=_parse_int(row["createdAtMillis"], path, lineno, "createdAtMillis"),
            text=row["summary"],
            is_media_note=_parse_bool(row["isMediaNote"], path, lineno, "isMediaNote"),
        )
        if note.note_id in notes:
            raise DuplicateKey(f"duplicate noteId {note.note_id}", path=path, line=lineno)
        notes[note.note_id] = note
    return notes


def load_ratings(path) -> list[Rating]:
    ratings: list[Rating] = []
    seen: set[tuple[str, str]] = set()
    for lineno, row in _read_tsv(path, RATING_COLUMNS):
        raw = row["helpfulnessLevel"].strip()
        if raw.upper() in HELPFULNESS_VALUES:
            value = HELPFULNESS_VALUES[raw.upper()]
        else:
            raise MalformedRow(f"bad helpfulnessLevel {raw!r}", path=path, line=lineno)
        key = (row["raterParticipantId"], row["noteId"])
        if key in seen:
            raise DuplicateKey(f"duplicate rating for {key}", path=path, line=lineno)
        seen.add(key)
        ratings.append(
            Rating(
                rater_id=row["raterParticipantId"],
                note_id=row["noteId"],
                value=value,
                created_at=_parse_int(row["createdAtMillis"], path, lineno, "createdAtMillis"),
            )
        )
    return ratings


def load_raters(path) -> dict[str, RaterProfile]:
    raters: dict[str, RaterProfile] = {}
    for lineno, row in _read_tsv(path, RATER_COLUMNS):
        rid = row["raterParticipantId"]
        if rid in raters:
            raise DuplicateKey(f"duplicate raterParticipantId {rid}", path=path, line=lineno)
        raters[rid] = RaterProfile(
            rater_id=rid,
            factor=_parse_float(row["coreRaterFactor1"], path, lineno, "coreRaterFactor1"),
            intercept=_parse_float(row["coreRaterIntercept"], path, lineno, "coreRaterIntercept"),
        )
    return raters


def load_topic_labels(path) -> list[TopicLabel]:
    labels = []
    for lineno, row in _read_tsv(path, TOPIC_COLUMNS):
        try:
            labels.append(TopicLabel(row["tweetId"], row["topic"], row["modality"]))
        except ValueError as exc:
            raise MalformedRow(str(exc), path=path, line=lineno) from None
    return labels


def load_dataset(notes_path, ratings_path, raters_path) -> Dataset:
    """Load the three TSV inputs into one cross-linked Dataset."""
    return Dataset(
        notes=load_notes(notes_path),
        ratings=load_ratings(ratings_path),
        raters=load_raters(raters_path),
        source_paths={
            "notes": str(notes_path),
            "ratings": str(ratings_path),
            "raters": str(raters_path),
        },
    )


def apply_paper_filters(d: Dataset) -> Dataset:
    """Drop media notes and ratings from raters without a finite factor.

    Notes left with zero ratings are kept: they still count in note totals.
    Idempotent.
    """
    notes = {nid: n for nid, n in d.notes.items() if not n.is_media_note}
    valid_raters = {rid for rid, p in d.raters.items() if math.isfinite(p.factor)}
    ratings = [
        r for r in d.ratings
        if r.rater_id in valid_raters and r.note_id in notes
    ]
    return Dataset(notes=notes, ratings=ratings, raters=dict(d.raters), source_paths=dict(d.source_paths))


def _fmt_bool(v: bool) -> str:
    return "1" if v else "0"


def write_dataset(d: Dataset, out_dir) -> dict[str, str]:
    """Write the dataset back out in the ingestion TSV schemas.

    Rows are sorted by key so identical datasets serialize byte-identically.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "notes": os.path.join(out_dir, "notes.tsv"),
        "ratings": os.path.join(out_dir, "ratings.tsv"),
        "raters": os.path.join(out_dir, "raters.tsv"),
    }
    with open(paths["notes"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(NOTE_COLUMNS)
        for n in sorted(d.notes.values(), key=lambda n: n.note_id):
            w.writerow([n.note_id, n.tweet_id, _fmt_bool(n.is_ai), n.created_at,
                        _fmt_bool(n.is_media_note), n.text])
    with open(paths["ratings"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(RATING_COLUMNS)
        for r in sorted(d.ratings, key=lambda r: (r.note_id, r.rater_id)):
            level = {1.0: "HELPFUL", 0.5: "SOMEWHAT_HELPFUL", 0.0: "NOT_HELPFUL"}[r.value]
            w.writerow([r.rater_id, r.note_id, level, r.created_at])
    with open(paths["raters"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(RATER_COLUMNS)
        for p in sorted(d.raters.values(), key=lambda p: p.rater_id):
            w.writerow([p.rater_id, repr(p.factor), repr(p.intercept)])
    return paths


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_manifest(d: Dataset, filtered: Dataset | None = None) -> dict:
    """Audit record: file paths, checksums where available, and row counts."""
    manifest = {
        "source_paths": dict(d.source_paths),
        "counts": d.counts(),
    }
    checksums = {}
    for name, path in d.source_paths.items():
        if path and os.path.exists(path):
            checksums[name] = file_sha256(path)
    if checksums:
        manifest["checksums"] = checksums
    if filtered is not None:
        manifest["filtered_counts"] = filtered.counts()
    return manifest


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
