"""Shared fixture builders for the test suite."""

import numpy as np
import pytest

from notebridge.data import Dataset, Note, Rating, RaterProfile


def make_note(note_id, tweet_id="t1", is_ai=False, created_at=1_000, text="",
              is_media_note=False):
    return Note(note_id=note_id, tweet_id=tweet_id, is_ai=is_ai,
                created_at=created_at, text=text, is_media_note=is_media_note)


def make_dataset(notes, ratings, rater_factors=None):
    """Build a Dataset from Note records and (rater, note, value) triples.

    rater_factors: optional {rater_id: (factor, intercept)}; raters not listed
    default to a neutral profile.
    """
    rater_ids = {r[0] for r in ratings}
    if rater_factors:
        rater_ids |= set(rater_factors)
    raters = {}
    for rid in sorted(rater_ids):
        f, b = (rater_factors or {}).get(rid, (0.0, 0.0))
        raters[rid] = RaterProfile(rater_id=rid, factor=f, intercept=b)
    return Dataset(
        notes={n.note_id: n for n in notes},
        ratings=[Rating(rater_id=r, note_id=n, value=v, created_at=i + 1)
                 for i, (r, n, v) in enumerate(ratings)],
        raters=raters,
    )


def dense_ratings(n_raters, n_notes, values):
    """(rater, note, value) triples for a dense grid; values indexed [u][n]."""
    out = []
    for u in range(n_raters):
        for n in range(n_notes):
            out.append((f"r{u}", f"n{n}", float(values[u][n])))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
