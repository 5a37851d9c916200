"""Scoring and evaluation toolkit for comparing LLM- and human-written
community fact-checking notes."""

from .data import (
    Bucket,
    BucketConfig,
    Dataset,
    Note,
    NoteStatusRecord,
    Rating,
    RaterProfile,
    Status,
    TopicLabel,
    apply_paper_filters,
    bucket_factor,
    bucket_rater,
    load_dataset,
)
from .exposure import CompleteBlock, build_complete_blocks, rescore_equal_exposure, representativeness_report
from .inference import FitResult, ModelSpec, run_eq2_outcomes, run_table1, subgroup_fits
from .pairwise import PairwiseReport, pairwise_bradley_terry
from .scorer import BridgingScorer, ScoringConfig, ScoringResult, assign_status, fit_bridging, shrinkage_curve
from .simulate import ConfoundReport, SimConfig, confound_experiment, simulate
from .stats import bh_adjust, ks_statistic, mann_whitney_u, welch_t

__version__ = "0.1.0"

__all__ = [
    "Bucket",
    "BucketConfig",
    "BridgingScorer",
    "CompleteBlock",
    "ConfoundReport",
    "Dataset",
    "FitResult",
    "ModelSpec",
    "Note",
    "NoteStatusRecord",
    "PairwiseReport",
    "Rating",
    "RaterProfile",
    "ScoringConfig",
    "ScoringResult",
    "SimConfig",
    "Status",
    "TopicLabel",
    "apply_paper_filters",
    "assign_status",
    "bh_adjust",
    "bucket_factor",
    "bucket_rater",
    "build_complete_blocks",
    "confound_experiment",
    "fit_bridging",
    "ks_statistic",
    "load_dataset",
    "mann_whitney_u",
    "pairwise_bradley_terry",
    "representativeness_report",
    "rescore_equal_exposure",
    "run_eq2_outcomes",
    "run_table1",
    "shrinkage_curve",
    "simulate",
    "subgroup_fits",
    "welch_t",
]
