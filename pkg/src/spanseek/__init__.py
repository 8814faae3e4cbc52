"""Training-free temporal moment retrieval over per-frame similarity signals.

Given one similarity value per video frame for a query (and optionally for
its two ordered sub-queries), spanseek generates candidate spans by
adaptive smoothing and peak expansion, refines them with sub-query
evidence, and emits a ranked span list plus standard recall metrics.
"""

__version__ = "0.1.0"

from .metrics import GroundTruth, MetricsReport, metrics_report, recall_at
from .pipeline import MODES, PipelineConfig, evaluate, process_query, run, sweep
from .refine import RefineConfig, RegionSet, evidence_bonus, inject, nms, rerank, tiou, union_regions
from .signal import (
    Peak,
    SignalStats,
    SimilaritySequence,
    adaptive_ratio,
    cosine_similarity_sequence,
    find_peaks,
    moving_average,
    population_std,
    prominence,
    smoothing_window,
)
from .spangen import Candidate, CandidateSet, SpanGenConfig, expand_peak, generate_spans
from .synthbench import SuiteRanges, SynthCase, SynthSpec, generate_case, generate_suite

__all__ = [
    "Candidate",
    "CandidateSet",
    "GroundTruth",
    "MetricsReport",
    "MODES",
    "Peak",
    "PipelineConfig",
    "RefineConfig",
    "RegionSet",
    "SignalStats",
    "SimilaritySequence",
    "SpanGenConfig",
    "SuiteRanges",
    "SynthCase",
    "SynthSpec",
    "adaptive_ratio",
    "cosine_similarity_sequence",
    "evaluate",
    "evidence_bonus",
    "expand_peak",
    "find_peaks",
    "generate_case",
    "generate_spans",
    "generate_suite",
    "inject",
    "metrics_report",
    "moving_average",
    "nms",
    "population_std",
    "process_query",
    "prominence",
    "recall_at",
    "rerank",
    "run",
    "smoothing_window",
    "sweep",
    "tiou",
    "union_regions",
]
