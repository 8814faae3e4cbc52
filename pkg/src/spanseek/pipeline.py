"""End-to-end orchestration: retrieval runs, evaluation, sweeps, plot data.

A run walks the manifest, resolves the similarity channels for each query
(from track files or embedding matrices), produces ranked spans in the
configured ablation mode, and assembles a prediction document. Queries are
independent work items: failures are recorded per query instead of
aborting the batch, and output order follows the manifest regardless of
worker scheduling, so documents are byte-stable across parallelism levels.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .decompose import BACKEND_RULE, BACKENDS
from .io import (
    Manifest,
    QueryRecord,
    fingerprint,
    read_matrix,
    read_similarity,
)
from .metrics import (
    DEFAULT_KS,
    DEFAULT_NS,
    GroundTruth,
    MetricsReport,
    metrics_report,
)
from .refine import RefineConfig, inject, nms, rerank, union_regions
from .signal import (
    CHANNEL_ORIGINAL,
    CHANNEL_SUB_A,
    CHANNEL_SUB_B,
    SimilaritySequence,
    cosine_similarity_sequence,
    moving_average,
)
from .spangen import Candidate, CandidateSet, SpanGenConfig, generate_spans

MODE_ASG_ONLY = "asg_only"
MODE_ASG_ER = "asg_er"
MODE_ASG_EI = "asg_ei"
MODE_FULL = "full"

MODES = (MODE_ASG_ONLY, MODE_ASG_ER, MODE_ASG_EI, MODE_FULL)

PREDICTIONS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; defaults match the recommended operating point."""

    fps: float = 5.0
    span: SpanGenConfig = field(default_factory=SpanGenConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    mode: str = MODE_FULL
    decompose_backend: str = BACKEND_RULE
    endpoint_base_url: str = ""
    endpoint_model: str = ""
    cache_dir: str = ""
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.decompose_backend not in BACKENDS:
            raise ValueError(f"unknown decompose backend {self.decompose_backend!r}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")

    def to_dict(self) -> dict:
        # execution-only knobs (parallelism, cache_dir) are left out: they
        # cannot change any output byte, and documents must stay identical
        # across parallelism levels
        return {
            "fps": self.fps,
            "span": {
                "prominence_min": self.span.prominence_min,
                "min_distance_s": self.span.min_distance_s,
                "normalize": self.span.normalize,
            },
            "refine": {
                "beta": self.refine.beta,
                "nms_tiou": self.refine.nms_tiou,
                "top_k": self.refine.top_k,
                "beta_applies_to_injected": self.refine.beta_applies_to_injected,
            },
            "mode": self.mode,
            "decompose_backend": self.decompose_backend,
            "endpoint_base_url": self.endpoint_base_url,
            "endpoint_model": self.endpoint_model,
        }

    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())

    def with_parameter(self, parameter: str, value: float) -> "PipelineConfig":
        """Copy with one sweepable knob replaced."""
        if parameter == "prominence":
            return dataclasses.replace(
                self, span=dataclasses.replace(self.span, prominence_min=value)
            )
        if parameter == "mtd":
            return dataclasses.replace(
                self, span=dataclasses.replace(self.span, min_distance_s=value)
            )
        if parameter == "beta":
            return dataclasses.replace(
                self, refine=dataclasses.replace(self.refine, beta=value)
            )
        if parameter == "nms":
            return dataclasses.replace(
                self, refine=dataclasses.replace(self.refine, nms_tiou=value)
            )
        raise ValueError(f"unknown sweep parameter {parameter!r}")


SWEEP_PARAMETERS = ("prominence", "mtd", "beta", "nms")


class ChannelError(RuntimeError):
    """A query is missing a channel the configured mode needs."""


@dataclass(frozen=True, eq=False)
class QuerySignals:
    """Resolved per-query inputs."""

    raw_o: SimilaritySequence
    raw_a: SimilaritySequence | None = None
    raw_b: SimilaritySequence | None = None


def _load_channel_similarity(
    manifest: Manifest, record: QueryRecord, channel: str
) -> SimilaritySequence | None:
    path = record.similarity.get(channel) if record.similarity else None
    if not path:
        return None
    values = read_similarity(manifest.resolve(path))
    return SimilaritySequence(values, manifest.fps, record.video_id, channel)


def _load_channel_embedding(
    manifest: Manifest,
    record: QueryRecord,
    frames: np.ndarray,
    key: str,
    channel: str,
) -> SimilaritySequence | None:
    path = record.embeddings.get(key) if record.embeddings else None
    if not path:
        return None
    query_vec = read_matrix(manifest.resolve(path)).reshape(-1).astype(np.float64)
    return cosine_similarity_sequence(
        frames, query_vec, manifest.fps, record.video_id, channel
    )


def resolve_signals(manifest: Manifest, record: QueryRecord) -> QuerySignals:
    """Load the query's channels from its similarity tracks or embeddings."""
    if record.similarity is not None:
        raw_o = _load_channel_similarity(manifest, record, CHANNEL_ORIGINAL)
        if raw_o is None:
            raise ChannelError(f"{record.query_id}: no original-channel track")
        raw_a = _load_channel_similarity(manifest, record, CHANNEL_SUB_A)
        raw_b = _load_channel_similarity(manifest, record, CHANNEL_SUB_B)
    else:
        frames_path = record.embeddings.get("frames")
        query_path = record.embeddings.get("query")
        if not frames_path or not query_path:
            raise ChannelError(f"{record.query_id}: embeddings need frames and query paths")
        frames = read_matrix(manifest.resolve(frames_path)).astype(np.float64)
        raw_o = _load_channel_embedding(
            manifest, record, frames, "query", CHANNEL_ORIGINAL
        )
        raw_a = _load_channel_embedding(
            manifest, record, frames, "query_sub_a", CHANNEL_SUB_A
        )
        raw_b = _load_channel_embedding(
            manifest, record, frames, "query_sub_b", CHANNEL_SUB_B
        )
    lengths = {len(seq) for seq in (raw_o, raw_a, raw_b) if seq is not None}
    if len(lengths) > 1:
        raise ChannelError(f"{record.query_id}: channel lengths differ: {sorted(lengths)}")
    return QuerySignals(raw_o=raw_o, raw_a=raw_a, raw_b=raw_b)


def process_query(signals: QuerySignals, config: PipelineConfig) -> CandidateSet:
    """Ranked spans for one query in the configured mode."""
    p_o = generate_spans(signals.raw_o, config.span)
    if config.mode == MODE_ASG_ONLY:
        pool = p_o
    else:
        raw_a, raw_b = signals.raw_a, signals.raw_b
        if raw_a is None or raw_b is None:
            raise ChannelError(f"mode {config.mode} needs sub_a and sub_b channels")
        candidates: tuple[Candidate, ...]
        if config.mode == MODE_ASG_ER:
            candidates = rerank(p_o, raw_a, raw_b, config.refine.beta).candidates
        else:
            p_a = generate_spans(raw_a, config.span)
            p_b = generate_spans(raw_b, config.span)
            regions = union_regions(p_a, p_b)
            injected = inject(
                signals.raw_o,
                regions,
                p_o.signal_stats,
                config.span,
                raw_a,
                raw_b,
                config.refine.beta,
                beta_applies=config.refine.beta_applies_to_injected,
            )
            if config.mode == MODE_ASG_EI:
                candidates = p_o.candidates + injected.candidates
            else:
                reranked = rerank(p_o, raw_a, raw_b, config.refine.beta)
                candidates = reranked.candidates + injected.candidates
        pool = CandidateSet(candidates, channel="final", signal_stats=p_o.signal_stats)
    return nms(pool, config.refine.nms_tiou, config.refine.top_k)


def _candidate_dict(cand: Candidate) -> dict:
    return {
        "start_s": cand.start_s,
        "end_s": cand.end_s,
        "final_score": cand.final_score,
        "base_score": cand.base_score,
        "bonus_score": cand.bonus_score,
        "provenance": cand.provenance,
    }


def _run_one(manifest: Manifest, record: QueryRecord, config: PipelineConfig) -> dict:
    entry: dict = {"query_id": record.query_id, "video_id": record.video_id}
    try:
        signals = resolve_signals(manifest, record)
        result = process_query(signals, config)
        entry["predictions"] = [_candidate_dict(c) for c in result.candidates]
    except ChannelError as exc:
        entry["predictions"] = []
        entry["error"] = str(exc)
    return entry


def run(manifest: Manifest, config: PipelineConfig) -> dict:
    """Execute the whole manifest; returns the prediction document."""
    records = manifest.queries
    if config.parallelism == 1:
        entries = [_run_one(manifest, record, config) for record in records]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            entries = list(
                pool.map(lambda record: _run_one(manifest, record, config), records)
            )
    return {
        "schema_version": PREDICTIONS_SCHEMA_VERSION,
        "tool": "spanseek",
        "tool_version": __version__,
        "config_fingerprint": config.fingerprint(),
        "config": config.to_dict(),
        "queries": entries,
    }


def document_predictions(document: dict) -> dict[str, list[tuple[float, float]]]:
    """query_id -> ordered (start_s, end_s) spans from a prediction document."""
    return {
        entry["query_id"]: [(p["start_s"], p["end_s"]) for p in entry["predictions"]]
        for entry in document["queries"]
    }


def evaluate(
    document: dict,
    manifest: Manifest,
    ns=DEFAULT_NS,
    ks=DEFAULT_KS,
) -> tuple[MetricsReport, int]:
    """Score a prediction document against manifest ground truth.

    Queries without ground truth are excluded; the count of exclusions is
    returned alongside the report.
    """
    predictions = document_predictions(document)
    gts = []
    skipped = 0
    for record in manifest.queries:
        if record.ground_truth is None:
            skipped += 1
            predictions.pop(record.query_id, None)
            continue
        gts.append(GroundTruth(record.query_id, *record.ground_truth))
        predictions.setdefault(record.query_id, [])
    if not gts:
        raise ValueError("manifest has no ground truth to evaluate against")
    report = metrics_report(predictions, gts, ns=ns, ks=ks)
    return report, skipped


def sweep(
    manifest: Manifest,
    config: PipelineConfig,
    parameter: str,
    values,
) -> list[tuple[float, MetricsReport]]:
    """One full run + evaluation per value, defaults everywhere else."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    rows = []
    for value in values:
        variant = config.with_parameter(parameter, float(value))
        document = run(manifest, variant)
        report, _ = evaluate(document, manifest)
        rows.append((float(value), report))
    return rows


def emit_plot_data(
    manifest: Manifest,
    query_id: str,
    config: PipelineConfig,
    out_path: str | Path,
) -> Path:
    """Write aligned columns for external plotting of one query.

    Columns: time, raw original / sub_a / sub_b, smoothed original, ground
    truth mask, then one expansion-threshold column and one in-span mask
    column per generated candidate (6 + 2 * num candidates in total).
    Missing channels are written as zeros so the layout is stable.
    """
    record = next((r for r in manifest.queries if r.query_id == query_id), None)
    if record is None:
        raise ValueError(f"query {query_id!r} not in manifest")
    signals = resolve_signals(manifest, record)
    raw_o = signals.raw_o
    n = len(raw_o)
    result = generate_spans(raw_o, config.span)
    stats = result.signal_stats
    smoothed = moving_average(raw_o, stats.window)

    times = np.arange(n) / manifest.fps
    zeros = np.zeros(n)
    gt_mask = zeros.copy()
    if record.ground_truth is not None:
        lo = int(np.floor(record.ground_truth[0] * manifest.fps))
        hi = int(np.ceil(record.ground_truth[1] * manifest.fps)) - 1
        gt_mask[max(0, lo) : min(n - 1, hi) + 1] = 1.0

    columns = [
        ("time", times),
        ("s_o", raw_o.values),
        ("s_a", signals.raw_a.values if signals.raw_a is not None else zeros),
        ("s_b", signals.raw_b.values if signals.raw_b is not None else zeros),
        ("s_smooth", smoothed.values),
        ("gt", gt_mask),
    ]
    for i, cand in enumerate(result.candidates, start=1):
        threshold = smoothed.values[cand.peak_idx] * stats.tau_r
        mask = np.zeros(n)
        mask[cand.start_idx : cand.end_idx + 1] = 1.0
        columns.append((f"thr_{i}", np.full(n, threshold)))
        columns.append((f"span_{i}", mask))

    out_path = Path(out_path)
    header = " ".join(name for name, _ in columns)
    data = np.column_stack([values for _, values in columns])
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write(f"# {header}\n")
        np.savetxt(handle, data, fmt="%.17g")  # exact float64 round-trip
    return out_path
