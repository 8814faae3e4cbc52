"""Span generation: smoothed similarity peaks expanded into scored spans.

The generator adapts to the signal itself: the raw signal's standard
deviation sets the adaptive ratio, the ratio sets both the smoothing window
and, scaled by each peak's height, the expansion threshold. Peaks grow into
maximal runs where the smoothed signal stays above that threshold, and each
run becomes a scored candidate span.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .signal import (
    CHANNEL_ORIGINAL,
    Peak,
    SignalStats,
    SimilaritySequence,
    adaptive_ratio,
    find_peaks,
    min_distance_samples,
    moving_average,
    population_std,
    smoothing_window,
)

PROVENANCE_ORIGINAL = "original"
PROVENANCE_INJECTED = "injected"

SET_CHANNELS = ("original", "sub_a", "sub_b", "injected", "final")


@dataclass(frozen=True)
class Candidate:
    """A temporal span seeded by one peak, with its scores.

    ``base_score`` is the mean of the smoothed signal over the span,
    ``bonus_score`` the evidence bonus added by refinement (0 until then),
    and ``final_score`` the ranking score. Frame indices are inclusive;
    second boundaries follow the frame convention, so a single-frame span
    has duration 1/fps.
    """

    start_idx: int
    end_idx: int
    peak_idx: int
    fps: float
    base_score: float
    bonus_score: float = 0.0
    final_score: float = 0.0
    provenance: str = PROVENANCE_ORIGINAL

    def __post_init__(self) -> None:
        if not self.start_idx <= self.peak_idx <= self.end_idx:
            raise ValueError(
                f"peak {self.peak_idx} outside span [{self.start_idx}, {self.end_idx}]"
            )
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.provenance not in (PROVENANCE_ORIGINAL, PROVENANCE_INJECTED):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def start_s(self) -> float:
        return self.start_idx / self.fps

    @property
    def end_s(self) -> float:
        return (self.end_idx + 1) / self.fps

    @property
    def span_s(self) -> tuple[float, float]:
        return (self.start_s, self.end_s)


def candidate_order_key(cand: Candidate) -> tuple[float, int, int]:
    """Ranking order: final score descending, then start, then end."""
    return (-cand.final_score, cand.start_idx, cand.end_idx)


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """An ordered list of candidates plus its generating channel and stats."""

    candidates: tuple[Candidate, ...]
    channel: str = CHANNEL_ORIGINAL
    signal_stats: SignalStats | None = None

    def __post_init__(self) -> None:
        if self.channel not in SET_CHANNELS:
            raise ValueError(f"unknown candidate-set channel {self.channel!r}")
        ordered = tuple(sorted(self.candidates, key=candidate_order_key))
        object.__setattr__(self, "candidates", ordered)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


@dataclass(frozen=True)
class SpanGenConfig:
    """Peak-selection knobs for span generation.

    ``normalize`` rescales the (restricted) signal to [0, 1] before any
    statistics; off by default because the default prominence threshold is
    calibrated against raw similarity scale.
    """

    prominence_min: float = 0.05
    min_distance_s: float = 1.0
    normalize: bool = False

    def __post_init__(self) -> None:
        if not self.prominence_min >= 0:
            raise ValueError(f"prominence_min must be >= 0, got {self.prominence_min}")
        if not self.min_distance_s > 0:
            raise ValueError(f"min_distance_s must be > 0, got {self.min_distance_s}")


def _first_not_above_right(values: np.ndarray, start: int, limit: int, threshold: float) -> int:
    """Last index of the run values > threshold extending right from start."""
    pos = start + 1
    chunk = 32
    while pos <= limit:
        stop = min(pos + chunk, limit + 1)
        below = values[pos:stop] <= threshold
        if below.any():
            return pos + int(np.argmax(below)) - 1
        pos = stop
        chunk *= 2
    return limit


def _first_not_above_left(values: np.ndarray, start: int, limit: int, threshold: float) -> int:
    """First index of the run values > threshold extending left from start."""
    pos = start - 1
    chunk = 32
    while pos >= limit:
        begin = max(pos - chunk + 1, limit)
        below = values[begin : pos + 1][::-1] <= threshold
        if below.any():
            return pos - int(np.argmax(below)) + 1
        pos = begin - 1
        chunk *= 2
    return limit


_PROBE = 8


def _expand_all(
    values: np.ndarray,
    peak_idx: np.ndarray,
    thresholds: np.ndarray,
    lo: int,
    hi: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Expansion spans for many peaks at once.

    One vectorized pass resolves every peak whose run ends within _PROBE
    samples (the common case on noisy signals); the rest fall back to the
    chunked scan. Semantics match expand_peak exactly.
    """
    count = peak_idx.size
    starts = np.empty(count, dtype=np.int64)
    ends = np.empty(count, dtype=np.int64)
    if count == 0:
        return starts, ends
    offsets = np.arange(1, _PROBE + 1)
    rows = np.arange(count)

    pos = peak_idx[:, None] + offsets[None, :]
    stop = (values[np.minimum(pos, hi)] <= thresholds[:, None]) | (pos > hi)
    first = stop.argmax(axis=1)
    ends[:] = peak_idx + first
    for i in np.flatnonzero(~stop[rows, first]).tolist():
        ends[i] = _first_not_above_right(values, int(peak_idx[i]), hi, float(thresholds[i]))

    pos = peak_idx[:, None] - offsets[None, :]
    stop = (values[np.maximum(pos, lo)] <= thresholds[:, None]) | (pos < lo)
    first = stop.argmax(axis=1)
    starts[:] = peak_idx - first
    for i in np.flatnonzero(~stop[rows, first]).tolist():
        starts[i] = _first_not_above_left(values, int(peak_idx[i]), lo, float(thresholds[i]))
    return starts, ends


def expand_peak(
    smoothed: SimilaritySequence,
    peak: Peak,
    tau_r: float,
    bounds: tuple[int, int] | None = None,
) -> tuple[int, int]:
    """Grow a peak into the maximal span where the signal exceeds its threshold.

    The expansion threshold is ``peak.height * tau_r``. The returned span is
    the largest contiguous inclusive index range within ``bounds`` that
    contains the peak and satisfies smoothed > threshold at every index.
    Non-positive peaks cannot expand (the threshold would not sit below the
    peak) and are rejected.
    """
    if not peak.height > 0:
        raise ValueError(f"cannot expand non-positive peak (height {peak.height})")
    values = smoothed.values
    lo, hi = (0, values.size - 1) if bounds is None else (int(bounds[0]), int(bounds[1]))
    if not 0 <= lo <= peak.index <= hi <= values.size - 1:
        raise ValueError(f"bounds [{lo}, {hi}] do not contain peak index {peak.index}")
    threshold = peak.height * tau_r
    start = _first_not_above_left(values, peak.index, lo, threshold)
    end = _first_not_above_right(values, peak.index, hi, threshold)
    return start, end


def compute_stats(seq: SimilaritySequence) -> SignalStats:
    """Signal statistics of the raw sequence: sigma, adaptive ratio, window."""
    sigma = population_std(seq)
    tau_r = adaptive_ratio(sigma)
    return SignalStats(sigma, tau_r, smoothing_window(seq.fps, tau_r))


def generate_spans(
    raw: SimilaritySequence,
    config: SpanGenConfig | None = None,
    stats_override: SignalStats | None = None,
    bounds: tuple[int, int] | None = None,
) -> CandidateSet:
    """Turn a raw similarity sequence into ranked candidate spans.

    Pipeline: restrict to ``bounds`` (inclusive indices) -> compute stats
    from the restriction, unless ``stats_override`` pins sigma/ratio/window
    from elsewhere -> moving average -> peak detection -> drop non-positive
    peaks -> expand each survivor, clipped to the restriction -> score each
    span with the mean of the smoothed signal over it. Spans that come out
    identical keep only the taller seed. Candidates are returned ranked.
    """
    if config is None:
        config = SpanGenConfig()
    n = len(raw)
    if bounds is None:
        lo, hi = 0, n - 1
    else:
        lo, hi = int(bounds[0]), int(bounds[1])
        if not 0 <= lo <= hi <= n - 1:
            raise ValueError(f"bounds [{lo}, {hi}] fall outside the sequence of length {n}")

    sub_values = raw.values[lo : hi + 1]
    if config.normalize:
        low, high = float(sub_values.min()), float(sub_values.max())
        if high > low:
            sub_values = (sub_values - low) / (high - low)
        else:
            sub_values = np.zeros_like(sub_values)
    sub = SimilaritySequence(sub_values, raw.fps, raw.video_id, raw.channel)

    stats = stats_override if stats_override is not None else compute_stats(sub)
    smoothed = moving_average(sub, stats.window)
    spacing = min_distance_samples(config.min_distance_s, raw.fps)
    peaks = [p for p in find_peaks(smoothed, spacing, config.prominence_min) if p.height > 0]

    peak_idx = np.fromiter((p.index for p in peaks), np.int64, len(peaks))
    heights = np.fromiter((p.height for p in peaks), np.float64, len(peaks))
    starts, ends = _expand_all(
        smoothed.values, peak_idx, heights * stats.tau_r, 0, len(sub) - 1
    )

    best_seed: dict[tuple[int, int], Peak] = {}
    for peak, start, end in zip(peaks, starts.tolist(), ends.tolist()):
        span = (start, end)
        seed = best_seed.get(span)
        if seed is None or (peak.height, -peak.index) > (seed.height, -seed.index):
            best_seed[span] = peak

    csum = np.concatenate(([0.0], np.cumsum(smoothed.values)))
    candidates = []
    for (start, end), seed in best_seed.items():
        base = float((csum[end + 1] - csum[start]) / (end - start + 1))
        candidates.append(
            Candidate(
                start_idx=lo + start,
                end_idx=lo + end,
                peak_idx=lo + seed.index,
                fps=raw.fps,
                base_score=base,
                bonus_score=0.0,
                final_score=base,
                provenance=PROVENANCE_ORIGINAL,
            )
        )
    return CandidateSet(tuple(candidates), channel=raw.channel, signal_stats=stats)


def rescore(cand: Candidate, bonus: float, weight: float) -> Candidate:
    """Candidate with its bonus applied: final = base + weight * bonus."""
    return replace(
        cand,
        bonus_score=bonus,
        final_score=cand.base_score + weight * bonus,
    )
