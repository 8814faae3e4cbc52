"""Evidence-driven refinement of candidate spans.

The two sub-query similarity channels act as evidence: reranking adds a
weighted bonus from the strongest channel responses inside each span, and
injection re-searches the regions where both channels independently agree,
recovering spans the original channel missed. A final greedy NMS produces
the ranked output list.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace

import numpy as np

from .signal import SignalStats, SimilaritySequence
from .spangen import (
    PROVENANCE_INJECTED,
    PROVENANCE_ORIGINAL,
    Candidate,
    CandidateSet,
    SpanGenConfig,
    candidate_order_key,
    generate_spans,
    rescore,
)


@dataclass(frozen=True)
class RefineConfig:
    """Scoring and suppression knobs for refinement.

    ``beta`` weights the evidence bonus; ``beta_applies_to_injected``
    controls whether injected candidates use the same weighting (on) or add
    the raw bonus (off).
    """

    beta: float = 0.5
    nms_tiou: float = 0.8
    top_k: int = 10
    beta_applies_to_injected: bool = True

    def __post_init__(self) -> None:
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0 < self.nms_tiou <= 1:
            raise ValueError(f"nms_tiou must lie in (0, 1], got {self.nms_tiou}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


@dataclass(frozen=True)
class RegionSet:
    """Disjoint, non-adjacent, start-sorted inclusive index ranges."""

    regions: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        cleaned = tuple((int(lo), int(hi)) for lo, hi in self.regions)
        for lo, hi in cleaned:
            if lo > hi:
                raise ValueError(f"empty region [{lo}, {hi}]")
        for (_, prev_hi), (next_lo, _) in zip(cleaned, cleaned[1:]):
            if next_lo <= prev_hi + 1:
                raise ValueError("regions must be sorted, disjoint and non-adjacent")
        object.__setattr__(self, "regions", cleaned)

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)


def tiou(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Temporal intersection-over-union of two second-valued spans."""
    a_start, a_end = a
    b_start, b_end = b
    if not (a_end > a_start and b_end > b_start):
        raise ValueError(f"degenerate span: {a} vs {b}")
    inter = min(a_end, b_end) - max(a_start, b_start)
    if inter <= 0:
        return 0.0
    union = (a_end - a_start) + (b_end - b_start) - inter
    return inter / union


def evidence_bonus(
    cand: Candidate,
    raw_a: SimilaritySequence,
    raw_b: SimilaritySequence,
) -> float:
    """Sum of the unsmoothed channel maxima inside the candidate span.

    Maxima rather than means: short but decisive channel responses should
    count at full strength.
    """
    if cand.end_idx >= len(raw_a) or cand.end_idx >= len(raw_b):
        raise ValueError(
            f"candidate span [{cand.start_idx}, {cand.end_idx}] exceeds channel length"
        )
    start, stop = cand.start_idx, cand.end_idx + 1
    return float(raw_a.values[start:stop].max() + raw_b.values[start:stop].max())


def _segment_maxima(values: np.ndarray, starts: np.ndarray, stops: np.ndarray) -> np.ndarray:
    """Max of values over each [start, stop) segment, segments unordered."""
    # reduceat over interleaved boundaries; the odd gap segments are discarded
    extended = np.append(values, values[-1])
    boundaries = np.empty(2 * starts.size, dtype=np.intp)
    boundaries[0::2] = starts
    boundaries[1::2] = stops
    return np.maximum.reduceat(extended, boundaries)[0::2]


def rerank(
    cset: CandidateSet,
    raw_a: SimilaritySequence,
    raw_b: SimilaritySequence,
    beta: float,
) -> CandidateSet:
    """Rescore every candidate with final = base + beta * bonus and re-rank.

    No candidate is added or removed; only scores and order change.
    """
    cands = cset.candidates
    if not cands:
        return CandidateSet((), cset.channel, cset.signal_stats)
    starts = np.fromiter((c.start_idx for c in cands), np.intp, len(cands))
    stops = np.fromiter((c.end_idx + 1 for c in cands), np.intp, len(cands))
    limit = int(stops.max())
    if limit > len(raw_a) or limit > len(raw_b):
        raise ValueError(f"candidate span end {limit - 1} exceeds channel length")
    bonus = _segment_maxima(raw_a.values, starts, stops) + _segment_maxima(
        raw_b.values, starts, stops
    )
    rescored = tuple(
        rescore(c, b, beta) for c, b in zip(cands, bonus.tolist())
    )
    return CandidateSet(rescored, cset.channel, cset.signal_stats)


def _intervals(cset: CandidateSet) -> list[tuple[int, int]]:
    return [(c.start_idx, c.end_idx) for c in cset.candidates]


def _overlapping(own: list[tuple[int, int]], other: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Intervals in ``own`` that share at least one sample with some interval in ``other``."""
    if not own or not other:
        return []
    other_sorted = sorted(other)
    starts = [lo for lo, _ in other_sorted]
    prefix_max_end = np.maximum.accumulate([hi for _, hi in other_sorted])
    hits = []
    for lo, hi in own:
        pos = bisect.bisect_right(starts, hi)
        if pos > 0 and prefix_max_end[pos - 1] >= lo:
            hits.append((lo, hi))
    return hits


def union_regions(p_a: CandidateSet, p_b: CandidateSet) -> RegionSet:
    """High-confidence regions: merged unions of overlapping span pairs.

    Every pair (a in p_a, b in p_b) sharing at least one sample contributes
    the interval [min(starts), max(ends)]; overlapping or touching
    contributions merge into maximal disjoint regions. Because an
    overlapping pair's union interval covers exactly the two spans, the
    merged result equals the merged cover of all spans that overlap the
    other channel, which is how it is computed here.
    """
    fps_values = {
        c.fps for c in list(p_a.candidates) + list(p_b.candidates)
    }
    if len(fps_values) > 1:
        raise ValueError(f"candidate sets mix fps values: {sorted(fps_values)}")
    a_iv = _intervals(p_a)
    b_iv = _intervals(p_b)
    contributing = _overlapping(a_iv, b_iv) + _overlapping(b_iv, a_iv)
    if not contributing:
        return RegionSet(())
    contributing.sort()
    merged = [contributing[0]]
    for lo, hi in contributing[1:]:
        last_lo, last_hi = merged[-1]
        if lo <= last_hi + 1:
            merged[-1] = (last_lo, max(last_hi, hi))
        else:
            merged.append((lo, hi))
    return RegionSet(tuple(merged))


def inject(
    raw_o: SimilaritySequence,
    regions: RegionSet,
    global_stats: SignalStats,
    config: SpanGenConfig,
    raw_a: SimilaritySequence,
    raw_b: SimilaritySequence,
    beta: float,
    beta_applies: bool = True,
) -> CandidateSet:
    """Re-run span generation inside each region and score the discoveries.

    The global signal statistics are held fixed so locally prominent spans
    are judged against the whole video's variability, and every discovery
    gets its evidence bonus immediately.
    """
    weight = beta if beta_applies else 1.0
    injected: list[Candidate] = []
    for region in regions:
        if region[1] - region[0] < 2:
            continue  # fewer than 3 samples cannot hold an interior maximum
        found = generate_spans(raw_o, config, stats_override=global_stats, bounds=region)
        for cand in found.candidates:
            bonus = evidence_bonus(cand, raw_a, raw_b)
            injected.append(
                replace(
                    rescore(cand, bonus, weight),
                    provenance=PROVENANCE_INJECTED,
                )
            )
    return CandidateSet(tuple(injected), channel="injected", signal_stats=global_stats)


def _dedup_rank(cand: Candidate) -> tuple[float, int]:
    # higher score wins a duplicate span; an exact tie keeps the original
    return (-cand.final_score, 0 if cand.provenance == PROVENANCE_ORIGINAL else 1)


def nms(cset: CandidateSet, nms_tiou: float, top_k: int) -> CandidateSet:
    """Greedy non-maximum suppression down to at most ``top_k`` spans.

    Exact-duplicate spans collapse to the higher-scored one first. Then the
    highest-scored remaining candidate is kept and every candidate with
    tIoU >= ``nms_tiou`` against it is suppressed; suppression is not
    transitive through already-suppressed candidates.
    """
    if not 0 < nms_tiou <= 1:
        raise ValueError(f"nms_tiou must lie in (0, 1], got {nms_tiou}")
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    unique: dict[tuple[int, int], Candidate] = {}
    for cand in sorted(cset.candidates, key=_dedup_rank):
        unique.setdefault((cand.start_idx, cand.end_idx), cand)
    pool = sorted(unique.values(), key=candidate_order_key)
    starts = np.fromiter((c.start_s for c in pool), np.float64, len(pool))
    ends = np.fromiter((c.end_s for c in pool), np.float64, len(pool))
    lengths = ends - starts
    alive = np.ones(len(pool), dtype=bool)
    kept: list[Candidate] = []
    for i, cand in enumerate(pool):
        if not alive[i]:
            continue
        kept.append(cand)
        if len(kept) >= top_k:
            break
        inter = np.minimum(ends, ends[i]) - np.maximum(starts, starts[i])
        np.clip(inter, 0.0, None, out=inter)
        overlap = inter / (lengths + lengths[i] - inter)
        alive &= overlap < nms_tiou
    return CandidateSet(tuple(kept), channel="final", signal_stats=cset.signal_stats)
