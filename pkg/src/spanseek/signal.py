"""Core 1-D similarity-signal primitives.

A similarity sequence holds one query-video score per frame. Everything in
this module is a pure function of its inputs: cosine similarity from
embeddings, signal statistics, variability-adaptive smoothing, and peak
detection with topographic prominence. Frame ``i`` covers the half-open
interval ``[i / fps, (i + 1) / fps)`` seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import peak_prominences

CHANNEL_ORIGINAL = "original"
CHANNEL_SUB_A = "sub_a"
CHANNEL_SUB_B = "sub_b"

SEQUENCE_CHANNELS = (CHANNEL_ORIGINAL, CHANNEL_SUB_A, CHANNEL_SUB_B)

# logistic(sigma) saturates to 1.0 in float64 for huge sigma; the adaptive
# ratio must stay strictly below 1 so expansion thresholds stay below peaks
_TAU_R_MAX = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True, eq=False)
class SimilaritySequence:
    """Per-frame similarity values for one query-video pair."""

    values: np.ndarray
    fps: float
    video_id: str = ""
    channel: str = CHANNEL_ORIGINAL

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("similarity values must form a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("similarity values must be finite")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.channel not in SEQUENCE_CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self) -> int:
        return int(self.values.size)

    def with_values(self, values: np.ndarray) -> "SimilaritySequence":
        """New sequence with the same fps/video/channel metadata."""
        return SimilaritySequence(values, self.fps, self.video_id, self.channel)


@dataclass(frozen=True)
class SignalStats:
    """Per-signal statistics that drive smoothing and span expansion.

    ``sigma`` is the population standard deviation of the raw signal,
    ``tau_r`` the adaptive ratio derived from it, and ``window`` the odd
    moving-average width in samples.
    """

    sigma: float
    tau_r: float
    window: int

    def __post_init__(self) -> None:
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if not 0.5 < self.tau_r < 1.0:
            raise ValueError(f"tau_r must lie in (0.5, 1.0), got {self.tau_r}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be an odd positive integer, got {self.window}")


@dataclass(frozen=True)
class Peak:
    """An interior local maximum of a signal."""

    index: int
    height: float
    prominence: float


def cosine_similarity_sequence(
    frames: np.ndarray,
    query: np.ndarray,
    fps: float,
    video_id: str = "",
    channel: str = CHANNEL_ORIGINAL,
) -> SimilaritySequence:
    """Cosine similarity between each frame embedding and a query embedding.

    ``frames`` is a T x D matrix, ``query`` a D vector. Rows and query are
    L2-normalized before the dot product, so values land in [-1, 1].
    Zero-norm rows or queries are rejected because they have no direction.
    """
    frames = np.asarray(frames, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise ValueError("frames must be a non-empty T x D matrix")
    if query.ndim != 1 or query.shape[0] != frames.shape[1]:
        raise ValueError(
            f"dimension mismatch: frames have D={frames.shape[1]}, query has D={query.shape[0] if query.ndim == 1 else query.shape}"
        )
    query_norm = float(np.linalg.norm(query))
    if query_norm == 0.0:
        raise ValueError("query embedding has zero norm")
    row_norms = np.linalg.norm(frames, axis=1)
    zero_rows = np.flatnonzero(row_norms == 0.0)
    if zero_rows.size > 0:
        raise ValueError(f"frame row {int(zero_rows[0])} has zero norm")
    values = (frames @ query) / (row_norms * query_norm)
    np.clip(values, -1.0, 1.0, out=values)
    return SimilaritySequence(values, fps, video_id, channel)


def population_std(seq: SimilaritySequence) -> float:
    """Population standard deviation (divide by T) of the raw values."""
    return float(np.std(seq.values))


def adaptive_ratio(sigma: float) -> float:
    """Map signal variability to the ratio 0.5 + 0.5 * logistic(sigma).

    Strictly increasing in sigma; lands in [0.75, 1.0) for sigma >= 0.
    """
    if not sigma >= 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    ratio = 0.5 + 0.5 / (1.0 + math.exp(-sigma))
    return min(ratio, _TAU_R_MAX)


def smoothing_window(fps: float, tau_r: float) -> int:
    """Odd moving-average width nearest to fps * tau_r, at least 1.

    An exact tie between the two odd neighbours (possible when fps * tau_r
    is an even integer, e.g. fps=8 with tau_r=0.75) resolves to the smaller
    window.
    """
    if not fps > 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if not 0.5 < tau_r < 1.0:
        raise ValueError(f"tau_r must lie in (0.5, 1.0), got {tau_r}")
    x = fps * tau_r
    if x < 1.0:
        return 1
    lower = 2 * int(math.floor((x - 1.0) / 2.0)) + 1
    upper = lower + 2
    return lower if (x - lower) <= (upper - x) else upper


def min_distance_samples(min_distance_s: float, fps: float) -> int:
    """Seconds-to-samples peak spacing, rounded half-up, at least 1."""
    if not min_distance_s > 0:
        raise ValueError(f"min distance must be positive, got {min_distance_s}")
    return max(1, int(math.floor(min_distance_s * fps + 0.5)))


def moving_average(seq: SimilaritySequence, window: int) -> SimilaritySequence:
    """Centered moving average with a window that shrinks at the edges.

    Output index i is the mean of values over [max(0, i-k), min(T-1, i+k)]
    with k = (window-1)/2, so the output has the input's length and no
    zero-padding artifacts at the boundaries.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd positive integer, got {window}")
    values = seq.values
    n = values.size
    if window == 1 or n == 1:
        return seq.with_values(values)
    half = (window - 1) // 2
    csum = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1) + 1
    out = (csum[hi] - csum[lo]) / (hi - lo)
    # accumulated sums can drift a window mean past the window's own value
    # range by an ulp; pin each mean inside it so constant stretches stay
    # exactly constant
    padded = np.pad(values, half, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, window)
    np.clip(out, windows.min(axis=1), windows.max(axis=1), out=out)
    return seq.with_values(out)


def _plateau_local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of interior local maxima, one per plateau (floor midpoint).

    A maximal run of equal values counts as a peak when both its nearest
    differing neighbours are strictly lower; edge samples never qualify.
    """
    n = values.size
    if n < 3:
        return np.empty(0, dtype=np.int64)
    change = np.flatnonzero(np.diff(values) != 0)
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change, [n - 1]))
    interior = (starts > 0) & (ends < n - 1)
    starts = starts[interior]
    ends = ends[interior]
    is_peak = (values[starts - 1] < values[starts]) & (values[ends + 1] < values[starts])
    return (starts[is_peak] + ends[is_peak]) // 2


def find_peaks(
    seq: SimilaritySequence,
    min_distance_samples: int,
    prominence_min: float,
) -> list[Peak]:
    """Detect major peaks with spacing and prominence constraints.

    Candidates are plateau-aware interior local maxima. The distance filter
    runs first: candidates are processed tallest-first (ties at the lower
    index) and a kept peak suppresses every later candidate within
    ``min_distance_samples`` of it, so survivors are pairwise more than
    that many samples apart. The prominence filter then drops survivors
    with prominence below ``prominence_min``. Results are index-ascending.
    """
    if min_distance_samples < 1:
        raise ValueError(f"min_distance_samples must be >= 1, got {min_distance_samples}")
    values = seq.values
    candidates = _plateau_local_maxima(values)
    if candidates.size == 0:
        return []
    heights = values[candidates]
    order = np.lexsort((candidates, -heights))
    distance = int(min_distance_samples)
    n = values.size
    blocked = bytearray(n)
    kept: list[int] = []
    for cand in candidates[order].tolist():
        if blocked[cand]:
            continue
        kept.append(cand)
        left = cand - distance if cand > distance else 0
        right = min(cand + distance + 1, n)
        blocked[left:right] = b"\x01" * (right - left)
    kept.sort()
    kept_arr = np.asarray(kept, dtype=np.int64)
    prominences = peak_prominences(values, kept_arr)[0]
    selected = prominences >= prominence_min
    return [
        Peak(int(i), float(values[i]), float(p))
        for i, p in zip(kept_arr[selected], prominences[selected])
    ]


def _on_peak_plateau(values: np.ndarray, index: int) -> bool:
    n = values.size
    if index <= 0 or index >= n - 1:
        return False
    height = values[index]
    left = index - 1
    while left >= 0 and values[left] == height:
        left -= 1
    if left < 0 or values[left] > height:
        return False
    right = index + 1
    while right < n and values[right] == height:
        right += 1
    if right >= n or values[right] > height:
        return False
    return True


def prominence(seq: SimilaritySequence, peak_index: int) -> float:
    """Topographic prominence of a peak.

    Extend from the peak in each direction until the signal start/end or a
    strictly higher sample; the base on that side is the minimum over the
    stretch. Prominence is the peak height minus the higher base.
    """
    index = int(peak_index)
    if not _on_peak_plateau(seq.values, index):
        raise ValueError(f"index {index} is not an interior local maximum")
    return float(peak_prominences(seq.values, np.asarray([index]))[0][0])
