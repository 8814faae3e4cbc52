"""Seeded synthetic benchmarks: planted events in noisy similarity curves.

Each case plants one trapezoidal event bump into a noisy baseline for the
original channel and two partially overlapping sub-event bumps into the
evidence channels, with optional distractor bumps in the original channel
only. Bumps are trapezoids (10%-width ramps) rather than rectangles so
smoothing and expansion behave as they do on real similarity curves.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import Manifest, QueryRecord, save_manifest, write_similarity
from .metrics import GroundTruth
from .signal import CHANNEL_ORIGINAL, CHANNEL_SUB_A, CHANNEL_SUB_B, SimilaritySequence

BASELINE = 0.05
RAMP_FRACTION = 0.1


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic case.

    The event holds full amplitude over [center - width/2, center + width/2]
    seconds, which is the ground truth. Sub-event bumps are centred at
    ``sub_*_offset`` fractions of the event width from the event start
    (defaults: the middles of the first and last thirds) and are
    ``sub_width_frac`` of the event wide, so each anchors one boundary,
    spills past it, and still overlaps the other around the event middle.
    ``o_coverage`` < 1 makes the original-channel bump cover only the
    trailing fraction of the event, modelling a query whose main channel
    highlights the action but not the lead-in.
    """

    duration_s: float
    event_center_s: float
    event_width_s: float
    event_amplitude: float
    fps: float = 5.0
    sub_a_offset: float = 1.0 / 6.0
    sub_b_offset: float = 5.0 / 6.0
    sub_width_frac: float = 0.75
    o_coverage: float = 1.0
    noise_sigma: float = 0.0
    distractors: int = 0
    distractor_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.duration_s > 0 or not self.fps > 0:
            raise ValueError("duration_s and fps must be positive")
        if not self.event_width_s > 0 or not self.event_amplitude > 0:
            raise ValueError("event width and amplitude must be positive")
        ramp = RAMP_FRACTION * self.event_width_s
        start = self.event_center_s - self.event_width_s / 2 - ramp
        end = self.event_center_s + self.event_width_s / 2 + ramp
        if start < 0 or end > self.duration_s:
            raise ValueError("event (including its ramps) must fit inside the video duration")
        if not 0 <= self.sub_a_offset <= 1 or not 0 <= self.sub_b_offset <= 1:
            raise ValueError("sub-bump offsets must lie in [0, 1]")
        if not 0 < self.sub_width_frac <= 1:
            raise ValueError("sub_width_frac must lie in (0, 1]")
        if not 0 < self.o_coverage <= 1:
            raise ValueError("o_coverage must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.distractors < 0:
            raise ValueError("distractors must be non-negative")
        if self.distractors > 0 and not self.distractor_amplitude > 0:
            raise ValueError("distractor_amplitude must be positive when distractors > 0")

    @property
    def event_span(self) -> tuple[float, float]:
        half = self.event_width_s / 2
        return (self.event_center_s - half, self.event_center_s + half)


@dataclass(frozen=True, eq=False)
class SynthCase:
    """One generated case: three channels plus the planted ground truth."""

    raw_o: SimilaritySequence
    raw_a: SimilaritySequence
    raw_b: SimilaritySequence
    gt: GroundTruth
    spec: SynthSpec
    query_id: str = "q0"
    video_id: str = "v0"


def _trapezoid(times: np.ndarray, center: float, width: float, amplitude: float) -> np.ndarray:
    """Trapezoid holding full amplitude over [center - width/2, center + width/2].

    The ramps sit outside that plateau, modelling similarity onset before
    and decay after the annotated moment.
    """
    ramp = RAMP_FRACTION * width
    start = center - width / 2
    end = center + width / 2
    up = np.clip((times - (start - ramp)) / ramp, 0.0, 1.0)
    down = np.clip(((end + ramp) - times) / ramp, 0.0, 1.0)
    return amplitude * np.minimum(up, down)


def _place_distractors(spec: SynthSpec, rng: np.random.Generator) -> list[float]:
    """Seeded distractor centers, kept clear of the event and each other."""
    if spec.distractors == 0:
        return []
    width = spec.event_width_s
    gap = 2.0
    # supports reach width/2 + ramp past each centre; keep them disjoint
    clearance = width * (1 + 2 * RAMP_FRACTION) + gap
    margin = width / 2 + RAMP_FRACTION * width + gap
    low, high = margin, spec.duration_s - margin
    if high <= low:
        raise ValueError("video too short to place distractors")
    centers: list[float] = []
    tries = 0
    while len(centers) < spec.distractors:
        tries += 1
        if tries > 1000 * spec.distractors:
            raise ValueError(
                f"could not place {spec.distractors} distractors in {spec.duration_s}s"
            )
        cand = float(rng.uniform(low, high))
        if abs(cand - spec.event_center_s) < clearance:
            continue
        if any(abs(cand - c) < clearance for c in centers):
            continue
        centers.append(cand)
    return centers


def generate_case(spec: SynthSpec, query_id: str = "q0", video_id: str = "v0") -> SynthCase:
    """Build one case; identical spec and seed give bit-identical output."""
    rng = np.random.default_rng(spec.seed)
    n = max(1, int(round(spec.duration_s * spec.fps)))
    times = (np.arange(n) + 0.5) / spec.fps

    event_start, event_end = spec.event_span
    width = spec.event_width_s

    o_width = spec.o_coverage * width
    o_center = event_end - o_width / 2
    bump_o = _trapezoid(times, o_center, o_width, spec.event_amplitude)

    sub_width = spec.sub_width_frac * width
    a_center = event_start + spec.sub_a_offset * width
    b_center = event_start + spec.sub_b_offset * width
    bump_a = _trapezoid(times, a_center, sub_width, spec.event_amplitude)
    bump_b = _trapezoid(times, b_center, sub_width, spec.event_amplitude)

    distractor_centers = _place_distractors(spec, rng)
    for center in distractor_centers:
        bump_o = bump_o + _trapezoid(times, center, width, spec.distractor_amplitude)

    noise_o = rng.normal(0.0, spec.noise_sigma, n)
    noise_a = rng.normal(0.0, spec.noise_sigma, n)
    noise_b = rng.normal(0.0, spec.noise_sigma, n)

    raw_o = SimilaritySequence(BASELINE + bump_o + noise_o, spec.fps, video_id, CHANNEL_ORIGINAL)
    raw_a = SimilaritySequence(BASELINE + bump_a + noise_a, spec.fps, video_id, CHANNEL_SUB_A)
    raw_b = SimilaritySequence(BASELINE + bump_b + noise_b, spec.fps, video_id, CHANNEL_SUB_B)
    gt = GroundTruth(query_id, event_start, event_end)
    return SynthCase(raw_o, raw_a, raw_b, gt, spec, query_id, video_id)


@dataclass(frozen=True)
class SuiteRanges:
    """Per-case sampling ranges for a suite; all uniform unless noted.

    ``noiseless_fraction`` of the cases get noise_sigma forced to exactly
    zero, so every suite retains a deterministic noise-free subset.
    """

    duration_range: tuple[float, float] = (120.0, 360.0)
    width_range: tuple[float, float] = (10.0, 40.0)
    amplitude_range: tuple[float, float] = (0.5, 0.9)
    noise_range: tuple[float, float] = (0.0, 0.05)
    noiseless_fraction: float = 0.25
    distractor_range: tuple[int, int] = (0, 0)
    distractor_amplitude_range: tuple[float, float] = (0.0, 0.0)
    o_coverage_range: tuple[float, float] = (1.0, 1.0)


def clean_ranges() -> SuiteRanges:
    """Single clear event, light noise, no distractors."""
    return SuiteRanges()


def saturation_ranges() -> SuiteRanges:
    """Many strong distractors swamp the original channel; the true event
    is weaker there but fully supported by both evidence channels."""
    return SuiteRanges(
        duration_range=(1800.0, 3000.0),
        width_range=(12.0, 30.0),
        amplitude_range=(0.5, 0.65),
        noise_range=(0.0, 0.03),
        noiseless_fraction=0.2,
        distractor_range=(15, 22),
        distractor_amplitude_range=(0.85, 0.95),
    )


def discrepancy_ranges() -> SuiteRanges:
    """The original channel sees only the tail of the event; the evidence
    channels anchor its start and end."""
    return SuiteRanges(
        duration_range=(180.0, 420.0),
        width_range=(16.0, 40.0),
        amplitude_range=(0.5, 0.8),
        noise_range=(0.0, 0.03),
        noiseless_fraction=0.25,
        o_coverage_range=(0.35, 0.5),
    )


PRESETS = {
    "clean": clean_ranges,
    "saturation": saturation_ranges,
    "discrepancy": discrepancy_ranges,
}


def generate_suite(n_cases: int, ranges: SuiteRanges, seed: int) -> list[SynthCase]:
    """Sample ``n_cases`` specs within the ranges and build their cases."""
    if n_cases < 1:
        raise ValueError("n_cases must be >= 1")
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        duration = float(rng.uniform(*ranges.duration_range))
        width = float(rng.uniform(*ranges.width_range))
        width = min(width, duration / 3)
        # keep the evidence bumps (which spill past the event) in frame too
        margin = 0.7 * width + 2.0
        center = float(rng.uniform(margin, duration - margin))
        amplitude = float(rng.uniform(*ranges.amplitude_range))
        if rng.uniform() < ranges.noiseless_fraction:
            noise = 0.0
        else:
            noise = float(rng.uniform(*ranges.noise_range))
        n_distractors = int(rng.integers(ranges.distractor_range[0], ranges.distractor_range[1] + 1))
        distractor_amp = (
            float(rng.uniform(*ranges.distractor_amplitude_range)) if n_distractors else 0.0
        )
        coverage = float(rng.uniform(*ranges.o_coverage_range))
        spec = SynthSpec(
            duration_s=duration,
            event_center_s=center,
            event_width_s=width,
            event_amplitude=amplitude,
            noise_sigma=noise,
            distractors=n_distractors,
            distractor_amplitude=distractor_amp,
            o_coverage=coverage,
            seed=int(rng.integers(0, 2**31 - 1)),
        )
        cases.append(generate_case(spec, query_id=f"q{i:04d}", video_id=f"synth{i:04d}"))
    return cases


def write_suite(cases: list[SynthCase], out_dir: str | Path) -> Path:
    """Write signal tracks and a pipeline-ready manifest; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    fps = cases[0].raw_o.fps
    for case in cases:
        if case.raw_o.fps != fps:
            raise ValueError("all cases in a suite must share one fps")
        tracks = {
            "original": f"{case.video_id}_o.p2sf",
            "sub_a": f"{case.video_id}_a.p2sf",
            "sub_b": f"{case.video_id}_b.p2sf",
        }
        write_similarity(out_dir / tracks["original"], case.raw_o.values)
        write_similarity(out_dir / tracks["sub_a"], case.raw_a.values)
        write_similarity(out_dir / tracks["sub_b"], case.raw_b.values)
        records.append(
            QueryRecord(
                query_id=case.query_id,
                video_id=case.video_id,
                query_text=f"synthetic event in {case.video_id}",
                ground_truth=(case.gt.start_s, case.gt.end_s),
                similarity=tracks,
            )
        )
    manifest = Manifest(fps=fps, queries=tuple(records), root=out_dir)
    path = out_dir / "manifest.json"
    save_manifest(manifest, path)
    return path
