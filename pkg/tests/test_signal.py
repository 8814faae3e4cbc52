import math

import numpy as np
import pytest

from spanseek.signal import (
    Peak,
    SignalStats,
    SimilaritySequence,
    adaptive_ratio,
    cosine_similarity_sequence,
    find_peaks,
    min_distance_samples,
    moving_average,
    population_std,
    prominence,
    smoothing_window,
)

from oracles import (
    find_peaks_oracle,
    local_maxima_oracle,
    moving_average_oracle,
    prominence_oracle,
    random_signal,
)


def seq(values, fps=5.0):
    return SimilaritySequence(np.asarray(values, dtype=float), fps)


class TestSimilaritySequence:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            seq([])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            seq([0.1, float("nan")])

    def test_rejects_bad_fps(self):
        with pytest.raises(ValueError):
            seq([0.1], fps=0.0)

    def test_values_immutable(self):
        s = seq([0.1, 0.2])
        with pytest.raises(ValueError):
            s.values[0] = 5.0


class TestCosineSimilarity:
    def test_identity_row(self):
        q = np.array([1.0, 2.0, -3.0])
        out = cosine_similarity_sequence(q[None, :], q, fps=5.0)
        assert out.values[0] == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_row(self):
        out = cosine_similarity_sequence(np.array([[1.0, 0.0]]), np.array([0.0, 2.0]), fps=5.0)
        assert out.values[0] == 0.0

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(7)
        frames = rng.normal(size=(8, 4))
        query = rng.normal(size=4)
        out = cosine_similarity_sequence(frames, query, fps=5.0)
        for t in range(8):
            fn = frames[t] / np.linalg.norm(frames[t])
            qn = query / np.linalg.norm(query)
            assert out.values[t] == pytest.approx(float(np.dot(fn, qn)), abs=1e-9)

    def test_zero_row_named(self):
        frames = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="row 1"):
            cosine_similarity_sequence(frames, np.array([1.0, 1.0]), fps=5.0)

    def test_zero_query_rejected(self):
        with pytest.raises(ValueError, match="query"):
            cosine_similarity_sequence(np.ones((2, 3)), np.zeros(3), fps=5.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine_similarity_sequence(np.ones((2, 3)), np.ones(4), fps=5.0)


class TestPopulationStd:
    def test_constant_is_zero(self):
        assert population_std(seq([0.3, 0.3, 0.3])) == 0.0

    def test_two_value_symmetry(self):
        assert population_std(seq([0.0, 1.0, 0.0, 1.0])) == 0.5

    def test_matches_two_pass(self):
        rng = np.random.default_rng(11)
        values = rng.uniform(size=64)
        mean = sum(values) / len(values)
        expected = math.sqrt(sum((x - mean) ** 2 for x in values) / len(values))
        assert population_std(seq(values)) == pytest.approx(expected, abs=1e-12)


class TestAdaptiveRatio:
    def test_zero_sigma(self):
        assert adaptive_ratio(0.0) == 0.75

    def test_sigma_one_frozen(self):
        assert adaptive_ratio(1.0) == pytest.approx(0.8655292893150024, abs=1e-15)

    def test_monotone_and_bounded(self):
        sigmas = np.linspace(0.0, 50.0, 500)
        ratios = [adaptive_ratio(s) for s in sigmas]
        assert all(0.75 <= r < 1.0 for r in ratios)
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))
        assert all(b > a for a, b in zip(ratios[:100], ratios[1:101]))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            adaptive_ratio(-0.1)

    def test_huge_sigma_stays_below_one(self):
        assert adaptive_ratio(1e9) < 1.0


class TestSmoothingWindow:
    def test_rounds_to_nearest_odd(self):
        assert smoothing_window(5.0, 0.75) == 3

    def test_floor_to_minimum(self):
        assert smoothing_window(1.0, 0.75) == 1

    def test_near_one_ratio(self):
        assert smoothing_window(5.0, 0.9999) == 5

    def test_tie_takes_smaller(self):
        # fps=8 with tau_r=0.75 gives exactly 6.0, midway between 5 and 7
        assert smoothing_window(8.0, 0.75) == 5

    def test_always_odd(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            fps = float(rng.uniform(0.5, 60.0))
            tau = float(rng.uniform(0.5001, 0.9999))
            w = smoothing_window(fps, tau)
            assert w >= 1 and w % 2 == 1


class TestMinDistanceSamples:
    def test_default_point(self):
        assert min_distance_samples(1.0, 5.0) == 5

    def test_floor_to_one(self):
        assert min_distance_samples(0.01, 5.0) == 1

    def test_half_rounds_up(self):
        assert min_distance_samples(0.5, 5.0) == 3


class TestMovingAverage:
    def test_window_one_identity(self):
        s = seq([0.2, 0.9, 0.1, 0.5])
        out = moving_average(s, 1)
        assert np.array_equal(out.values, s.values)

    def test_constant_unchanged_exactly(self):
        s = seq([0.1] * 20)
        out = moving_average(s, 5)
        assert np.array_equal(out.values, s.values)

    def test_edge_rule(self):
        out = moving_average(seq([0.0, 3.0, 0.0]), 3)
        assert out.values.tolist() == [1.5, 1.0, 1.5]

    def test_preserves_metadata(self):
        s = SimilaritySequence(np.ones(4), 5.0, "vid", "sub_a")
        out = moving_average(s, 3)
        assert (out.fps, out.video_id, out.channel) == (5.0, "vid", "sub_a")

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            moving_average(seq([1.0, 2.0]), 2)

    def test_matches_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            values = random_signal(rng, int(rng.integers(1, 64)))
            window = int(rng.choice([1, 3, 5, 7, 9]))
            out = moving_average(seq(values), window)
            expected = moving_average_oracle(values, window)
            np.testing.assert_allclose(out.values, expected, atol=1e-12)

    def test_stays_within_bounds(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            values = random_signal(rng, int(rng.integers(1, 128)))
            out = moving_average(seq(values), 7).values
            assert out.min() >= values.min()
            assert out.max() <= values.max()

    def test_wider_window_lowers_pulse_peak(self):
        values = np.zeros(40)
        values[18:23] = 1.0
        narrow = moving_average(seq(values), 3).values.max()
        wide = moving_average(seq(values), 9).values.max()
        assert narrow >= wide


class TestFindPeaks:
    def test_monotone_has_none(self):
        assert find_peaks(seq(np.arange(10.0)), 1, 0.0) == []

    def test_constant_has_none(self):
        assert find_peaks(seq(np.full(10, 0.4)), 1, 0.0) == []

    def test_two_spikes(self):
        peaks = find_peaks(seq([0.0, 1.0, 0.0, 1.0, 0.0]), 1, 0.05)
        assert [p.index for p in peaks] == [1, 3]

    def test_plateau_midpoint(self):
        peaks = find_peaks(seq([0.0, 2.0, 2.0, 2.0, 0.0]), 1, 0.05)
        assert [p.index for p in peaks] == [2]

    def test_distance_suppression_prefers_taller(self):
        values = [0.0, 0.5, 0.0, 1.0, 0.0]
        peaks = find_peaks(seq(values), 2, 0.0)
        assert [p.index for p in peaks] == [3]

    def test_matches_oracle_on_random_signals(self):
        rng = np.random.default_rng(31)
        for _ in range(60):
            values = random_signal(rng)
            distance = int(rng.choice([1, 2, 3, 5, 8]))
            pmin = float(rng.choice([0.0, 0.01, 0.05, 0.1]))
            got = find_peaks(seq(values), distance, pmin)
            expected = find_peaks_oracle(values, distance, pmin)
            assert [p.index for p in got] == [e[0] for e in expected]
            for peak, (_, height, prom) in zip(got, expected):
                assert peak.height == height
                assert peak.prominence == pytest.approx(prom, abs=1e-9)

    def test_pairwise_spacing(self):
        rng = np.random.default_rng(32)
        for _ in range(20):
            values = random_signal(rng)
            distance = int(rng.choice([1, 2, 5]))
            idx = [p.index for p in find_peaks(seq(values), distance, 0.0)]
            for a in idx:
                for b in idx:
                    assert a == b or abs(a - b) > distance

    def test_bad_distance_rejected(self):
        with pytest.raises(ValueError):
            find_peaks(seq([0.0, 1.0, 0.0]), 0, 0.0)


class TestProminence:
    def test_lone_spike(self):
        assert prominence(seq([0.0, 1.0, 0.0]), 1) == 1.0

    def test_global_maximum(self):
        assert prominence(seq([0.2, 0.9, 0.1]), 1) == pytest.approx(0.7, abs=1e-12)

    def test_base_search_stops_at_higher_sample(self):
        assert prominence(seq([0.0, 0.5, 0.2, 0.8, 0.0]), 1) == pytest.approx(0.3, abs=1e-12)

    def test_non_maximum_rejected(self):
        with pytest.raises(ValueError):
            prominence(seq([0.0, 1.0, 2.0]), 1)

    def test_edge_rejected(self):
        with pytest.raises(ValueError):
            prominence(seq([2.0, 1.0, 0.0]), 0)

    def test_matches_oracle(self):
        rng = np.random.default_rng(41)
        checked = 0
        while checked < 200:
            values = random_signal(rng)
            for index in local_maxima_oracle(values):
                got = prominence(seq(values), index)
                assert got == pytest.approx(prominence_oracle(values, index), abs=1e-9)
                checked += 1

    def test_global_max_uses_larger_base(self):
        # for the tallest peak both stretches run to the signal ends, so its
        # prominence is height minus the larger of the two side minima
        rng = np.random.default_rng(42)
        for _ in range(30):
            values = random_signal(rng)
            maxima = local_maxima_oracle(values)
            if not maxima:
                continue
            tallest = max(maxima, key=lambda i: values[i])
            if values[tallest] < values.max():
                continue
            left_base = values[: tallest + 1].min()
            right_base = values[tallest:].min()
            expected = values[tallest] - max(left_base, right_base)
            assert prominence(seq(values), tallest) == pytest.approx(expected, abs=1e-12)


class TestSignalStats:
    def test_validates_fields(self):
        SignalStats(0.1, 0.76, 3)
        with pytest.raises(ValueError):
            SignalStats(-0.1, 0.76, 3)
        with pytest.raises(ValueError):
            SignalStats(0.1, 1.0, 3)
        with pytest.raises(ValueError):
            SignalStats(0.1, 0.76, 4)


def test_peak_invariant_holds_on_random_signals():
    rng = np.random.default_rng(51)
    for _ in range(20):
        values = random_signal(rng)
        for peak in find_peaks(seq(values), 1, 0.0):
            assert isinstance(peak, Peak)
            assert 0 < peak.index < len(values) - 1
            assert peak.prominence <= peak.height - values.min() + 1e-12
