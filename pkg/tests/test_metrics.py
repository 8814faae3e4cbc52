import numpy as np
import pytest

from spanseek.metrics import (
    GroundTruth,
    format_report_table,
    format_sweep_table,
    metrics_report,
    recall_at,
    report_to_dict,
)

from oracles import recall_oracle


def make_gts(spans):
    return [GroundTruth(qid, lo, hi) for qid, (lo, hi) in spans.items()]


class TestRecallAt:
    def test_perfect_top1(self):
        gts = make_gts({"a": (0.0, 10.0), "b": (5.0, 8.0)})
        preds = {"a": [(0.0, 10.0)], "b": [(5.0, 8.0)]}
        assert recall_at(preds, gts, 1, 0.5) == 1.0

    def test_all_empty(self):
        gts = make_gts({"a": (0.0, 10.0), "b": (5.0, 8.0)})
        preds = {"a": [], "b": []}
        for n in (1, 5):
            for k in (0.1, 0.3, 0.5):
                assert recall_at(preds, gts, n, k) == 0.0

    def test_counting(self):
        gts = make_gts({f"q{i}": (10.0, 20.0) for i in range(4)})
        hit = (11.0, 19.0)
        miss = (50.0, 60.0)
        preds = {
            "q0": [miss, hit],
            "q1": [miss, miss, hit],
            "q2": [hit],
            "q3": [miss, miss, miss, miss, miss, hit],  # rank 6: outside top-5
        }
        assert recall_at(preds, gts, 5, 0.3) == 0.75

    def test_unknown_query_rejected(self):
        gts = make_gts({"a": (0.0, 10.0)})
        with pytest.raises(ValueError, match="unknown"):
            recall_at({"a": [], "zz": []}, gts, 1, 0.5)

    def test_missing_prediction_list_rejected(self):
        gts = make_gts({"a": (0.0, 10.0), "b": (0.0, 10.0)})
        with pytest.raises(ValueError):
            recall_at({"a": []}, gts, 1, 0.5)

    def test_duplicate_gt_needs_flag(self):
        gts = [GroundTruth("a", 0.0, 10.0), GroundTruth("a", 20.0, 30.0)]
        with pytest.raises(ValueError):
            recall_at({"a": []}, gts, 1, 0.5)
        preds = {"a": [(20.0, 30.0)]}
        assert recall_at(preds, gts, 1, 0.5, multi_gt=True) == 1.0

    def test_monotone_in_n_and_k(self):
        rng = np.random.default_rng(23)
        gts = {}
        preds = {}
        for i in range(40):
            lo = float(rng.uniform(0, 500))
            gts[f"q{i}"] = (lo, lo + float(rng.uniform(2, 30)))
            spans = []
            for _ in range(int(rng.integers(0, 8))):
                s = float(rng.uniform(0, 500))
                spans.append((s, s + float(rng.uniform(2, 30))))
            preds[f"q{i}"] = spans
        gt_list = make_gts(gts)
        for k in (0.1, 0.3, 0.5):
            values = [recall_at(preds, gt_list, n, k) for n in (1, 2, 5, 10)]
            assert values == sorted(values)
        for n in (1, 5):
            values = [recall_at(preds, gt_list, n, k) for k in (0.1, 0.3, 0.5, 0.7)]
            assert values == sorted(values, reverse=True)

    def test_matches_oracle(self):
        rng = np.random.default_rng(24)
        gts = {}
        preds = {}
        for i in range(30):
            lo = float(rng.uniform(0, 300))
            gts[f"q{i}"] = (lo, lo + 10.0)
            spans = []
            for _ in range(5):
                s = float(rng.uniform(0, 300))
                spans.append((s, s + 10.0))
            preds[f"q{i}"] = spans
        gt_list = make_gts(gts)
        for n in (1, 3, 5):
            for k in (0.1, 0.3, 0.5):
                assert recall_at(preds, gt_list, n, k) == recall_oracle(preds, gts, n, k)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(25)
        gts = make_gts({f"q{i}": (float(i * 10), float(i * 10 + 5)) for i in range(20)})
        preds = {f"q{i}": [(float(i * 10), float(i * 10 + 5))] if i % 3 else [] for i in range(20)}
        shuffled = list(gts)
        rng.shuffle(shuffled)
        assert recall_at(preds, gts, 1, 0.5) == recall_at(preds, shuffled, 1, 0.5)


class TestMetricsReport:
    def test_perfect_predictor(self):
        gts = make_gts({"a": (0.0, 10.0)})
        report = metrics_report({"a": [(0.0, 10.0)]}, gts)
        assert set(report.per_cell) == {(n, k) for n in (1, 5) for k in (0.1, 0.3, 0.5)}
        assert all(v == 1.0 for v in report.per_cell.values())
        assert report.average == 1.0
        assert report.num_queries == 1

    def test_empty_predictor(self):
        gts = make_gts({"a": (0.0, 10.0), "b": (1.0, 2.0)})
        report = metrics_report({"a": [], "b": []}, gts)
        assert all(v == 0.0 for v in report.per_cell.values())
        assert report.average == 0.0

    def test_hand_counted_fixture(self):
        gts = make_gts({"a": (10.0, 20.0), "b": (30.0, 40.0), "c": (50.0, 60.0)})
        preds = {
            # top-1 hit at every threshold
            "a": [(10.0, 20.0)],
            # top-1 tIoU = 2/14: counts only at K=0.1; rank-2 is exact
            "b": [(38.0, 44.0), (30.0, 40.0)],
            # all misses
            "c": [(0.0, 5.0)],
        }
        report = metrics_report(preds, gts)
        expected = {
            (1, 0.1): 2 / 3,
            (1, 0.3): 1 / 3,
            (1, 0.5): 1 / 3,
            (5, 0.1): 2 / 3,
            (5, 0.3): 2 / 3,
            (5, 0.5): 2 / 3,
        }
        for cell, value in expected.items():
            assert report.per_cell[cell] == pytest.approx(value, abs=1e-12)
        assert report.average == pytest.approx(sum(expected.values()) / 6, abs=1e-12)

    def test_average_within_cell_range(self):
        rng = np.random.default_rng(26)
        gts = {}
        preds = {}
        for i in range(25):
            lo = float(rng.uniform(0, 200))
            gts[f"q{i}"] = (lo, lo + 8.0)
            preds[f"q{i}"] = [
                (float(rng.uniform(0, 200)), float(rng.uniform(200, 250)))
                for _ in range(3)
            ]
        report = metrics_report(preds, make_gts(gts))
        assert min(report.per_cell.values()) <= report.average <= max(report.per_cell.values())


class TestFormatting:
    def test_report_table_layout(self):
        gts = make_gts({"a": (0.0, 10.0)})
        report = metrics_report({"a": [(0.0, 10.0)]}, gts)
        table = format_report_table(report)
        header, row = table.strip().splitlines()
        assert header.split() == ["R1@0.1", "R5@0.1", "R1@0.3", "R5@0.3", "R1@0.5", "R5@0.5", "Avg."]
        assert row.split() == ["1.0000"] * 7

    def test_report_to_dict_round(self):
        gts = make_gts({"a": (0.0, 10.0)})
        report = metrics_report({"a": []}, gts)
        doc = report_to_dict(report)
        assert doc["cells"]["R1@0.5"] == 0.0
        assert doc["num_queries"] == 1

    def test_sweep_table_has_row_per_value(self):
        gts = make_gts({"a": (0.0, 10.0)})
        report = metrics_report({"a": [(0.0, 10.0)]}, gts)
        table = format_sweep_table([(0.1, report), (0.5, report)], "beta")
        lines = table.strip().splitlines()
        assert len(lines) == 3
        assert lines[1].split()[0] == "0.1"
        assert lines[2].split()[0] == "0.5"
