"""Recall metrics over ranked span predictions.

R@N at tIoU threshold K is the fraction of queries whose ground-truth span
is matched (tIoU >= K) by any of the first N predictions. The report
averages all (N, K) cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .refine import tiou

DEFAULT_NS = (1, 5)
DEFAULT_KS = (0.1, 0.3, 0.5)

Span = tuple[float, float]


@dataclass(frozen=True)
class GroundTruth:
    """The annotated target span for one query."""

    query_id: str
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not self.end_s > self.start_s:
            raise ValueError(
                f"ground truth for {self.query_id!r} must have end_s > start_s"
            )

    @property
    def span(self) -> Span:
        return (self.start_s, self.end_s)


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """All R@N,tIoU=K cells plus their unweighted average."""

    per_cell: dict[tuple[int, float], float]
    average: float
    num_queries: int


def _group_gts(gts: Sequence[GroundTruth], multi_gt: bool) -> dict[str, list[GroundTruth]]:
    grouped: dict[str, list[GroundTruth]] = {}
    for gt in gts:
        grouped.setdefault(gt.query_id, []).append(gt)
    if not multi_gt:
        dupes = [qid for qid, entries in grouped.items() if len(entries) > 1]
        if dupes:
            raise ValueError(
                f"multiple ground truths for {dupes[0]!r}; pass multi_gt=True to allow"
            )
    return grouped


def _check_prediction_ids(
    predictions: Mapping[str, Sequence[Span]], grouped: Mapping[str, list[GroundTruth]]
) -> None:
    unknown = set(predictions) - set(grouped)
    if unknown:
        raise ValueError(f"predictions for unknown query ids: {sorted(unknown)[:5]}")
    missing = set(grouped) - set(predictions)
    if missing:
        raise ValueError(f"no prediction list for query ids: {sorted(missing)[:5]}")


def recall_at(
    predictions: Mapping[str, Sequence[Span]],
    gts: Sequence[GroundTruth],
    n: int,
    k: float,
    multi_gt: bool = False,
) -> float:
    """Fraction of queries hit within the top ``n`` predictions at tIoU >= ``k``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 < k <= 1:
        raise ValueError(f"k must lie in (0, 1], got {k}")
    grouped = _group_gts(gts, multi_gt)
    if not grouped:
        raise ValueError("no ground truths given")
    _check_prediction_ids(predictions, grouped)
    hits = 0
    for query_id, entries in grouped.items():
        top = list(predictions[query_id])[:n]
        if any(tiou(pred, gt.span) >= k for pred in top for gt in entries):
            hits += 1
    return hits / len(grouped)


def metrics_report(
    predictions: Mapping[str, Sequence[Span]],
    gts: Sequence[GroundTruth],
    ns: Sequence[int] = DEFAULT_NS,
    ks: Sequence[float] = DEFAULT_KS,
    multi_gt: bool = False,
) -> MetricsReport:
    """Compute every R@N,tIoU=K cell and their unweighted average."""
    per_cell = {
        (n, k): recall_at(predictions, gts, n, k, multi_gt=multi_gt)
        for n in ns
        for k in ks
    }
    average = sum(per_cell.values()) / len(per_cell)
    num_queries = len({gt.query_id for gt in gts})
    return MetricsReport(per_cell=per_cell, average=average, num_queries=num_queries)


def report_to_dict(report: MetricsReport) -> dict:
    """JSON-friendly view; cell keys become 'R{n}@{k}' strings."""
    return {
        "cells": {f"R{n}@{k:g}": value for (n, k), value in sorted(report.per_cell.items())},
        "average": report.average,
        "num_queries": report.num_queries,
    }


def _cell_columns(report: MetricsReport) -> list[tuple[str, float]]:
    ks = sorted({k for _, k in report.per_cell})
    ns = sorted({n for n, _ in report.per_cell})
    columns = []
    for k in ks:
        for n in ns:
            columns.append((f"R{n}@{k:g}", report.per_cell[(n, k)]))
    columns.append(("Avg.", report.average))
    return columns


def format_report_table(report: MetricsReport, label: str | None = None) -> str:
    """Aligned text table, threshold-major column order ending in Avg."""
    columns = _cell_columns(report)
    width = max(8, *(len(name) + 2 for name, _ in columns))
    header = "".join(name.rjust(width) for name, _ in columns)
    row = "".join(f"{value:.4f}".rjust(width) for _, value in columns)
    prefix = "" if label is None else f"{label}\n"
    return f"{prefix}{header}\n{row}"


def format_sweep_table(rows: Sequence[tuple[float, MetricsReport]], parameter: str) -> str:
    """One row per swept value, same columns as the single-run table."""
    if not rows:
        raise ValueError("no sweep rows to format")
    columns = _cell_columns(rows[0][1])
    width = max(8, *(len(name) + 2 for name, _ in columns))
    label_width = max(len(parameter) + 2, 8)
    lines = [parameter.rjust(label_width) + "".join(name.rjust(width) for name, _ in columns)]
    for value, report in rows:
        cells = _cell_columns(report)
        lines.append(
            f"{value:g}".rjust(label_width)
            + "".join(f"{cell:.4f}".rjust(width) for _, cell in cells)
        )
    return "\n".join(lines)
