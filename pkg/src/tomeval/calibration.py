"""Confidence-threshold calibration by F1 sweep on a validation set."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from .metrics import Counts, EvalConfig, counts_vs_threshold, split_by_class
from .errors import UsageError


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    counts: Counts

    @property
    def threshold_pct(self) -> float:
        return round(self.threshold * 100, 9)

    @property
    def f1(self) -> float:
        return self.counts.f1


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best_threshold: float
    best_f1: float

    @property
    def best_threshold_pct(self) -> float:
        return round(self.best_threshold * 100, 9)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold_pct", "tp", "fp", "fn", "precision", "recall", "f1"])
        for row in self.rows:
            c = row.counts
            w.writerow([format_pct(row.threshold_pct), c.tp, c.fp, c.fn,
                        repr(c.precision), repr(c.recall), repr(c.f1)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"best_threshold_pct": self.best_threshold_pct, "best_f1": self.best_f1}


def format_pct(value: float) -> str:
    return f"{value:g}" if value == int(value) else repr(value)


def sweep(all_dets, all_gts, config: EvalConfig = EvalConfig(), step: float = 0.01) -> SweepResult:
    """F1 at every threshold on the grid; picks the smallest F1-maximising one.

    Counts are pooled over all ground-truth classes. A threshold keeps
    detections with confidence greater than or equal to it.
    """
    by_class = split_by_class(all_dets, all_gts)
    if not by_class:
        raise UsageError("calibration needs at least one ground-truth object")
    totals = None
    for dets, gts in by_class.values():
        table = counts_vs_threshold(dets, gts, step, config)
        if totals is None:
            totals = table
        else:
            totals = [(t, a + b) for (t, a), (_, b) in zip(totals, table)]
    rows = tuple(SweepRow(t, c) for t, c in totals)
    best = rows[0]
    for row in rows[1:]:
        if row.f1 > best.f1:
            best = row
    return SweepResult(rows, best.threshold, best.f1)


def apply_calibration(dets, threshold_pct: float):
    """Keep detections with confidence >= ``threshold_pct`` percent."""
    t = threshold_pct / 100
    if isinstance(dets, dict):
        return {k: [d for d in v if d.confidence >= t] for k, v in dets.items()}
    return [d for d in dets if d.confidence >= t]


def load_calibration(path) -> float:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        return float(data["best_threshold_pct"])
    except (KeyError, TypeError, ValueError):
        raise UsageError(f"{path}: no best_threshold_pct in calibration file") from None
