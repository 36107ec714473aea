"""Summary tables, inference-time statistics and SVG plots."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from html import escape

from .errors import DataIOError, RangeError, UsageError

SUMMARY_COLUMNS = ["Model", "Confidence ≥", "Inference Time", "mAP", "Precision", "Recall", "F1"]


@dataclass(frozen=True)
class TimingLog:
    model: str
    durations_ms: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "durations_ms", tuple(float(d) for d in self.durations_ms))
        for d in self.durations_ms:
            if not (d > 0 and math.isfinite(d)):
                raise RangeError(f"{self.model}: inference time must be positive, got {d}")


@dataclass(frozen=True)
class TimingStats:
    mean: float
    median: float
    p95: float
    n: int


def timing_stats(log: TimingLog) -> TimingStats:
    if not log.durations_ms:
        raise UsageError(f"{log.model}: empty timing log")
    d = sorted(log.durations_ms)
    # nearest-rank 95th percentile
    p95 = d[max(0, math.ceil(0.95 * len(d)) - 1)]
    return TimingStats(statistics.fmean(d), statistics.median(d), p95, len(d))


def read_timing_log(path, model: str) -> TimingLog:
    """CSV with a ``ms`` column (other columns ignored)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read timing log {path}: {exc.strerror}") from None
    try:
        return TimingLog(model, [float(r["ms"]) for r in rows])
    except (KeyError, TypeError, ValueError):
        raise UsageError(f"{path}: timing log needs a numeric 'ms' column") from None


@dataclass(frozen=True)
class SummaryRow:
    model: str
    confidence_threshold_pct: float
    mean_inference_ms: float | None
    map: float
    precision: float
    recall: float
    f1: float


def percent(value: float) -> str:
    """Fraction rendered as a percentage, rounded half up to 2 decimals."""
    d = (Decimal(repr(float(value))) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{d}%"


def _threshold(value: float) -> str:
    return f"{value:g}%"


def _row_cells(row: SummaryRow) -> list[str]:
    ms = "-" if row.mean_inference_ms is None else f"{row.mean_inference_ms:.2f} ms"
    return [row.model, _threshold(row.confidence_threshold_pct), ms, percent(row.map),
            percent(row.precision), percent(row.recall), percent(row.f1)]


def emit_summary(rows, fmt: str = "csv") -> str:
    """Results table with one row per (model, threshold)."""
    cells = [_row_cells(r) for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(cells)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(SUMMARY_COLUMNS) + " |",
                 "|" + "|".join(["---"] + [":---:"] * (len(SUMMARY_COLUMNS) - 1)) + "|"]
        lines += ["| " + " | ".join(c) + " |" for c in cells]
        return "\n".join(lines) + "\n"
    raise UsageError(f"unknown summary format {fmt!r}")


# ---------------------------------------------------------------- plots

PLOT_KINDS = {
    "pr_curve": ("Recall", "Precision", "Precision x recall"),
    "f1_vs_threshold": ("Confidence threshold", "F1-score", "F1-score vs. confidence threshold"),
    "counts_vs_threshold": ("Confidence threshold", "Count", "TP / FP / FN vs. confidence threshold"),
}
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
MAX_MARKERS = 64

_W, _H = 560, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 64, 150, 36, 52


@dataclass(frozen=True)
class Series:
    name: str
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise UsageError(f"series {self.name!r}: x and y lengths differ")


def _nice_max(value: float) -> float:
    if value <= 0:
        return 1.0
    exp = 10 ** math.floor(math.log10(value))
    for m in (1, 2, 2.5, 5, 10):
        if m * exp >= value:
            return m * exp
    return 10 * exp


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_plot(series, kind: str, title: str | None = None) -> str:
    """Standalone SVG line plot. Output depends only on the inputs."""
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    series = list(series)
    if not series or any(len(s.x) == 0 for s in series):
        raise UsageError("plot needs at least one non-empty series")
    xlabel, ylabel, default_title = PLOT_KINDS[kind]
    ymax = 1.0
    if kind == "counts_vs_threshold":
        ymax = _nice_max(max(max(s.y) for s in series))
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(x):
        return _LEFT + min(max(x, 0.0), 1.0) * pw

    def py(y):
        return _TOP + ph - min(max(y / ymax, 0.0), 1.0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="13">'
        f'{escape(title or default_title)}</text>',
        f'<rect class="axes" x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="black"/>',
    ]
    for i in range(6):
        fx = i / 5
        x = px(fx)
        out.append(f'<line x1="{_fmt(x)}" y1="{_TOP + ph}" x2="{_fmt(x)}" y2="{_TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{_TOP + ph + 16}" text-anchor="middle">{fx:.1f}</text>')
        yv = ymax * i / 5
        y = py(yv)
        label = f"{yv:.1f}" if ymax == 1.0 else f"{yv:g}"
        out.append(f'<line x1="{_LEFT - 4}" y1="{_fmt(y)}" x2="{_LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 7}" y="{_fmt(y + 4)}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 14}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{_TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_TOP + ph / 2:.1f})">{escape(ylabel)}</text>')

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.x, s.y))
        out.append(f'<g class="series" data-name="{escape(s.name)}">')
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if len(s.x) <= MAX_MARKERS:
            for x, y in zip(s.x, s.y):
                out.append(f'<circle class="marker" cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" '
                           f'r="2.5" fill="{color}"/>')
        out.append("</g>")
        ly = _TOP + 10 + 16 * k
        lx = _LEFT + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{lx + 24}" y="{ly + 4}">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
