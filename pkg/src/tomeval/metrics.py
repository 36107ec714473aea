"""Detection evaluation: IoU, greedy matching, P/R/F1, PR curves and AP.

Matching follows the Pascal VOC protocol. Detections of one image and one
class are visited in descending confidence; each takes the still-unmatched
ground truth with the highest IoU and counts as a true positive if that IoU
reaches the threshold, otherwise as a false positive. Ground truths left
unmatched are false negatives.

Equal confidences are ordered by ``(xmin, ymin, xmax, ymax)`` and then by
input order, so every result is deterministic.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .boxes import BBox, Detection, GroundTruthObject, ImageAnnotation
from .errors import UsageError
from .kernels import greedy_match, iou_matrix

log = logging.getLogger(__name__)

ALL_POINT = "all-point"
ELEVEN_POINT = "11-point"
INTERPOLATIONS = (ALL_POINT, ELEVEN_POINT)


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    confidence_threshold: float = 0.0
    interpolation: str = ALL_POINT

    def __post_init__(self):
        if not (0.0 < self.iou_threshold <= 1.0):
            raise UsageError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise UsageError(
                f"confidence_threshold must be in [0, 1], got {self.confidence_threshold}"
            )
        if self.interpolation not in INTERPOLATIONS:
            raise UsageError(f"interpolation must be one of {INTERPOLATIONS}")

    def with_threshold(self, threshold: float) -> EvalConfig:
        return EvalConfig(self.iou_threshold, threshold, self.interpolation)


def precision(tp: int, fp: int) -> float:
    return tp / (tp + fp) if tp + fp else 0.0


def recall(tp: int, fn: int) -> float:
    return tp / (tp + fn) if tp + fn else 0.0


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: Counts) -> Counts:
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        return precision(self.tp, self.fp)

    @property
    def recall(self) -> float:
        return recall(self.tp, self.fn)

    @property
    def f1(self) -> float:
        return f1(self.precision, self.recall)


def iou(a: BBox, b: BBox) -> float:
    return float(iou_matrix([a.as_tuple()], [b.as_tuple()])[0, 0])


def _priority_key(det: Detection, index: int):
    return (-det.confidence, det.bbox.as_tuple(), index)


def priority_order(dets: Sequence[Detection]) -> list[int]:
    """Indices of ``dets`` in processing order."""
    return sorted(range(len(dets)), key=lambda i: _priority_key(dets[i], i))


def _boxes(items) -> np.ndarray:
    if not items:
        return np.zeros((0, 4))
    return np.array([it.bbox.as_tuple() for it in items], dtype=np.float64)


@dataclass(frozen=True)
class MatchOutcome:
    """Result of matching one image's detections against its ground truths.

    ``detections`` holds the detections that passed the confidence filter, in
    processing order; ``matched_gt[k]`` is the ground-truth index taken by
    ``detections[k]`` or -1 for a false positive.
    """

    detections: tuple[Detection, ...]
    matched_gt: tuple[int, ...]
    n_ground_truths: int

    @property
    def is_tp(self) -> tuple[bool, ...]:
        return tuple(g >= 0 for g in self.matched_gt)

    @property
    def tp(self) -> int:
        return sum(g >= 0 for g in self.matched_gt)

    @property
    def fp(self) -> int:
        return len(self.matched_gt) - self.tp

    @property
    def fn(self) -> int:
        return self.n_ground_truths - self.tp

    @property
    def counts(self) -> Counts:
        return Counts(self.tp, self.fp, self.fn)


def _gt_objects(gts) -> list[GroundTruthObject]:
    if isinstance(gts, ImageAnnotation):
        return list(gts.objects)
    return list(gts)


def _match(dets, gt_list, config):
    kept = [i for i, d in enumerate(dets) if d.confidence >= config.confidence_threshold]
    order = [kept[k] for k in priority_order([dets[i] for i in kept])]
    matched = greedy_match(_boxes([dets[i] for i in order]), _boxes(gt_list),
                           config.iou_threshold)
    return order, [int(g) for g in matched]


def match_detections(
    dets: Sequence[Detection], gts, config: EvalConfig = EvalConfig()
) -> MatchOutcome:
    """Greedy one-to-one matching for a single image and class."""
    ids = {d.image_id for d in dets}
    if len(ids) > 1:
        raise UsageError(f"detections from several images passed to one match: {sorted(ids)}")
    gt_list = _gt_objects(gts)
    order, matched = _match(dets, gt_list, config)
    outcome = MatchOutcome(tuple(dets[i] for i in order), tuple(matched), len(gt_list))
    if outcome.tp + outcome.fn != len(gt_list) or outcome.tp + outcome.fp != len(order):
        raise AssertionError("match conservation violated")
    return outcome


def _as_mapping(items, key) -> dict[str, list]:
    if isinstance(items, Mapping):
        return {k: list(v.objects) if isinstance(v, ImageAnnotation) else list(v)
                for k, v in items.items()}
    out: dict[str, list] = {}
    for it in items:
        out.setdefault(key(it), []).append(it)
    return out


def _normalise_inputs(all_dets, all_gts):
    dets = _as_mapping(all_dets, lambda d: d.image_id)
    if isinstance(all_gts, Mapping):
        gts = _as_mapping(all_gts, None)
    else:
        # a bare sequence of annotations
        gts = {a.image_id: list(a.objects) for a in all_gts}
    return dets, gts


@dataclass(frozen=True)
class ScoredDetection:
    detection: Detection
    is_tp: bool


def score_detections(all_dets, all_gts, config: EvalConfig = EvalConfig()) -> tuple[list[ScoredDetection], int]:
    """Match every image and return all kept detections in global processing order.

    Images are visited in sorted id order; the global order sorts by
    confidence, then box, then (image position, position within image).
    Returns the scored detections and the total number of ground truths.
    """
    dets, gts = _normalise_inputs(all_dets, all_gts)
    scored = []
    n_gt = 0
    for img_pos, image_id in enumerate(sorted(set(dets) | set(gts))):
        image_dets = dets.get(image_id, [])
        image_gts = _gt_objects(gts.get(image_id, []))
        ids = {d.image_id for d in image_dets}
        if len(ids) > 1:
            raise UsageError(f"mixed image ids under key {image_id!r}: {sorted(ids)}")
        order, matched = _match(image_dets, image_gts, config)
        n_gt += len(image_gts)
        for i, g in zip(order, matched):
            d = image_dets[i]
            scored.append(((-d.confidence, d.bbox.as_tuple(), img_pos, i),
                           ScoredDetection(d, g >= 0)))

    scored.sort(key=lambda item: item[0])
    return [s for _, s in scored], n_gt


@dataclass(frozen=True)
class PRCurve:
    """Precision/recall after each detection in descending-confidence order."""

    recall: np.ndarray
    precision: np.ndarray
    confidence: np.ndarray
    n_ground_truths: int

    def __len__(self):
        return len(self.recall)

    def points(self) -> list[tuple[float, float]]:
        return [(float(r), float(p)) for r, p in zip(self.recall, self.precision)]

    def truncate(self, threshold: float) -> PRCurve:
        """The prefix of the curve with confidence >= ``threshold``."""
        keep = self.confidence >= threshold
        # confidences are non-increasing, so the mask is a prefix
        n = int(keep.sum())
        return PRCurve(self.recall[:n], self.precision[:n], self.confidence[:n],
                       self.n_ground_truths)


def curve_from_scored(scored: Sequence[ScoredDetection], n_gt: int) -> PRCurve:
    if n_gt == 0:
        raise UsageError("recall is undefined without ground truths")
    flags = np.array([s.is_tp for s in scored], dtype=bool)
    tp = np.cumsum(flags, dtype=np.int64)
    n = np.arange(1, len(flags) + 1)
    conf = np.array([s.detection.confidence for s in scored], dtype=np.float64)
    return PRCurve(tp / n_gt, tp / n, conf, n_gt)


def pr_curve(all_dets, all_gts, config: EvalConfig = EvalConfig()) -> PRCurve:
    scored, n_gt = score_detections(all_dets, all_gts, config)
    return curve_from_scored(scored, n_gt)


def average_precision(curve: PRCurve, mode: str = ALL_POINT) -> float:
    if mode not in INTERPOLATIONS:
        raise UsageError(f"interpolation must be one of {INTERPOLATIONS}")
    if len(curve) == 0:
        return 0.0
    rec = curve.recall
    prec = curve.precision
    if mode == ELEVEN_POINT:
        total = 0.0
        for r in np.linspace(0.0, 1.0, 11):
            # linspace gives 0.30000000000000004 where recall is exactly 3/10
            mask = rec >= r - 1e-12
            total += prec[mask].max() if mask.any() else 0.0
        return float(total / 11)

    mrec = np.concatenate(([0.0], rec, [1.0]))
    mpre = np.concatenate(([0.0], prec, [0.0]))
    # precision envelope: max precision at any recall >= r
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0] + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mpre[steps]))


def mean_average_precision(per_class_ap: Mapping[str, float]) -> float:
    if not per_class_ap:
        raise UsageError("mAP needs at least one class")
    return float(sum(per_class_ap.values()) / len(per_class_ap))


def threshold_grid(step: float) -> list[float]:
    """Thresholds 0, step, 2*step, ... up to and including 1 when reachable."""
    if not (0.0 < step <= 1.0):
        raise UsageError(f"step must be in (0, 1], got {step}")
    frac = Fraction(step).limit_denominator(10**9)
    out = []
    k = 0
    while k * frac <= 1:
        out.append(float(k * frac))
        k += 1
    return out


def counts_vs_threshold(all_dets, all_gts, step: float = 0.01,
                        config: EvalConfig = EvalConfig()) -> list[tuple[float, Counts]]:
    """TP/FP/FN at each confidence threshold of the grid.

    One unfiltered matching is enough: raising the threshold only removes the
    lowest-confidence detections, which never changes how the others matched.
    """
    scored, n_gt = score_detections(all_dets, all_gts, config.with_threshold(0.0))
    conf = np.array([s.detection.confidence for s in scored], dtype=np.float64)
    tp_cum = np.concatenate(([0], np.cumsum([s.is_tp for s in scored], dtype=np.int64)))
    # conf is non-increasing; count of detections with conf >= t
    neg = -conf
    rows = []
    for t in threshold_grid(step):
        n = int(np.searchsorted(neg, -t, side="right"))
        tp = int(tp_cum[n])
        rows.append((t, Counts(tp, n - tp, n_gt - tp)))
    return rows


@dataclass
class ClassResult:
    label: str
    ap: float
    counts: Counts
    curve: PRCurve

    def to_json(self) -> dict:
        return {
            "ap": self.ap,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "precision": self.counts.precision,
            "recall": self.counts.recall,
            "f1": self.counts.f1,
            "curve": [[float(r), float(p), float(c)] for r, p, c in
                      zip(self.curve.recall, self.curve.precision, self.curve.confidence)],
        }


@dataclass
class EvalReport:
    config: EvalConfig
    per_class: dict[str, ClassResult] = field(default_factory=dict)

    @property
    def map(self) -> float:
        return mean_average_precision({k: v.ap for k, v in self.per_class.items()})

    @property
    def totals(self) -> Counts:
        total = Counts()
        for res in self.per_class.values():
            total = total + res.counts
        return total

    def to_json(self) -> dict:
        totals = self.totals
        first = self.per_class[sorted(self.per_class)[0]]
        return {
            "config": {
                "iou_threshold": self.config.iou_threshold,
                "confidence_threshold": self.config.confidence_threshold,
                "interpolation": self.config.interpolation,
            },
            "per_class": {k: self.per_class[k].to_json() for k in sorted(self.per_class)},
            "map": self.map,
            "totals": {
                "tp": totals.tp, "fp": totals.fp, "fn": totals.fn,
                "precision": totals.precision, "recall": totals.recall, "f1": totals.f1,
            },
            "curve": [[float(r), float(p)] for r, p in first.curve.points()],
        }


def split_by_class(all_dets, all_gts):
    """Group per-image inputs into ``{label: (dets_by_image, gts_by_image)}``."""
    dets, gts = _normalise_inputs(all_dets, all_gts)
    images = sorted(set(dets) | set(gts))
    labels = sorted({o.label for objs in gts.values() for o in objs})
    stray = sorted({d.label for ds in dets.values() for d in ds} - set(labels))
    if stray:
        log.warning("detections for classes absent from ground truth ignored: %s", stray)
    out = {}
    for label in labels:
        out[label] = (
            {i: [d for d in dets.get(i, []) if d.label == label] for i in images},
            {i: [o for o in gts.get(i, []) if o.label == label] for i in images},
        )
    return out


def evaluate(all_dets, all_gts, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Per-class AP, counts and curves plus mAP over the ground-truth classes."""
    by_class = split_by_class(all_dets, all_gts)
    if not by_class:
        raise UsageError("no ground-truth objects to evaluate against")
    report = EvalReport(config)
    for label, (dets, gts) in by_class.items():
        scored, n_gt = score_detections(dets, gts, config)
        curve = curve_from_scored(scored, n_gt)
        tp = sum(s.is_tp for s in scored)
        counts = Counts(tp, len(scored) - tp, n_gt - tp)
        report.per_class[label] = ClassResult(
            label, average_precision(curve, config.interpolation), counts, curve)
    return report
