"""Independent reference implementations used only by the tests.

None of these import the code paths they check: matching uses exact
rational IoU and a literal greedy loop, AP integrates the step function
directly, tiling minimality is found by simulation, and box transforms are
checked by rasterising the transformed box.
"""

from fractions import Fraction
import math

import numpy as np


def exact_iou(a, b):
    ax0, ay0, ax1, ay1 = (Fraction(v) for v in a)
    bx0, by0, bx1, by1 = (Fraction(v) for v in b)
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return Fraction(0)
    inter = iw * ih
    return inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter)


def raster_iou(a, b, size=64):
    """IoU by counting pixels of integer boxes drawn on a grid."""
    ma = np.zeros((size, size), bool)
    mb = np.zeros((size, size), bool)
    ma[a[1]:a[3], a[0]:a[2]] = True
    mb[b[1]:b[3], b[0]:b[2]] = True
    union = (ma | mb).sum()
    return (ma & mb).sum() / union if union else 0.0


def brute_force_counts(dets, gts, iou_threshold, conf_threshold=0.0):
    """Literal greedy definition.

    ``dets`` is a list of ``(confidence, box)``; ``gts`` a list of boxes.
    Returns (tp, fp, fn, per-detection matched gt index in input order).
    """
    t = Fraction(iou_threshold).limit_denominator(10**6)
    pending = [k for k, (c, _) in enumerate(dets) if c >= conf_threshold]
    free = list(range(len(gts)))
    matched = {k: -1 for k in pending}
    while pending:
        # highest confidence first; ties by box, then by input position
        k = min(pending, key=lambda i: (-dets[i][0], tuple(dets[i][1]), i))
        pending.remove(k)
        best, best_iou = None, None
        for j in free:
            v = exact_iou(dets[k][1], gts[j])
            if best is None or v > best_iou:
                best, best_iou = j, v
        if best is not None and best_iou >= t:
            free.remove(best)
            matched[k] = best
    tp = sum(1 for v in matched.values() if v >= 0)
    return tp, len(matched) - tp, len(gts) - tp, matched


def step_integral_ap(recalls, precisions):
    """Integrate r -> max{p_k : r_k >= r} over [0, 1] exactly, interval by interval."""
    rec = [float(r) for r in recalls]
    pre = [float(p) for p in precisions]
    cuts = sorted(set([0.0, 1.0] + rec))
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        mid = (lo + hi) / 2
        env = max((p for r, p in zip(rec, pre) if r >= mid), default=0.0)
        total += (hi - lo) * env
    return total


def minimal_tile_count(length, size, min_overlap):
    """Smallest number of tiles found by greedily placing each at the largest legal stride."""
    need = math.ceil(Fraction(min_overlap).limit_denominator(10**6) * size)
    step = size - need
    pos, n = 0, 1
    while pos + size < length:
        pos = min(pos + step, length - size)
        n += 1
    return n


def rasterised_hull(box, inverse_point, width, height):
    """Bounding box of the pixels whose centres map back inside ``box``.

    ``inverse_point(x, y)`` maps an output point to the input plane.
    Returns None if no pixel survives.
    """
    cols, rows = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    sx, sy = inverse_point(cols, rows)
    inside = (sx >= box[0]) & (sx < box[2]) & (sy >= box[1]) & (sy < box[3])
    if not inside.any():
        return None
    r, c = np.nonzero(inside)
    return (c.min(), r.min(), c.max() + 1, r.max() + 1)
