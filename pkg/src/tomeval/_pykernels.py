"""Pure-Python/numpy fallback for the compiled matching kernels."""

import numpy as np


def iou_matrix(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    overlap = (iw > 0) & (ih > 0)
    inter = np.where(overlap, iw * ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(overlap, inter / union, 0.0)
    return out


def greedy_match(det_boxes, gt_boxes, iou_threshold):
    ious = iou_matrix(det_boxes, gt_boxes)
    n, m = ious.shape
    out = np.full(n, -1, dtype=np.int64)
    taken = [False] * m
    for i in range(n):
        row = ious[i]
        best, best_iou = -1, -1.0
        for j in range(m):
            if not taken[j] and row[j] > best_iou:
                best, best_iou = j, row[j]
        if best >= 0 and best_iou >= iou_threshold:
            taken[best] = True
            out[i] = best
    return out
