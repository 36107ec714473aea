# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled matching kernels. Same API and bit-identical results as _pykernels."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _iou(const double[:, ::1] a, Py_ssize_t i,
                        const double[:, ::1] b, Py_ssize_t j) noexcept nogil:
    cdef double iw, ih, inter, union_
    iw = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
    ih = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union_ = ((a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
              + (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1]) - inter)
    return inter / union_


def iou_matrix(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(n):
            for j in range(m):
                ov[i, j] = _iou(av, i, bv, j)
    return out


def greedy_match(det_boxes, gt_boxes, double iou_threshold):
    """Match detections (already in priority order) to ground truths.

    Returns an int64 array holding, per detection, the index of the matched
    ground truth or -1.
    """
    cdef const double[:, ::1] dv = np.ascontiguousarray(det_boxes, dtype=np.float64).reshape(-1, 4)
    cdef const double[:, ::1] gv = np.ascontiguousarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = dv.shape[0], m = gv.shape[0], i, j, best
    cdef double v, best_iou
    out = np.full(n, -1, dtype=np.int64)
    taken_arr = np.zeros(m, dtype=np.uint8)
    cdef cnp.int64_t[::1] ov = out
    cdef cnp.uint8_t[::1] taken = taken_arr
    with nogil:
        for i in range(n):
            best = -1
            best_iou = -1.0
            for j in range(m):
                if taken[j]:
                    continue
                v = _iou(dv, i, gv, j)
                if v > best_iou:
                    best_iou = v
                    best = j
            if best >= 0 and best_iou >= iou_threshold:
                taken[best] = 1
                ov[i] = best
    return out
