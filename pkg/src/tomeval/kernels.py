"""Kernel selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``TOMEVAL_PURE_PYTHON=1`` to force the fallback.
"""

import os

BACKEND = "python"

if not os.environ.get("TOMEVAL_PURE_PYTHON"):
    try:
        from ._ckernels import greedy_match, iou_matrix

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._pykernels import greedy_match, iou_matrix

__all__ = ["BACKEND", "greedy_match", "iou_matrix"]
