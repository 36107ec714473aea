"""Compare the compiled and numpy/pure-Python matching kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints per-call timings for ``iou_matrix`` and ``greedy_match`` on scenes
of increasing size, plus a whole-dataset evaluation under each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tomeval import _pykernels

try:
    from tomeval import _ckernels
except ImportError:
    _ckernels = None


def random_boxes(rng, n, span=1000.0):
    xy = rng.uniform(0, span, (n, 2))
    wh = rng.uniform(10, 80, (n, 2))
    return np.hstack([xy, xy + wh])


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<14}{'dets x gts':>12}" + "".join(f"{name + ' (us)':>16}" for name, _ in backends))
    for n_det, n_gt in ((8, 8), (50, 30), (300, 100)):
        dets = random_boxes(rng, n_det, 300)
        gts = random_boxes(rng, n_gt, 300)
        for kernel in ("iou_matrix", "greedy_match"):
            cells = []
            for _, mod in backends:
                fn = getattr(mod, kernel)
                call = (lambda: fn(dets, gts)) if kernel == "iou_matrix" else (lambda: fn(dets, gts, 0.5))
                number = max(1, 2000 // (n_det + n_gt))
                best = min(timeit.repeat(call, number=number, repeat=repeat)) / number
                cells.append(f"{best * 1e6:>16.1f}")
            print(f"{kernel:<14}{f'{n_det}x{n_gt}':>12}" + "".join(cells))


EVAL_SNIPPET = """
import time, numpy as np
from tomeval import BBox, Detection, GroundTruthObject
from tomeval.kernels import BACKEND
from tomeval.metrics import evaluate
rng = np.random.default_rng(1)
gts, dets = {}, []
for i in range(2000):
    boxes = []
    for _ in range(8):
        x, y = rng.uniform(0, 250, 2)
        boxes.append((x, y, x + 40, y + 40))
    gts[f"im{i}"] = [GroundTruthObject("tomato", BBox(*b)) for b in boxes]
    for b in boxes:
        j = rng.normal(0, 4, 4)
        dets.append(Detection(f"im{i}", "tomato", float(rng.random()),
                              BBox(b[0] + abs(j[0]), b[1] + abs(j[1]), b[2] + abs(j[2]), b[3] + abs(j[3]))))
start = time.perf_counter()
report = evaluate(dets, gts)
print(f"{BACKEND:<8} evaluate 2000 images / 16000 detections: {time.perf_counter() - start:.3f}s  mAP={report.map:.6f}")
"""


def bench_evaluate():
    for pure in (True, False):
        env = dict(os.environ)
        env.pop("TOMEVAL_PURE_PYTHON", None)
        if pure:
            env["TOMEVAL_PURE_PYTHON"] = "1"
        subprocess.run([sys.executable, "-c", EVAL_SNIPPET], env=env, check=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; showing the fallback only")
    bench_kernels(args.repeat)
    print(flush=True)
    bench_evaluate()


if __name__ == "__main__":
    main()
