"""Synthetic frames, annotations and detections for demos, tests and benchmarks.

Frames are green canvases with red discs standing in for tomatoes. Fake
detections jitter each ground-truth box, drop some (misses) and add random
low-confidence boxes (false positives).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .boxes import BBox, Detection, GroundTruthObject, ImageAnnotation
from .raster import write_png
from .voc import save_annotation, write_detections


def make_frame(rng: np.random.Generator, image_id: str, width: int = 1280, height: int = 720,
               n_objects: int = 8, radius=(18, 45), label: str = "tomato"):
    yy, xx = np.mgrid[0:height, 0:width]
    image = np.empty((height, width, 3), dtype=np.uint8)
    image[..., 0] = 40 + (xx * 60 // width)
    image[..., 1] = 110 + (yy * 60 // height)
    image[..., 2] = 50
    objects = []
    r_hi = max(1, min(radius[1], min(width, height) // 2 - 1))
    r_lo = min(radius[0], r_hi)
    for _ in range(n_objects):
        r = int(rng.integers(r_lo, r_hi + 1))
        cx = int(rng.integers(r, width - r))
        cy = int(rng.integers(r, height - r))
        disc = (xx - cx + 0.5) ** 2 + (yy - cy + 0.5) ** 2 <= r * r
        image[disc] = (200, 30 + int(rng.integers(40)), 30)
        objects.append(GroundTruthObject(label, BBox(cx - r, cy - r, cx + r, cy + r)))
    return image, ImageAnnotation(image_id, width, height, 3, objects)


def fake_detections(ann: ImageAnnotation, rng: np.random.Generator, miss_rate: float = 0.15,
                    jitter: float = 0.08, n_false: int = 3) -> list[Detection]:
    dets = []
    for obj in ann.objects:
        if rng.random() < miss_rate:
            continue
        b = obj.bbox
        dx, dy = rng.normal(0, jitter * b.width, 2)
        x0 = min(max(b.xmin + dx, 0.0), ann.width - 2.0)
        y0 = min(max(b.ymin + dy, 0.0), ann.height - 2.0)
        x1 = min(max(b.xmax + dx, x0 + 1.0), float(ann.width))
        y1 = min(max(b.ymax + dy, y0 + 1.0), float(ann.height))
        conf = float(np.clip(rng.beta(5, 2), 0.0, 1.0))
        dets.append(Detection(ann.image_id, obj.label, round(conf, 4),
                              BBox(round(x0, 2), round(y0, 2), round(x1, 2), round(y1, 2))))
    for _ in range(n_false):
        w = float(rng.uniform(10, 60))
        x0 = float(rng.uniform(0, ann.width - w))
        y0 = float(rng.uniform(0, ann.height - w))
        conf = float(np.clip(rng.beta(2, 5), 0.0, 1.0))
        dets.append(Detection(ann.image_id, "tomato", round(conf, 4),
                              BBox(round(x0, 2), round(y0, 2), round(x0 + w, 2), round(y0 + w, 2))))
    return dets


def write_corpus(out_dir, n_frames: int = 20, seed: int = 0, width: int = 1280,
                 height: int = 720, n_objects: int = 8) -> list[ImageAnnotation]:
    """Write ``frames/`` (PNG) and ``annotations/`` (VOC XML) under ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    (out_dir / "annotations").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    anns = []
    for i in range(n_frames):
        image_id = f"frame_{i:05d}"
        image, ann = make_frame(rng, image_id, width, height, n_objects)
        write_png(out_dir / "frames" / f"{image_id}.png", image)
        save_annotation(ann, out_dir / "annotations" / f"{image_id}.xml")
        anns.append(ann)
    return anns


def write_detection_dir(annotations, out_dir, seed: int = 0, **kwargs) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, ann in enumerate(sorted(annotations, key=lambda a: a.image_id)):
        rng = np.random.default_rng([seed, k])
        dets = fake_detections(ann, rng, **kwargs)
        (out_dir / f"{ann.image_id}.txt").write_text(write_detections(dets), encoding="utf-8")
