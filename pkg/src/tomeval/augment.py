"""Seeded, box-aware image augmentation.

Seven variants: four geometric ones (rotation, scaling, translation,
horizontal flip), two photometric ones (Gaussian blur, additive Gaussian
noise) and ``Combination3``, which applies three distinct single variants.

Geometry works in continuous pixel coordinates (pixel ``(col, row)`` covers
``[col, col+1) x [row, row+1)``). Every geometric op is a 3x3 affine matrix;
images are resampled once through the composed matrix with black fill, and
boxes are mapped by transforming their four corners and taking the
axis-aligned hull, clipped to the canvas.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .boxes import BBox, GroundTruthObject, ImageAnnotation
from .errors import UsageError
from .raster import find_image, read_image, write_png
from .tiling import KeepPolicy
from .voc import load_annotation, save_annotation

log = logging.getLogger(__name__)

ROTATION = "Rotation"
SCALING = "Scaling"
TRANSLATION = "Translation"
FLIP = "Flip"
BLUR = "Blur"
NOISE = "Noise"
COMBINATION3 = "Combination3"

GEOMETRIC = (ROTATION, SCALING, TRANSLATION, FLIP)
PHOTOMETRIC = (BLUR, NOISE)
SINGLE_VARIANTS = GEOMETRIC + PHOTOMETRIC
VARIANTS = SINGLE_VARIANTS + (COMBINATION3,)
# application order inside Combination3; Flip precedes Translation so a shift
# direction always refers to the final (possibly mirrored) frame
CANONICAL_ORDER = {v: i for i, v in enumerate((ROTATION, SCALING, FLIP, TRANSLATION, BLUR, NOISE))}

ROTATION_RANGE = (-60.0, 60.0)
SCALE_RANGE = (0.5, 1.5)
TRANSLATION_RANGE = (0.0, 0.3)
BLUR_SIGMA_RANGE = (1.0, 3.0)
NOISE_SIGMA_RANGE = (0.03 * 255, 0.07 * 255)

AUG_MANIFEST_HEADER = ["aug_id", "source_id", "variant", "params_json"]


@dataclass(frozen=True)
class AugmentOp:
    variant: str
    params: dict = field(default_factory=dict)
    children: tuple[AugmentOp, ...] = ()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown augmentation variant {self.variant!r}")
        if self.variant == COMBINATION3:
            names = [c.variant for c in self.children]
            if len(names) != 3 or len(set(names)) != 3 or COMBINATION3 in names:
                raise UsageError(f"Combination3 needs 3 distinct single variants, got {names}")

    def to_json(self) -> dict:
        if self.variant == COMBINATION3:
            return {"ops": [{"variant": c.variant, **c.params} for c in self.canonical()]}
        return dict(self.params)

    def canonical(self) -> list[AugmentOp]:
        """Single ops in application order (geometric first, then photometric)."""
        ops = list(self.children) if self.variant == COMBINATION3 else [self]
        return sorted(ops, key=lambda op: CANONICAL_ORDER[op.variant])


def item_rng(seed: int, ordinal: int) -> np.random.Generator:
    """Independent generator for one dataset item."""
    return np.random.default_rng(np.random.SeedSequence([seed, ordinal]))


def sample_op(variant: str, rng: np.random.Generator) -> AugmentOp:
    """Draw an op's parameters uniformly from the configured ranges."""
    if variant == ROTATION:
        return AugmentOp(variant, {"angle": float(rng.uniform(*ROTATION_RANGE))})
    if variant == SCALING:
        return AugmentOp(variant, {"factor": float(rng.uniform(*SCALE_RANGE))})
    if variant == TRANSLATION:
        frac = float(rng.uniform(*TRANSLATION_RANGE))
        direction = "left" if rng.integers(2) == 0 else "right"
        return AugmentOp(variant, {"fraction": frac, "direction": direction})
    if variant == FLIP:
        return AugmentOp(variant)
    if variant == BLUR:
        return AugmentOp(variant, {"sigma": float(rng.uniform(*BLUR_SIGMA_RANGE))})
    if variant == NOISE:
        return AugmentOp(variant, {"sigma": float(rng.uniform(*NOISE_SIGMA_RANGE)),
                                   "noise_seed": int(rng.integers(2**63))})
    if variant == COMBINATION3:
        picks = rng.choice(len(SINGLE_VARIANTS), size=3, replace=False)
        return AugmentOp(variant, children=tuple(
            sample_op(SINGLE_VARIANTS[i], rng) for i in sorted(picks)))
    raise UsageError(f"unknown augmentation variant {variant!r}")


def op_matrix(op: AugmentOp, width: int, height: int) -> np.ndarray:
    """Forward affine map (x, y, 1) -> (x', y', 1) of a geometric op."""
    cx, cy = width / 2, height / 2
    if op.variant in (ROTATION, SCALING):
        if op.variant == ROTATION:
            # positive angles turn the picture counter-clockwise on screen (y points down)
            t = math.radians(op.params["angle"])
            lin = np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]])
        else:
            lin = np.eye(2) * op.params["factor"]
        m = np.eye(3)
        m[:2, :2] = lin
        m[:2, 2] = np.array([cx, cy]) - lin @ np.array([cx, cy])
        return m
    if op.variant == TRANSLATION:
        dx = op.params["fraction"] * width
        if op.params["direction"] == "left":
            dx = -dx
        return np.array([[1.0, 0.0, dx], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    if op.variant == FLIP:
        return np.array([[-1.0, 0.0, width], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    raise UsageError(f"{op.variant} is not a geometric op")


def warp_image(image: np.ndarray, matrix: np.ndarray, order: int = 1) -> np.ndarray:
    """Resample ``image`` through the forward map ``matrix``; outside is black."""
    inv = np.linalg.inv(matrix)
    # snap float dust (cos 90 deg ~ 6e-17) so quarter turns and shifts sample exactly on the grid
    near = np.abs(inv - np.rint(inv)) < 1e-12
    inv[near] = np.rint(inv[near])
    # output array index (row, col) has continuous centre (col + .5, row + .5)
    # input array index = inv(centre) - .5, expressed in (row, col) order
    a = inv[:2, :2]
    rc = np.array([[a[1, 1], a[1, 0]], [a[0, 1], a[0, 0]]])
    shift_xy = a @ np.array([0.5, 0.5]) + inv[:2, 2] - 0.5
    offset = np.array([shift_xy[1], shift_xy[0]])
    src = image.astype(np.float64)
    out = np.empty_like(src)
    for ch in range(src.shape[2]):
        out[:, :, ch] = ndimage.affine_transform(
            src[:, :, ch], rc, offset=offset, order=order, mode="constant", cval=0.0)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def transform_box(bbox: BBox, matrix: np.ndarray) -> tuple[float, float, float, float]:
    """Axis-aligned hull of the four transformed corners (unclipped)."""
    xs = (bbox.xmin, bbox.xmax, bbox.xmax, bbox.xmin)
    ys = (bbox.ymin, bbox.ymin, bbox.ymax, bbox.ymax)
    pts = matrix @ np.array([xs, ys, [1.0] * 4])
    return (float(pts[0].min()), float(pts[1].min()), float(pts[0].max()), float(pts[1].max()))


def map_boxes(objects, matrix: np.ndarray, width: int, height: int,
              keep_policy: KeepPolicy = KeepPolicy()) -> list[GroundTruthObject]:
    out = []
    for obj in objects:
        x0, y0, x1, y1 = transform_box(obj.bbox, matrix)
        # visibility is judged against the transformed hull, so scaling alone never drops a box
        hull_area = (x1 - x0) * (y1 - y0)
        cx0, cy0 = max(x0, 0.0), max(y0, 0.0)
        cx1, cy1 = min(x1, float(width)), min(y1, float(height))
        if cx0 >= cx1 or cy0 >= cy1:
            continue
        cw, ch = cx1 - cx0, cy1 - cy0
        if not keep_policy.keeps(cw * ch, hull_area, cw, ch):
            continue
        out.append(GroundTruthObject(obj.label, BBox(cx0, cy0, cx1, cy1)))
    return out


def _geometric_matrix(ops, width, height) -> np.ndarray:
    m = np.eye(3)
    for op in ops:
        m = op_matrix(op, width, height) @ m
    return m


def apply_geometric(image: np.ndarray, objects, op, keep_policy: KeepPolicy = KeepPolicy()):
    """Apply one geometric op (or an ordered list of them) to an image and its boxes."""
    ops = op if isinstance(op, (list, tuple)) else [op]
    h, w = image.shape[:2]
    if len(ops) == 1 and ops[0].variant == FLIP:
        # exact mirror; no resampling
        new_image = image[:, ::-1].copy()
    else:
        new_image = warp_image(image, _geometric_matrix(ops, w, h))
    return new_image, map_boxes(objects, _geometric_matrix(ops, w, h), w, h, keep_policy)


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    out = ndimage.gaussian_filter(image.astype(np.float64), sigma=(sigma, sigma, 0),
                                  mode="reflect", radius=(radius, radius, 0))
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def gaussian_noise(image: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noisy = image.astype(np.float64) + rng.normal(0.0, sigma, size=image.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def apply_photometric(image: np.ndarray, op: AugmentOp) -> np.ndarray:
    if op.variant == BLUR:
        return gaussian_blur(image, op.params["sigma"])
    if op.variant == NOISE:
        return gaussian_noise(image, op.params["sigma"], op.params.get("noise_seed", 0))
    raise UsageError(f"{op.variant} is not a photometric op")


def apply_combination3(image: np.ndarray, objects, ops, keep_policy: KeepPolicy = KeepPolicy()):
    """Apply three distinct single ops in canonical order."""
    if isinstance(ops, AugmentOp):
        combo = ops
    else:
        combo = AugmentOp(COMBINATION3, children=tuple(ops))
    ordered = combo.canonical()
    geometric = [op for op in ordered if op.variant in GEOMETRIC]
    objects = list(objects)
    if geometric:
        image, objects = apply_geometric(image, objects, geometric, keep_policy)
    for op in ordered:
        if op.variant in PHOTOMETRIC:
            image = apply_photometric(image, op)
    return image, objects


def apply_op(image: np.ndarray, objects, op: AugmentOp, keep_policy: KeepPolicy = KeepPolicy()):
    if op.variant == COMBINATION3:
        return apply_combination3(image, objects, op, keep_policy)
    if op.variant in GEOMETRIC:
        return apply_geometric(image, objects, op, keep_policy)
    return apply_photometric(image, op), list(objects)


@dataclass(frozen=True)
class AugRecord:
    aug_id: str
    source_id: str
    variant: str
    params: dict

    def params_json(self) -> str:
        return json.dumps(self.params, sort_keys=True, separators=(",", ":"))


def augment_item(ann: ImageAnnotation, image: np.ndarray, ordinal: int, multiplicity: int,
                 seed: int, keep_policy: KeepPolicy = KeepPolicy()):
    """Yield ``(record, annotation, image)`` for the augmented copies of one tile."""
    rng = item_rng(seed, ordinal)
    for k in range(multiplicity):
        variant = VARIANTS[int(rng.integers(len(VARIANTS)))]
        op = sample_op(variant, rng)
        new_image, objs = apply_op(image, ann.objects, op, keep_policy)
        aug_id = f"{ann.image_id}_aug{k}_{variant}"
        yield (AugRecord(aug_id, ann.image_id, variant, op.to_json()),
               ImageAnnotation(aug_id, ann.width, ann.height, ann.depth, objs),
               new_image)


def augment_dataset(src_dir, out_dir, multiplicity: int = 3, seed: int = 0,
                    keep_policy: KeepPolicy = KeepPolicy(), workers: int = 1) -> list[AugRecord]:
    """Copy every source tile and add ``multiplicity`` augmented variants of it.

    Tiles are numbered in sorted id order and each draws from its own
    generator seeded by ``(seed, ordinal)``, so output does not depend on
    ``workers``.
    """
    if multiplicity < 0:
        raise UsageError(f"multiplicity must be >= 0, got {multiplicity}")
    src_dir, out_dir = Path(src_dir), Path(out_dir)
    xml_paths = sorted((src_dir / "annotations").glob("*.xml"), key=lambda p: p.stem)
    img_out, xml_out = out_dir / "images", out_dir / "annotations"
    img_out.mkdir(parents=True, exist_ok=True)
    xml_out.mkdir(parents=True, exist_ok=True)

    def work(item):
        ordinal, xml_path = item
        ann = load_annotation(xml_path)
        image = read_image(find_image(src_dir / "images", ann.image_id))
        write_png(img_out / f"{ann.image_id}.png", image)
        save_annotation(ann, xml_out / f"{ann.image_id}.xml")
        records = []
        for rec, aug_ann, aug_image in augment_item(ann, image, ordinal, multiplicity,
                                                    seed, keep_policy):
            write_png(img_out / f"{rec.aug_id}.png", aug_image)
            save_annotation(aug_ann, xml_out / f"{rec.aug_id}.xml")
            records.append(rec)
        return records

    items = list(enumerate(xml_paths))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            batches = list(pool.map(work, items))
    else:
        batches = [work(it) for it in items]
    records = sorted((r for b in batches for r in b), key=lambda r: r.aug_id)
    with open(out_dir / "augmentations.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUG_MANIFEST_HEADER)
        for r in records:
            w.writerow([r.aug_id, r.source_id, r.variant, r.params_json()])
    log.info("augmented %d tiles into %d extra images", len(items), len(records))
    return records
