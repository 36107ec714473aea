"""Overlapping fixed-size tiling of full frames, with box remapping.

Each axis of length ``L`` gets the fewest tiles of size ``S`` whose stride
never exceeds ``floor((1 - min_overlap) * S)``; the offsets are then spread
evenly (``round(i * (L - S) / (n - 1))``) so neighbouring tiles share an
almost uniform overlap instead of squeezing the slack into the last tile.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .boxes import GroundTruthObject, ImageAnnotation
from .errors import ConsistencyError, GeometryError, UsageError
from .raster import find_image, read_image, write_png
from .voc import save_annotation

log = logging.getLogger(__name__)

TILE_MANIFEST_HEADER = ["tile_id", "parent_id", "x0", "y0", "size", "n_boxes"]


@dataclass(frozen=True)
class KeepPolicy:
    """When a clipped box is still worth keeping as ground truth."""

    min_visible_fraction: float = 0.30
    min_side_px: float = 10.0

    def keeps(self, clipped_area, reference_area, width, height) -> bool:
        if reference_area <= 0:
            return False
        return (clipped_area / reference_area >= self.min_visible_fraction
                and width >= self.min_side_px and height >= self.min_side_px)


@dataclass(frozen=True, order=True)
class TileSpec:
    parent_id: str
    row: int
    col: int
    x0: int
    y0: int
    size: int

    @property
    def tile_id(self) -> str:
        return f"{self.parent_id}_r{self.row}_c{self.col}"


@dataclass(frozen=True)
class TilePlan:
    width: int
    height: int
    size: int
    min_overlap: float
    x_offsets: tuple[int, ...]
    y_offsets: tuple[int, ...]
    tiles: tuple[TileSpec, ...]

    @property
    def stride_x(self) -> int:
        return _max_step(self.x_offsets)

    @property
    def stride_y(self) -> int:
        return _max_step(self.y_offsets)

    @property
    def n_cols(self) -> int:
        return len(self.x_offsets)

    @property
    def n_rows(self) -> int:
        return len(self.y_offsets)


def _max_step(offsets):
    return max((b - a for a, b in zip(offsets, offsets[1:])), default=0)


def _fraction(value: float) -> Fraction:
    return Fraction(value).limit_denominator(10**6)


def max_stride(size: int, min_overlap: float) -> int:
    return math.floor((1 - _fraction(min_overlap)) * size)


def min_overlap_px(size: int, min_overlap: float) -> int:
    return math.ceil(_fraction(min_overlap) * size)


def axis_offsets(length: int, size: int, min_overlap: float) -> list[int]:
    """Evenly spread tile offsets along one axis."""
    if size > length:
        raise GeometryError(f"tile size {size} exceeds image side {length}")
    if length == size:
        return [0]
    stride = max_stride(size, min_overlap)
    if stride < 1:
        raise UsageError(f"min_overlap {min_overlap} leaves no room to advance a {size}px tile")
    n = 1 + -(-(length - size) // stride)
    span = length - size
    # round half up in integer arithmetic
    return [(2 * i * span + (n - 1)) // (2 * (n - 1)) for i in range(n)]


def plan_tiles(width: int, height: int, size: int, min_overlap: float = 0.2,
               parent_id: str = "") -> TilePlan:
    if size <= 0:
        raise UsageError(f"tile size must be positive, got {size}")
    if not (0 <= min_overlap < 1):
        raise UsageError(f"min_overlap must be in [0, 1), got {min_overlap}")
    if size > width or size > height:
        raise GeometryError(f"tile size {size} does not fit a {width}x{height} image")
    xs = axis_offsets(width, size, min_overlap)
    ys = axis_offsets(height, size, min_overlap)
    tiles = tuple(
        TileSpec(parent_id, r, c, x, y, size)
        for r, y in enumerate(ys)
        for c, x in enumerate(xs)
    )
    return TilePlan(width, height, size, min_overlap, tuple(xs), tuple(ys), tiles)


def crop_tile(image: np.ndarray, spec: TileSpec) -> np.ndarray:
    h, w = image.shape[:2]
    if spec.x0 < 0 or spec.y0 < 0 or spec.x0 + spec.size > w or spec.y0 + spec.size > h:
        raise GeometryError(
            f"tile at ({spec.x0}, {spec.y0}) size {spec.size} exceeds image {w}x{h}"
        )
    return image[spec.y0:spec.y0 + spec.size, spec.x0:spec.x0 + spec.size].copy()


def remap_boxes(objects, spec: TileSpec, keep_policy: KeepPolicy = KeepPolicy()
                ) -> list[GroundTruthObject]:
    """Clip parent-frame boxes to the tile window and shift them to tile coordinates."""
    x1, y1 = spec.x0 + spec.size, spec.y0 + spec.size
    out = []
    for obj in objects:
        clipped = obj.bbox.intersect(spec.x0, spec.y0, x1, y1)
        if clipped is None:
            continue
        if not keep_policy.keeps(clipped.area, obj.bbox.area, clipped.width, clipped.height):
            continue
        out.append(GroundTruthObject(obj.label, clipped.translate(-spec.x0, -spec.y0)))
    return out


@dataclass(frozen=True)
class TileRecord:
    tile_id: str
    parent_id: str
    x0: int
    y0: int
    size: int
    n_boxes: int


def tile_frame(ann: ImageAnnotation, image: np.ndarray, size: int, min_overlap: float,
               keep_policy: KeepPolicy = KeepPolicy(), drop_empty: bool = False):
    """Yield ``(spec, tile_annotation, tile_image)`` for one annotated frame."""
    h, w = image.shape[:2]
    if (w, h) != (ann.width, ann.height):
        raise ConsistencyError(
            f"{ann.image_id}: annotation says {ann.width}x{ann.height}, image is {w}x{h}"
        )
    plan = plan_tiles(ann.width, ann.height, size, min_overlap, parent_id=ann.image_id)
    for spec in plan.tiles:
        objs = remap_boxes(ann.objects, spec, keep_policy)
        if drop_empty and not objs:
            continue
        tile_ann = ImageAnnotation(spec.tile_id, size, size, ann.depth, objs)
        yield spec, tile_ann, crop_tile(image, spec)


def tile_dataset(annotations, images_dir, out_dir, size: int = 300, min_overlap: float = 0.2,
                 keep_policy: KeepPolicy = KeepPolicy(), drop_empty: bool = False,
                 workers: int = 1) -> list[TileRecord]:
    """Tile every annotated frame and write ``images/``, ``annotations/`` and ``tiles.csv``."""
    out_dir = Path(out_dir)
    img_out = out_dir / "images"
    xml_out = out_dir / "annotations"
    img_out.mkdir(parents=True, exist_ok=True)
    xml_out.mkdir(parents=True, exist_ok=True)
    annotations = sorted(annotations, key=lambda a: a.image_id)

    def work(ann):
        image = read_image(find_image(images_dir, ann.image_id))
        records = []
        for spec, tile_ann, tile in tile_frame(ann, image, size, min_overlap,
                                               keep_policy, drop_empty):
            write_png(img_out / f"{spec.tile_id}.png", tile)
            save_annotation(tile_ann, xml_out / f"{spec.tile_id}.xml")
            records.append(TileRecord(spec.tile_id, ann.image_id, spec.x0, spec.y0,
                                      spec.size, len(tile_ann.objects)))
        return records

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            batches = list(pool.map(work, annotations))
    else:
        batches = [work(a) for a in annotations]
    records = sorted((r for batch in batches for r in batch), key=lambda r: r.tile_id)
    write_tile_manifest(records, out_dir / "tiles.csv")
    log.info("tiled %d frames into %d tiles", len(annotations), len(records))
    return records


def write_tile_manifest(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TILE_MANIFEST_HEADER)
        for r in records:
            w.writerow([r.tile_id, r.parent_id, r.x0, r.y0, r.size, r.n_boxes])
