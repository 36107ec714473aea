"""Geometric and annotation record types shared by every module.

Boxes use 0-based, half-open pixel coordinates: a box covers
``[xmin, xmax) x [ymin, ymax)`` so its width is simply ``xmax - xmin``.
Conversion from the 1-based inclusive VOC convention happens in
:mod:`tomeval.voc` and nowhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import GeometryError, RangeError


@dataclass(frozen=True, order=True)
class BBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        coords = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(c) for c in coords):
            raise GeometryError(f"non-finite box coordinates {coords}")
        if self.xmin < 0 or self.ymin < 0:
            raise GeometryError(f"negative box coordinates {coords}")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise GeometryError(f"box has no area {coords}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def intersect(self, xmin, ymin, xmax, ymax):
        """Intersection with a window, or None if it has no area."""
        x0, y0 = max(self.xmin, xmin), max(self.ymin, ymin)
        x1, y1 = min(self.xmax, xmax), min(self.ymax, ymax)
        if x0 >= x1 or y0 >= y1:
            return None
        return BBox(x0, y0, x1, y1)

    def translate(self, dx, dy) -> BBox:
        return BBox(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy)


@dataclass(frozen=True)
class GroundTruthObject:
    label: str
    bbox: BBox

    def __post_init__(self):
        if not self.label:
            raise GeometryError("ground-truth object has an empty label")


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    width: int
    height: int
    depth: int = 3
    objects: tuple[GroundTruthObject, ...] = field(default_factory=tuple)

    def __post_init__(self):
        # accept any iterable of objects but store an immutable tuple
        object.__setattr__(self, "objects", tuple(self.objects))

    def validate(self) -> None:
        """Raise if dimensions are non-positive or any box leaves the canvas."""
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(
                f"{self.image_id}: image size must be positive, got {self.width}x{self.height}"
            )
        if self.depth <= 0:
            raise GeometryError(f"{self.image_id}: depth must be positive, got {self.depth}")
        for i, obj in enumerate(self.objects):
            b = obj.bbox
            if b.xmax > self.width or b.ymax > self.height:
                raise GeometryError(
                    f"{self.image_id}: object {i} box {b.as_tuple()} exceeds "
                    f"image {self.width}x{self.height}"
                )


@dataclass(frozen=True)
class Detection:
    image_id: str
    label: str
    confidence: float
    bbox: BBox

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise RangeError(f"confidence {self.confidence} outside [0, 1]")
