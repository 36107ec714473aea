"""Dataset preparation and Pascal-VOC-style evaluation for greenhouse tomato detection."""

__version__ = "0.1.0"

from .boxes import BBox, Detection, GroundTruthObject, ImageAnnotation
from .errors import (
    ConsistencyError,
    DataIOError,
    GeometryError,
    ParseError,
    RangeError,
    SchemaError,
    TomevalError,
    UsageError,
)
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "BBox",
    "ConsistencyError",
    "DataIOError",
    "Detection",
    "GeometryError",
    "GroundTruthObject",
    "ImageAnnotation",
    "ParseError",
    "RangeError",
    "SchemaError",
    "TomevalError",
    "UsageError",
]
