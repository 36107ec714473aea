"""Minimal raster IO on top of Pillow. Images are ``uint8`` arrays, HxWxC."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataIOError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


def read_image(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB") if im.mode not in ("RGB", "L") else im)
    except (OSError, ValueError) as exc:
        raise DataIOError(f"cannot read image {path}: {exc}") from None
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return np.ascontiguousarray(arr, dtype=np.uint8)


def write_png(path, image: np.ndarray) -> None:
    arr = np.asarray(image, dtype=np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    # no timestamps or text chunks: output bytes depend on pixels only
    Image.fromarray(arr).save(Path(path), format="PNG", optimize=False, compress_level=6)


def find_image(directory, stem: str) -> Path:
    directory = Path(directory)
    for ext in IMAGE_EXTENSIONS:
        for cand in (directory / (stem + ext), directory / (stem + ext.upper())):
            if cand.is_file():
                return cand
    raise DataIOError(f"image for {stem!r} not found in {directory}")
