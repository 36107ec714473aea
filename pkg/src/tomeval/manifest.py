"""Frame subsampling, train/validation splitting and split manifests."""

from __future__ import annotations

import csv
import logging
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, DataIOError, UsageError
from .raster import find_image
from .voc import load_annotation

log = logging.getLogger(__name__)

MANIFEST_HEADER = ["id", "image_path", "xml_path", "n_annotations"]
SPLIT_NAMES = ("train", "val", "test")

_TILE_SUFFIX = re.compile(r"_r\d+_c\d+(?:_aug\d+_[A-Za-z0-9]+)?$")


@dataclass(frozen=True)
class FrameRecord:
    path: str
    timestamp: float


def subsample_frames(frames, interval: float) -> list[FrameRecord]:
    """Keep the first frame, then each next frame at least ``interval`` seconds later."""
    if not interval > 0:
        raise UsageError(f"interval must be positive, got {interval}")
    frames = list(frames)
    for prev, cur in zip(frames, frames[1:]):
        if cur.timestamp < prev.timestamp:
            raise UsageError(
                f"frame timestamps out of order: {prev.path}@{prev.timestamp} "
                f"then {cur.path}@{cur.timestamp}"
            )
    out = []
    next_due = -math.inf
    for f in frames:
        if f.timestamp >= next_due:
            out.append(f)
            next_due = f.timestamp + interval
    return out


def frames_from_dir(directory, fps: float, extensions=(".png", ".jpg", ".jpeg")) -> list[FrameRecord]:
    """Frames sorted by file name with timestamps ``index / fps``."""
    if not fps > 0:
        raise UsageError(f"fps must be positive, got {fps}")
    directory = Path(directory)
    if not directory.is_dir():
        raise DataIOError(f"frame directory not found: {directory}")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in extensions)
    return [FrameRecord(str(p), i / fps) for i, p in enumerate(paths)]


def frames_from_csv(path) -> list[FrameRecord]:
    """Read ``path,timestamp`` rows (header required)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read frame list {path}: {exc.strerror}") from None
    try:
        return [FrameRecord(r["path"], float(r["timestamp"])) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: bad frame list row ({exc})") from None


def parent_of(item_id: str) -> str:
    """Parent frame of a tile or augmented tile id."""
    return _TILE_SUFFIX.sub("", item_id)


def _shuffled(items: list, seed: int) -> list:
    # explicit Fisher-Yates so the permutation depends only on PCG64's integer stream
    rng = np.random.Generator(np.random.PCG64(seed))
    items = list(items)
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        items[i], items[j] = items[j], items[i]
    return items


def split_train_val(item_ids, train_fraction: float = 0.8, seed: int = 0,
                    group_by_parent: bool = False) -> tuple[list[str], list[str]]:
    """Seeded shuffle, then the first ``round(train_fraction * N)`` go to train.

    With ``group_by_parent`` whole parent frames are assigned to one side and
    the train size counts parents rather than items.
    """
    if not (0 < train_fraction < 1):
        raise UsageError(f"train_fraction must be in (0, 1), got {train_fraction}")
    item_ids = list(item_ids)
    if not item_ids:
        log.warning("split of an empty id list")
        return [], []
    if len(set(item_ids)) != len(item_ids):
        raise UsageError("duplicate ids in split input")
    if group_by_parent:
        groups: dict[str, list[str]] = {}
        for i in item_ids:
            groups.setdefault(parent_of(i), []).append(i)
        parents = _shuffled(sorted(groups), seed)
        n_train = math.floor(train_fraction * len(parents) + 0.5)
        train = [i for p in parents[:n_train] for i in groups[p]]
        val = [i for p in parents[n_train:] for i in groups[p]]
        return train, val
    order = _shuffled(item_ids, seed)
    n_train = math.floor(train_fraction * len(order) + 0.5)
    return order[:n_train], order[n_train:]


@dataclass(frozen=True)
class ManifestRow:
    id: str
    image_path: str
    xml_path: str
    n_annotations: int


@dataclass(frozen=True)
class SplitManifest:
    name: str
    rows: tuple[ManifestRow, ...]

    def __post_init__(self):
        if self.name not in SPLIT_NAMES:
            raise UsageError(f"split name must be one of {SPLIT_NAMES}, got {self.name!r}")
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.rows]

    @property
    def n_images(self) -> int:
        return len(self.rows)

    @property
    def n_annotations(self) -> int:
        return sum(r.n_annotations for r in self.rows)


def build_manifest(name: str, ids, dataset_dir, relative_to=None) -> SplitManifest:
    """Manifest rows for ``ids`` in a dataset laid out as ``images/`` + ``annotations/``."""
    dataset_dir = Path(dataset_dir)
    base = Path(relative_to) if relative_to is not None else dataset_dir
    rows = []
    for item_id in ids:
        xml = dataset_dir / "annotations" / f"{item_id}.xml"
        img = find_image(dataset_dir / "images", item_id)
        ann = load_annotation(xml)
        rows.append(ManifestRow(item_id, _rel(img, base), _rel(xml, base), len(ann.objects)))
    return SplitManifest(name, rows)


def _rel(path: Path, base: Path) -> str:
    return Path(os.path.relpath(path.resolve(), base.resolve())).as_posix()


def write_manifest(split: SplitManifest, out) -> None:
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for r in split.rows:
            w.writerow([r.id, r.image_path, r.xml_path, r.n_annotations])


def read_manifest(path, name: str | None = None, verify: bool = True) -> SplitManifest:
    """Load a manifest CSV; with ``verify`` every count is checked against its XML."""
    path = Path(path)
    if name is None:
        name = path.stem if path.stem in SPLIT_NAMES else "train"
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            body = list(reader)
    except OSError as exc:
        raise DataIOError(f"cannot read manifest {path}: {exc.strerror}") from None
    if header != MANIFEST_HEADER:
        raise ConsistencyError(f"{path}: expected header {MANIFEST_HEADER}, got {header}")
    rows = []
    for lineno, rec in enumerate(body, start=2):
        if len(rec) != 4:
            raise ConsistencyError(f"{path}:{lineno}: expected 4 columns")
        try:
            rows.append(ManifestRow(rec[0], rec[1], rec[2], int(rec[3])))
        except ValueError:
            raise ConsistencyError(f"{path}:{lineno}: bad annotation count {rec[3]!r}") from None
    manifest = SplitManifest(name, rows)
    if verify:
        for r in manifest.rows:
            xml = path.parent / r.xml_path
            if not xml.is_file():
                raise ConsistencyError(f"{r.id}: annotation file {xml} is missing")
            actual = len(load_annotation(xml).objects)
            if actual != r.n_annotations:
                raise ConsistencyError(
                    f"{r.id}: manifest says {r.n_annotations} annotations, {xml} has {actual}")
    return manifest
