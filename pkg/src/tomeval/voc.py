"""Pascal VOC annotation and plain-text detection file IO.

VOC stores 1-based inclusive pixel indices. Internally a box is 0-based and
half-open, so on read ``xmin`` and ``ymin`` drop by one while ``xmax`` and
``ymax`` are unchanged; writing applies the inverse. The shift is done in
decimal arithmetic so fractional coordinates survive a round trip bit-exactly.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from decimal import Context, Decimal, InvalidOperation
from pathlib import Path, PurePath

from .boxes import BBox, Detection, GroundTruthObject, ImageAnnotation
from .errors import (
    DataIOError,
    GeometryError,
    ParseError,
    RangeError,
    SchemaError,
    TomevalError,
)

__all__ = [
    "parse_annotation",
    "write_annotation",
    "parse_detections",
    "write_detections",
    "load_annotation",
    "save_annotation",
    "load_annotation_dir",
    "load_detection_dir",
    "format_number",
]


# wide enough that the +-1 shift never rounds any float's shortest repr
_EXACT = Context(prec=1200, Emin=-999999, Emax=999999)


def format_number(value) -> str:
    """Shortest decimal text for ``value``; integral values carry no fraction."""
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def _decimal(text: str, what: str) -> Decimal:
    try:
        d = Decimal(text.strip())
    except (InvalidOperation, AttributeError):
        raise SchemaError(f"{what}: not a number: {text!r}") from None
    if not d.is_finite():
        raise SchemaError(f"{what}: not a finite number: {text!r}")
    return d


def _required(node, path: str, context: str):
    child = node.find(path)
    if child is None or child.text is None or not child.text.strip():
        raise SchemaError(f"{context}: missing <{path}>")
    return child.text.strip()


def _int_field(node, path: str) -> int:
    d = _decimal(_required(node, path, "size"), path)
    if d != d.to_integral_value():
        raise SchemaError(f"{path}: expected an integer, got {d}")
    return int(d)


def parse_annotation(xml_text: str | bytes, image_id: str | None = None) -> ImageAnnotation:
    """Parse one VOC XML document.

    ``image_id`` defaults to the stem of ``<filename>``. Unknown elements and
    the difficult/truncated/occluded flags are ignored.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ParseError(f"malformed XML (column {col}): {exc}", line=line) from None

    if image_id is None:
        filename = root.findtext("filename")
        if filename is None or not filename.strip():
            raise SchemaError("annotation: missing <filename>")
        image_id = PurePath(filename.strip()).stem

    size = root.find("size")
    if size is None:
        raise SchemaError(f"{image_id}: missing <size>")
    width = _int_field(size, "width")
    height = _int_field(size, "height")
    depth_text = size.findtext("depth")
    depth = _int_field(size, "depth") if depth_text and depth_text.strip() else 3

    objects = []
    for i, obj in enumerate(root.findall("object")):
        label = _required(obj, "name", f"{image_id}: object {i}")
        bnd = obj.find("bndbox")
        if bnd is None:
            raise SchemaError(f"{image_id}: object {i} missing <bndbox>")
        ctx = f"{image_id}: object {i}"
        raw_xmin = _decimal(_required(bnd, "xmin", ctx), "xmin")
        raw_ymin = _decimal(_required(bnd, "ymin", ctx), "ymin")
        xmax = _decimal(_required(bnd, "xmax", ctx), "xmax")
        ymax = _decimal(_required(bnd, "ymax", ctx), "ymax")
        # a box whose file coordinates have no extent is an annotation slip,
        # even though the inclusive convention would read it as one pixel
        if xmax <= raw_xmin or ymax <= raw_ymin:
            raise GeometryError(
                f"{ctx}: degenerate box ({raw_xmin}, {raw_ymin}, {xmax}, {ymax})")
        xmin = _EXACT.subtract(raw_xmin, 1)
        ymin = _EXACT.subtract(raw_ymin, 1)
        try:
            bbox = BBox(float(xmin), float(ymin), float(xmax), float(ymax))
        except GeometryError as exc:
            raise GeometryError(f"{ctx}: {exc}") from None
        objects.append(GroundTruthObject(label, bbox))

    ann = ImageAnnotation(image_id, width, height, depth, objects)
    ann.validate()
    return ann


def _sub(parent, tag, text=None):
    el = ET.SubElement(parent, tag)
    if text is not None:
        el.text = str(text)
    return el


def write_annotation(ann: ImageAnnotation, folder: str = "images", extension: str = ".png") -> str:
    """Serialise ``ann`` as VOC XML text (inverse of :func:`parse_annotation`)."""
    try:
        ann.validate()
    except GeometryError as exc:
        raise GeometryError(f"refusing to serialise: {exc}") from None

    for i, obj in enumerate(ann.objects):
        if obj.bbox.width <= 1 or obj.bbox.height <= 1:
            raise GeometryError(
                f"refusing to serialise: {ann.image_id} object {i} is 1 px or narrower, "
                "which VOC files cannot express")

    root = ET.Element("annotation")
    _sub(root, "folder", folder)
    _sub(root, "filename", ann.image_id + extension)
    size = _sub(root, "size")
    _sub(size, "width", ann.width)
    _sub(size, "height", ann.height)
    _sub(size, "depth", ann.depth)
    _sub(root, "segmented", 0)
    for obj in ann.objects:
        node = _sub(root, "object")
        _sub(node, "name", obj.label)
        _sub(node, "pose", "Unspecified")
        _sub(node, "truncated", 0)
        _sub(node, "difficult", 0)
        bnd = _sub(node, "bndbox")
        b = obj.bbox
        _sub(bnd, "xmin", _plus_one(b.xmin))
        _sub(bnd, "ymin", _plus_one(b.ymin))
        _sub(bnd, "xmax", format_number(b.xmax))
        _sub(bnd, "ymax", format_number(b.ymax))
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode") + "\n"


def _plus_one(value: float) -> str:
    d = _EXACT.add(Decimal(format_number(value)), 1)
    return format_number(d) if d == d.to_integral_value() else str(d)


def parse_detections(text: str, image_id: str) -> list[Detection]:
    """Parse ``<label> <confidence> <xmin> <ymin> <xmax> <ymax>`` lines.

    Coordinates are already in the internal 0-based half-open convention.
    Blank lines are skipped.
    """
    dets = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", line=lineno)
        label = fields[0]
        try:
            conf, x0, y0, x1, y1 = (float(f) for f in fields[1:])
        except ValueError:
            raise ParseError(f"non-numeric field in {line.strip()!r}", line=lineno) from None
        if not (0.0 <= conf <= 1.0):
            raise RangeError(f"line {lineno}: confidence {fields[1]} outside [0, 1]")
        try:
            dets.append(Detection(image_id, label, conf, BBox(x0, y0, x1, y1)))
        except TomevalError as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
    return dets


def write_detections(dets) -> str:
    lines = []
    for d in dets:
        b = d.bbox
        lines.append(
            " ".join(
                [d.label, repr(float(d.confidence))]
                + [format_number(v) for v in b.as_tuple()]
            )
        )
    return "".join(line + "\n" for line in lines)


def load_annotation(path) -> ImageAnnotation:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read annotation {path}: {exc.strerror}") from None
    try:
        return parse_annotation(data, image_id=path.stem)
    except TomevalError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def save_annotation(ann: ImageAnnotation, path, **kwargs) -> None:
    Path(path).write_text(write_annotation(ann, **kwargs), encoding="utf-8")


def load_annotation_dir(directory) -> dict[str, ImageAnnotation]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataIOError(f"annotation directory not found: {directory}")
    return {p.stem: load_annotation(p) for p in sorted(directory.glob("*.xml"))}


def load_detection_dir(directory) -> dict[str, list[Detection]]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataIOError(f"detection directory not found: {directory}")
    out = {}
    for p in sorted(directory.glob("*.txt")):
        try:
            out[p.stem] = parse_detections(p.read_text(encoding="utf-8"), p.stem)
        except TomevalError as exc:
            raise type(exc)(f"{p}: {exc}") from None
    return out
