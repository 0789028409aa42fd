"""On-disk interchange: PFM rasters, VOC annotations, manifests, prediction files.

Directory convention for a dataset: for each image stem ``X`` there is
``X.att.h<k>.pfm`` (one grayscale PFM per attention head, ``k = 0..H-1``),
``X.depth.pfm`` (nearness convention: larger values are closer to the
camera), optionally ``X.ann.xml`` (VOC annotation) and ``X.png``.

Box coordinates are 0-based half-open ``[xmin, xmax) x [ymin, ymax)``
everywhere inside this package; VOC's 1-based inclusive coordinates are
converted exactly once, in :func:`parse_voc_xml`.
"""

from __future__ import annotations

import json
import re
import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional

import numpy as np

from .validation import ContractError, as_raster, check_finite

if TYPE_CHECKING:  # pragma: no cover
    from .boxes import DetectionSet


class PfmFormatError(ValueError):
    """Malformed PFM header or truncated payload."""


class PfmDataError(ValueError):
    """PFM payload contains a non-finite value."""


class AnnotationError(ValueError):
    """VOC annotation XML is missing required structure."""


class PredictionFormatError(ValueError):
    """Prediction JSON line violates the documented schema."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, 0-based half-open pixel coordinates."""

    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def __post_init__(self):
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise ContractError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass(frozen=True)
class GTObject:
    box: Box
    label: str = ""
    difficult: bool = False


@dataclass
class GroundTruth:
    """Per-image ground-truth boxes. Labels are retained but never matched on."""

    stem: str
    objects: list[GTObject]
    image_width: int
    image_height: int
    clamped: int = 0  # boxes that had to be clamped to image bounds at parse time

    @property
    def boxes(self) -> list[Box]:
        return [o.box for o in self.objects]


@dataclass
class ManifestEntry:
    """Paths for one image stem; rasters are loaded lazily via load_record."""

    stem: str
    head_paths: list[Path]
    depth_path: Path
    ann_path: Optional[Path] = None
    png_path: Optional[Path] = None


@dataclass
class ImageRecord:
    stem: str
    attention_heads: list[np.ndarray]
    depth: np.ndarray
    annotation: Optional[GroundTruth] = None

    def __post_init__(self):
        if not self.attention_heads:
            raise ContractError(f"{self.stem}: need at least one attention head")
        shape = self.attention_heads[0].shape
        for k, head in enumerate(self.attention_heads):
            if head.shape != shape:
                raise ContractError(
                    f"{self.stem}: head {k} has shape {head.shape}, expected {shape}"
                )


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------

def _read_pfm_line(f, path) -> tuple[bytes, int]:
    line = f.readline()
    if not line.endswith(b"\n"):
        raise PfmFormatError(f"{path}: truncated header at byte offset {f.tell()}")
    return line.strip(), f.tell()


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM file into a top-to-bottom float32 raster."""
    path = Path(path)
    with open(path, "rb") as f:
        tag, offset = _read_pfm_line(f, path)
        if tag == b"PF":
            raise PfmFormatError(
                f"{path}: color 'PF' not supported (grayscale 'Pf' only), byte offset 0"
            )
        if tag != b"Pf":
            raise PfmFormatError(f"{path}: bad magic {tag!r} at byte offset 0")
        dims, dims_offset = _read_pfm_line(f, path)
        m = re.fullmatch(rb"(\d+)\s+(\d+)", dims)
        if not m:
            raise PfmFormatError(
                f"{path}: bad dimensions line {dims!r} at byte offset {offset}"
            )
        width, height = int(m.group(1)), int(m.group(2))
        if width < 1 or height < 1:
            raise PfmFormatError(
                f"{path}: non-positive dimensions {width}x{height} at byte offset {offset}"
            )
        scale_line, payload_offset = _read_pfm_line(f, path)
        try:
            scale = float(scale_line)
        except ValueError:
            raise PfmFormatError(
                f"{path}: bad scale line {scale_line!r} at byte offset {dims_offset}"
            ) from None
        if scale == 0.0:
            raise PfmFormatError(
                f"{path}: zero scale at byte offset {dims_offset}"
            )
        count = width * height
        payload = f.read(4 * count)
        if len(payload) != 4 * count:
            raise PfmFormatError(
                f"{path}: payload truncated at byte offset {payload_offset + len(payload)}"
            )
    endian = "<" if scale < 0 else ">"
    data = np.frombuffer(payload, dtype=np.dtype(f"{endian}f4")).astype(np.float32)
    data = data.reshape(height, width)
    data = np.flipud(data).copy()  # PFM stores rows bottom-to-top
    bad = np.flatnonzero(~np.isfinite(data))
    if bad.size:
        raise PfmDataError(f"{path}: non-finite value at pixel index {int(bad[0])}")
    return data


def write_pfm(raster: np.ndarray, path) -> None:
    """Write a raster as grayscale PFM (scale -1.0, little-endian, bottom-to-top)."""
    arr = check_finite(as_raster(raster), "raster")
    height, width = arr.shape
    path = Path(path)
    payload = np.flipud(arr).astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{width} {height}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(payload)


# ---------------------------------------------------------------------------
# VOC annotations
# ---------------------------------------------------------------------------

def _int_text(el) -> int:
    return int(float(el.text.strip()))


def parse_voc_xml(data: bytes, stem: str = "") -> GroundTruth:
    """Parse a VOC annotation, converting 1-based inclusive boxes to 0-based half-open.

    A VOC box ``[1, 1, 10, 10]`` becomes ``Box(0, 0, 10, 10)``. Boxes that
    stick out of the image are clamped; ``GroundTruth.clamped`` counts them.
    Objects flagged difficult are retained with ``difficult=True``.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise AnnotationError(f"{stem}: not well-formed XML: {e}") from None
    size = root.find("size")
    if size is None or size.find("width") is None or size.find("height") is None:
        raise AnnotationError(f"{stem}: missing size element")
    width = _int_text(size.find("width"))
    height = _int_text(size.find("height"))
    if width < 1 or height < 1:
        raise AnnotationError(f"{stem}: bad image size {width}x{height}")
    if not stem:
        fname = root.findtext("filename", default="")
        stem = Path(fname).stem if fname else ""

    objects: list[GTObject] = []
    clamped = 0
    for obj in root.findall("object"):
        bnd = obj.find("bndbox")
        if bnd is None:
            raise AnnotationError(f"{stem}: object without bndbox")
        xmin = _int_text(bnd.find("xmin")) - 1
        ymin = _int_text(bnd.find("ymin")) - 1
        xmax = _int_text(bnd.find("xmax"))
        ymax = _int_text(bnd.find("ymax"))
        cx0 = min(max(xmin, 0), width - 1)
        cy0 = min(max(ymin, 0), height - 1)
        cx1 = max(min(xmax, width), cx0 + 1)
        cy1 = max(min(ymax, height), cy0 + 1)
        if (cx0, cy0, cx1, cy1) != (xmin, ymin, xmax, ymax):
            clamped += 1
        objects.append(
            GTObject(
                box=Box(cx0, cy0, cx1, cy1),
                label=obj.findtext("name", default="").strip(),
                difficult=obj.findtext("difficult", default="0").strip() == "1",
            )
        )
    return GroundTruth(stem=stem, objects=objects, image_width=width,
                       image_height=height, clamped=clamped)


def serialize_voc_xml(gt: GroundTruth) -> bytes:
    """Inverse of parse_voc_xml on the GroundTruth model (half-open -> VOC 1-based)."""
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = f"{gt.stem}.png"
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(gt.image_width)
    ET.SubElement(size, "height").text = str(gt.image_height)
    ET.SubElement(size, "depth").text = "1"
    for o in gt.objects:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = o.label
        ET.SubElement(obj, "difficult").text = "1" if o.difficult else "0"
        bnd = ET.SubElement(obj, "bndbox")
        ET.SubElement(bnd, "xmin").text = str(o.box.xmin + 1)
        ET.SubElement(bnd, "ymin").text = str(o.box.ymin + 1)
        ET.SubElement(bnd, "xmax").text = str(o.box.xmax)
        ET.SubElement(bnd, "ymax").text = str(o.box.ymax)
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

_HEAD_RE = re.compile(r"^(?P<stem>.+)\.att\.h(?P<k>\d+)\.pfm$")


def scan_manifest(directory) -> tuple[list[ManifestEntry], list[tuple[str, str]]]:
    """Group a dataset directory by stem following the naming convention.

    Returns ``(entries, skipped)`` where ``skipped`` lists ``(stem, reason)``
    for stems missing depth or a contiguous run of attention heads. Entries
    are sorted by stem; the result depends only on the set of file names.
    """
    directory = Path(directory)
    heads: dict[str, dict[int, Path]] = {}
    depths: dict[str, Path] = {}
    anns: dict[str, Path] = {}
    pngs: dict[str, Path] = {}
    for p in directory.iterdir():
        if not p.is_file():
            continue
        m = _HEAD_RE.match(p.name)
        if m:
            heads.setdefault(m.group("stem"), {})[int(m.group("k"))] = p
        elif p.name.endswith(".depth.pfm"):
            depths[p.name[: -len(".depth.pfm")]] = p
        elif p.name.endswith(".ann.xml"):
            anns[p.name[: -len(".ann.xml")]] = p
        elif p.suffix == ".png":
            pngs[p.stem] = p

    entries: list[ManifestEntry] = []
    skipped: list[tuple[str, str]] = []
    for stem in sorted(set(heads) | set(depths)):
        ks = heads.get(stem, {})
        if not ks:
            skipped.append((stem, "no attention heads"))
            continue
        if stem not in depths:
            skipped.append((stem, "no depth map"))
            continue
        expected = list(range(len(ks)))
        if sorted(ks) != expected:
            skipped.append((stem, f"attention head indices {sorted(ks)} not contiguous"))
            continue
        entries.append(
            ManifestEntry(
                stem=stem,
                head_paths=[ks[k] for k in expected],
                depth_path=depths[stem],
                ann_path=anns.get(stem),
                png_path=pngs.get(stem),
            )
        )
    return entries, skipped


def load_record(entry: ManifestEntry) -> ImageRecord:
    annotation = None
    if entry.ann_path is not None:
        annotation = parse_voc_xml(entry.ann_path.read_bytes(), stem=entry.stem)
    return ImageRecord(
        stem=entry.stem,
        attention_heads=[read_pfm(p) for p in entry.head_paths],
        depth=read_pfm(entry.depth_path),
        annotation=annotation,
    )


# ---------------------------------------------------------------------------
# Predictions
# ---------------------------------------------------------------------------

def write_predictions(detection_sets: Iterable["DetectionSet"], path) -> None:
    """Write one JSON object per image: {"image", "boxes", "scores"}.

    Boxes are integer half-open pixel coordinates; box order is score
    descending with ties broken by (xmin, ymin). Arrays are index-aligned.
    """
    lines = []
    for ds in detection_sets:
        dets = sorted(
            ds.detections,
            key=lambda d: (-d.score, d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax),
        )
        for d in dets:
            if not (0.0 <= d.score <= 1.0):
                raise ContractError(f"{ds.stem}: score {d.score} outside [0, 1]")
        obj = {
            "image": ds.stem,
            "boxes": [[d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax] for d in dets],
            "scores": [float(d.score) for d in dets],
        }
        lines.append(json.dumps(obj, separators=(", ", ": ")))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_predictions(path) -> list["DetectionSet"]:
    """Parse a predictions file back into DetectionSets (inverse of write_predictions)."""
    from .boxes import Detection, DetectionSet

    out: list[DetectionSet] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise PredictionFormatError(f"{path}:{lineno}: bad JSON: {e}") from None
        if not isinstance(obj.get("image"), str):
            raise PredictionFormatError(f"{path}:{lineno}: missing image stem")
        boxes = obj.get("boxes", [])
        scores = obj.get("scores", [])
        if len(boxes) != len(scores):
            raise PredictionFormatError(
                f"{path}:{lineno}: {len(boxes)} boxes vs {len(scores)} scores"
            )
        dets = [
            Detection(box=Box(*[int(v) for v in b]), score=float(s))
            for b, s in zip(boxes, scores)
        ]
        out.append(DetectionSet(stem=obj["image"], detections=dets))
    return out
