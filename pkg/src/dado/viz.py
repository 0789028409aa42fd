"""Overlay rendering: burn prediction and GT boxes into a PNG per image.

Base image is the stem's PNG when present, otherwise the depth raster
rendered as grayscale. Prediction outlines are score-colored (red at 0
through yellow at 1); ground truth is drawn in a fixed blue.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw

from .attention import normalize_unit
from .boxes import DetectionSet
from .map_store import GroundTruth, ManifestEntry, read_pfm

GT_COLOR = (0, 120, 255)


def score_color(score: float) -> tuple[int, int, int]:
    s = min(max(score, 0.0), 1.0)
    return (255, int(round(255 * s)), 0)


def depth_to_image(depth: np.ndarray) -> Image.Image:
    gray = (normalize_unit(depth) * 255.0).astype(np.uint8)
    return Image.fromarray(gray, mode="L").convert("RGB")


def render_overlay(
    entry: ManifestEntry,
    detections: Optional[DetectionSet],
    gt: Optional[GroundTruth],
    out_path,
) -> Path:
    if entry.png_path is not None and entry.png_path.exists():
        base = Image.open(entry.png_path).convert("RGB")
    else:
        base = depth_to_image(read_pfm(entry.depth_path))
    draw = ImageDraw.Draw(base)
    if gt is not None:
        for obj in gt.objects:
            b = obj.box
            draw.rectangle([b.xmin, b.ymin, b.xmax - 1, b.ymax - 1],
                           outline=GT_COLOR, width=1)
    if detections is not None:
        for det in detections.detections:
            b = det.box
            draw.rectangle([b.xmin, b.ymin, b.xmax - 1, b.ymax - 1],
                           outline=score_color(det.score), width=1)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    base.save(out_path, format="PNG")
    return out_path
