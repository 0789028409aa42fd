"""Binary-map cleanup, connected components, box scoring, and Soft-NMS.

Per fused layer the binary map is cleaned morphologically (closing to heal
holes, then opening to drop speckle), 8-connected components above an area
floor become candidate boxes, and each box is scored by the mean of the
pre-binarization map over its component pixels (so the fusion weights
influence rankings). Candidates from all layers of an image are pooled and
refined with Gaussian Soft-NMS.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp

import numpy as np
from scipy import ndimage

from .fusion import CombinedLayer
from .map_store import Box
from .validation import ContractError, as_raster

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass
class Detection:
    box: Box
    score: float
    layer_index: int = 0
    component_area: int = 0


@dataclass
class DetectionSet:
    stem: str
    detections: list[Detection] = field(default_factory=list)

    def sort(self) -> "DetectionSet":
        self.detections.sort(
            key=lambda d: (-d.score, d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax)
        )
        return self


def _closing(arr, size):
    dilated = ndimage.maximum_filter(arr, size=size, mode="nearest")
    return ndimage.minimum_filter(dilated, size=size, mode="nearest")


def _opening(arr, size):
    eroded = ndimage.minimum_filter(arr, size=size, mode="nearest")
    return ndimage.maximum_filter(eroded, size=size, mode="nearest")


def morph_clean(binary: np.ndarray, kernel: int = 3, order: str = "close-open") -> np.ndarray:
    """Closing then opening (default) with a square structuring element.

    Closing first heals holes inside objects before opening removes
    speckle; pass order="open-close" to flip that. Filters truncate their
    window at the image border (no padding values leak in), so solid
    regions touching the border survive. kernel=1 is the identity.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ContractError(f"kernel {kernel} must be odd and >= 1")
    if order not in ("close-open", "open-close"):
        raise ContractError(f"unknown morphology order {order!r}")
    arr = as_raster(binary, "binary")
    if kernel == 1:
        return arr.copy()
    size = (kernel, kernel)
    if order == "close-open":
        return _opening(_closing(arr, size), size)
    return _closing(_opening(arr, size), size)


def connected_components(
    binary: np.ndarray, min_area_frac: float = 0.0
) -> list[tuple[Box, np.ndarray]]:
    """8-connected foreground components with their tight boxes and masks.

    Components smaller than ``min_area_frac`` of the raster are dropped.
    Results are ordered by (ymin, xmin).
    """
    arr = as_raster(binary, "binary")
    labels, n = ndimage.label(arr > 0, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []
    min_area = min_area_frac * arr.size
    out = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        mask = labels[sl] == idx
        if mask.sum() < min_area:
            continue
        box = Box(xmin=sl[1].start, ymin=sl[0].start, xmax=sl[1].stop, ymax=sl[0].stop)
        full = np.zeros(arr.shape, dtype=bool)
        full[sl] = mask
        out.append((box, full))
    out.sort(key=lambda bm: (bm[0].ymin, bm[0].xmin, bm[0].ymax, bm[0].xmax))
    return out


def score_box(raw: np.ndarray, component_mask: np.ndarray) -> float:
    """Mean of the raw (pre-binarization) map over the component pixels."""
    arr = as_raster(raw, "raw")
    mask = np.asarray(component_mask, dtype=bool)
    if mask.shape != arr.shape:
        raise ContractError(f"mask shape {mask.shape} != raster shape {arr.shape}")
    if not mask.any():
        raise ContractError("empty component mask")
    return float(arr.astype(np.float64)[mask].mean())


def iou(a: Box, b: Box) -> float:
    """Intersection over union on half-open pixel areas; disjoint boxes give 0."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def soft_nms(
    dets: DetectionSet, sigma: float = 0.5, score_floor: float = 0.001
) -> DetectionSet:
    """Gaussian Soft-NMS: decay overlapping scores instead of deleting boxes.

    Repeatedly selects the highest-scoring remaining detection and scales
    every other remaining score by exp(-iou^2 / sigma); detections whose
    score falls below ``score_floor`` are removed. The top-1 detection is
    never altered.
    """
    if sigma <= 0:
        raise ContractError(f"sigma {sigma} must be > 0")
    if score_floor < 0:
        raise ContractError(f"score_floor {score_floor} must be >= 0")
    remaining = [
        Detection(d.box, d.score, d.layer_index, d.component_area)
        for d in dets.detections
    ]
    kept: list[Detection] = []
    while remaining:
        best = max(range(len(remaining)), key=lambda i: remaining[i].score)
        pick = remaining.pop(best)
        kept.append(pick)
        survivors = []
        for d in remaining:
            d.score *= exp(-(iou(pick.box, d.box) ** 2) / sigma)
            if d.score >= score_floor:
                survivors.append(d)
        remaining = survivors
    return DetectionSet(stem=dets.stem, detections=kept).sort()


def extract_detections(
    combined_layers: list[CombinedLayer],
    stem: str = "",
    kernel: int = 3,
    min_area_frac: float = 0.001,
    nms_sigma: float = 0.5,
    score_floor: float = 0.001,
) -> DetectionSet:
    """Boxes for one image: clean, label, and score each layer, then Soft-NMS."""
    pooled = DetectionSet(stem=stem)
    for cl in combined_layers:
        cleaned = morph_clean(cl.binary, kernel=kernel)
        for box, mask in connected_components(cleaned, min_area_frac=min_area_frac):
            pooled.detections.append(
                Detection(
                    box=box,
                    score=score_box(cl.raw, mask),
                    layer_index=cl.layer_index,
                    component_area=int(mask.sum()),
                )
            )
    pooled.sort()
    return soft_nms(pooled, sigma=nms_sigma, score_floor=score_floor)
