"""Batch extraction: RGB images -> per-head attention PFMs + depth PFM.

Output naming follows the discovery pipeline's manifest convention
exactly: ``<stem>.att.h<k>.pfm`` for k = 0..H-1 and ``<stem>.depth.pfm``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .backbones import extract_attention, extract_depth
from .pfm import write_pfm


@dataclass
class ExtractionJob:
    image_paths: list[Path]
    out_dir: Path
    backbone: str = "dino-v1-vits16"
    dpt_variant: str = "dpt-hybrid"
    device: str = "cpu"


@dataclass
class ExtractionResult:
    written: list[str] = field(default_factory=list)  # stems fully emitted
    failed: list[tuple[str, str]] = field(default_factory=list)
    head_count: int = 0


def load_rgb(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def extract_image(path, out_dir, backbone, dpt_variant, device="cpu") -> int:
    """Extract one image; returns the number of attention heads written."""
    path = Path(path)
    out_dir = Path(out_dir)
    rgb = load_rgb(path)
    heads = extract_attention(rgb, backbone, device)
    depth = extract_depth(rgb, dpt_variant, device)
    if depth.shape != rgb.shape[:2]:
        raise RuntimeError(f"{path.name}: depth shape {depth.shape} != image {rgb.shape[:2]}")
    for k, head in enumerate(heads):
        if head.shape != rgb.shape[:2]:
            raise RuntimeError(f"{path.name}: head {k} shape {head.shape} != image")
        write_pfm(head, out_dir / f"{path.stem}.att.h{k}.pfm")
    write_pfm(depth, out_dir / f"{path.stem}.depth.pfm")
    return len(heads)


def run_extraction(job: ExtractionJob) -> ExtractionResult:
    result = ExtractionResult()
    job.out_dir.mkdir(parents=True, exist_ok=True)
    for path in sorted(Path(p) for p in job.image_paths):
        try:
            n = extract_image(path, job.out_dir, job.backbone, job.dpt_variant,
                              job.device)
            result.head_count = n
            result.written.append(path.stem)
        except Exception as e:
            result.failed.append((path.stem, f"{type(e).__name__}: {e}"))
    return result
