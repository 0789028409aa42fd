"""Per-image orchestration of the full discovery pipeline.

Order of operations per image: normalize depth, aggregate + normalize +
resample attention to depth resolution, cut depth layers, fuse attention
with each layer, then extract and refine boxes. Everything is pure given
(record, config), so images can be processed concurrently.
"""

from __future__ import annotations

from .attention import build_attention_map, normalize_unit
from .boxes import DetectionSet, extract_detections
from .config import Config
from .depth_layers import layer_depth
from .fusion import fuse_image
from .map_store import ImageRecord


def discover_record(record: ImageRecord, config: Config | None = None) -> DetectionSet:
    """Run the whole pipeline on one image record."""
    cfg = config or Config()
    depth_n = normalize_unit(record.depth)
    h, w = depth_n.shape
    att = build_attention_map(record.attention_heads, out_w=w, out_h=h)
    layers = layer_depth(
        depth_n,
        bins=cfg.bins,
        min_prominence_frac=cfg.min_prominence_frac,
        overlap_frac=cfg.overlap_frac,
        n_discard=cfg.n_discard,
    )
    combined, _weights = fuse_image(
        att,
        layers,
        mode=cfg.combine_mode,
        cc_threshold=cfg.cc_threshold,
        lambda_consistency=cfg.lambda_consistency,
        tau_on_support=cfg.tau_on_support,
    )
    return extract_detections(
        combined,
        stem=record.stem,
        kernel=cfg.kernel,
        min_area_frac=cfg.min_area_frac,
        nms_sigma=cfg.nms_sigma,
        score_floor=cfg.score_floor,
    )
