"""Attention and depth backends.

Model-backed extraction uses pretrained weights from the Hugging Face hub:
DINO ViT-S/16 (default; its attention maps track object structure more
faithfully than DINOv2's, whose registers absorb attention), DINOv2 with
and without registers for ablation parity, and DPT for inverse depth.
torch/transformers are imported lazily so the package works without them.

The "fixture" backbones derive smooth procedural rasters from the image
pixels alone: deterministic, dependency-free, and byte-stable across runs.
They exist to exercise the file contract (naming, shapes, endianness)
where pretrained weights are unavailable; they are not the method.
"""

from __future__ import annotations

import numpy as np

ATTENTION_BACKBONES = ("dino-v1-vits16", "dino-v2", "dino-v2-registers", "fixture")
DEPTH_BACKBONES = ("dpt-hybrid", "dpt-large", "fixture")

_HF_ATTENTION = {
    "dino-v1-vits16": "facebook/dino-vits16",
    "dino-v2": "facebook/dinov2-small",
    "dino-v2-registers": "facebook/dinov2-with-registers-small",
}
_HF_DEPTH = {
    "dpt-hybrid": "Intel/dpt-hybrid-midas",
    "dpt-large": "Intel/dpt-large",
}

FIXTURE_HEAD_COUNT = 6


class WeightsUnavailable(RuntimeError):
    pass


def _load_hub_model(loader, name: str):
    try:
        return loader(name)
    except Exception as e:
        raise WeightsUnavailable(
            f"could not load pretrained weights for {name!r}: {e}. "
            f"Check network access or a local HF_HOME cache; for offline "
            f"interface testing use --backbone fixture / --dpt fixture."
        ) from e


def _box_smooth(arr: np.ndarray, radius: int) -> np.ndarray:
    """Separable box filter with edge clamping (pure numpy)."""
    if radius < 1:
        return arr
    pad = np.pad(arr, radius, mode="edge")
    k = 2 * radius + 1
    csum = np.cumsum(pad, axis=0)
    vert = (csum[k - 1:, :] - np.vstack([np.zeros((1, pad.shape[1])), csum[:-k, :]])) / k
    csum = np.cumsum(vert, axis=1)
    out = (csum[:, k - 1:] - np.hstack([np.zeros((csum.shape[0], 1)), csum[:, :-k]])) / k
    return out


def _normalize(arr: np.ndarray) -> np.ndarray:
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        return np.zeros_like(arr, dtype=np.float64)
    return (arr - lo) / (hi - lo)


def fixture_attention(rgb: np.ndarray) -> list[np.ndarray]:
    """Six smooth pseudo-attention heads computed from image statistics.

    Head k highlights pixels whose intensity is close to the k-th of six
    evenly spaced gray levels, smoothed; purely a function of the pixels.
    """
    gray = _normalize(rgb.astype(np.float64).mean(axis=2))
    smooth = _box_smooth(gray, radius=max(2, min(gray.shape) // 32))
    heads = []
    for k in range(FIXTURE_HEAD_COUNT):
        center = (k + 0.5) / FIXTURE_HEAD_COUNT
        response = np.exp(-((smooth - center) ** 2) / (2 * 0.12 ** 2))
        heads.append(_normalize(response).astype(np.float32))
    return heads


def fixture_depth(rgb: np.ndarray) -> np.ndarray:
    """Smooth pseudo-inverse-depth: brighter and more central reads nearer."""
    gray = _normalize(rgb.astype(np.float64).mean(axis=2))
    h, w = gray.shape
    ys = np.linspace(-1.0, 1.0, h)[:, None]
    xs = np.linspace(-1.0, 1.0, w)[None, :]
    vignette = 1.0 - 0.5 * np.sqrt(ys * ys + xs * xs) / np.sqrt(2.0)
    depth = _box_smooth(0.6 * gray + 0.4 * vignette, radius=max(2, min(h, w) // 24))
    return depth.astype(np.float32)


def dino_attention(rgb: np.ndarray, backbone: str, device: str = "cpu") -> list[np.ndarray]:
    """Last-block CLS-to-patch attention per head, upsampled to image size."""
    import torch
    from transformers import AutoImageProcessor, AutoModel

    name = _HF_ATTENTION[backbone]
    processor = _load_hub_model(AutoImageProcessor.from_pretrained, name)
    model = _load_hub_model(AutoModel.from_pretrained, name).to(device).eval()

    h, w = rgb.shape[:2]
    inputs = processor(images=rgb, return_tensors="pt").to(device)
    with torch.no_grad():
        out = model(**inputs, output_attentions=True)
    att = out.attentions[-1][0]  # (heads, tokens, tokens)
    n_special = 1  # CLS
    if "registers" in backbone:
        n_special += getattr(model.config, "num_register_tokens", 4)
    cls_to_patch = att[:, 0, n_special:]
    n_patches = cls_to_patch.shape[-1]
    patch = model.config.patch_size
    grid_h = inputs["pixel_values"].shape[-2] // patch
    grid_w = inputs["pixel_values"].shape[-1] // patch
    if grid_h * grid_w != n_patches:
        raise RuntimeError(
            f"{backbone}: got {n_patches} patch tokens for a {grid_h}x{grid_w} grid"
        )
    maps = cls_to_patch.reshape(-1, 1, grid_h, grid_w)
    maps = torch.nn.functional.interpolate(
        maps, size=(h, w), mode="bilinear", align_corners=False
    )[:, 0]
    return [m.cpu().numpy().astype(np.float32) for m in maps]


def dpt_depth(rgb: np.ndarray, variant: str, device: str = "cpu") -> np.ndarray:
    """DPT inverse depth (larger = nearer), resized to image resolution, raw."""
    import torch
    from transformers import AutoImageProcessor, DPTForDepthEstimation

    name = _HF_DEPTH[variant]
    processor = _load_hub_model(AutoImageProcessor.from_pretrained, name)
    model = _load_hub_model(DPTForDepthEstimation.from_pretrained, name).to(device).eval()

    h, w = rgb.shape[:2]
    inputs = processor(images=rgb, return_tensors="pt").to(device)
    with torch.no_grad():
        out = model(**inputs)
    depth = out.predicted_depth[:, None]
    depth = torch.nn.functional.interpolate(
        depth, size=(h, w), mode="bilinear", align_corners=False
    )[0, 0]
    return depth.cpu().numpy().astype(np.float32)


def extract_attention(rgb: np.ndarray, backbone: str, device: str = "cpu") -> list[np.ndarray]:
    if backbone == "fixture":
        return fixture_attention(rgb)
    if backbone not in _HF_ATTENTION:
        raise ValueError(f"unknown attention backbone {backbone!r}; "
                         f"choose from {ATTENTION_BACKBONES}")
    return dino_attention(rgb, backbone, device)


def extract_depth(rgb: np.ndarray, variant: str, device: str = "cpu") -> np.ndarray:
    if variant == "fixture":
        return fixture_depth(rgb)
    if variant not in _HF_DEPTH:
        raise ValueError(f"unknown depth backbone {variant!r}; "
                         f"choose from {DEPTH_BACKBONES}")
    return dpt_depth(rgb, variant, device)
