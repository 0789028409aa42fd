"""Attention-head aggregation, normalization, and the dispersion statistic.

The global attention map is the per-pixel maximum over all CLS attention
heads. Its "sparsity" here is normalized Shannon entropy of the map viewed
as a probability distribution: 0 for a single activated pixel, 1 for a
uniform (maximally dispersed) map. Dispersed attention down-weights the
attention term during fusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import ContractError, as_raster, check_unit_range


@dataclass
class AttentionMap:
    mask: np.ndarray  # normalized to [0, 1]
    sparsity: float

    def __post_init__(self):
        check_unit_range(self.mask, "attention mask")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ContractError(f"sparsity {self.sparsity} outside [0, 1]")


def aggregate_heads(heads: list[np.ndarray]) -> np.ndarray:
    """Pixel-wise maximum across attention heads."""
    if not heads:
        raise ContractError("need at least one attention head")
    out = as_raster(heads[0], "head 0").copy()
    for k, head in enumerate(heads[1:], start=1):
        h = as_raster(head, f"head {k}")
        if h.shape != out.shape:
            raise ContractError(
                f"head {k} has shape {h.shape}, expected {out.shape}"
            )
        np.maximum(out, h, out=out)
    return out


def normalize_unit(raster: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant raster maps to all zeros."""
    arr = as_raster(raster)
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / np.float32(hi - lo)


def resample_bilinear(raster: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample with edge clamping (half-pixel centers).

    Same-size resampling returns the input bit-identically.
    """
    arr = as_raster(raster)
    h, w = arr.shape
    if out_w < 1 or out_h < 1:
        raise ContractError(f"output size {out_w}x{out_h} must be at least 1x1")
    if (out_h, out_w) == (h, w):
        return arr.copy()
    # source coordinate of each output pixel center, clamped to the grid
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[None, :]
    fy = (sy - y0)[:, None]
    top = arr[y0[:, None], x0[None, :]] * (1 - fx) + arr[y0[:, None], x1[None, :]] * fx
    bot = arr[y1[:, None], x0[None, :]] * (1 - fx) + arr[y1[:, None], x1[None, :]] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def attention_sparsity(mask: np.ndarray, method: str = "entropy") -> float:
    """Dispersion of the mask viewed as a distribution, in [0, 1].

    0 means a single activated pixel, 1 means uniform; an all-zero mask is
    maximally uninformative and maps to 1.0. The default is normalized
    Shannon entropy; "hoyer" (1 - Hoyer sparseness) and "gini" (1 - Gini
    coefficient) are alternate readings, kept non-default.
    """
    arr = as_raster(mask, "mask")
    check_unit_range(arr, "mask")
    total = float(arr.sum(dtype=np.float64))
    if total <= 0.0:
        return 1.0
    n = arr.size
    if n == 1:
        return 0.0
    v = arr.astype(np.float64).ravel()
    if method == "entropy":
        p = v / total
        nz = p[p > 0.0]
        entropy = float(-(nz * np.log(nz)).sum())
        return min(max(entropy / np.log(n), 0.0), 1.0)
    if method == "hoyer":
        l2 = float(np.sqrt((v * v).sum()))
        rn = np.sqrt(n)
        hoyer = (rn - total / l2) / (rn - 1.0)
        return min(max(1.0 - hoyer, 0.0), 1.0)
    if method == "gini":
        s = np.sort(v)
        i = np.arange(1, n + 1, dtype=np.float64)
        gini = float(((2.0 * i - n - 1.0) * s).sum()) / (n * total)
        return min(max(1.0 - gini, 0.0), 1.0)
    raise ContractError(f"unknown sparsity method {method!r}")


def build_attention_map(heads: list[np.ndarray], out_w: int, out_h: int) -> AttentionMap:
    """Aggregate heads, normalize, resample to fusion resolution, score sparsity."""
    mask = normalize_unit(aggregate_heads(heads))
    mask = resample_bilinear(mask, out_w, out_h)
    # resampling is a convex combination so [0, 1] is preserved
    return AttentionMap(mask=mask, sparsity=attention_sparsity(mask))
