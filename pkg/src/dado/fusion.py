"""Combine the attention map with each depth layer and binarize the result.

Per image, a pair of weights balances the two cues. When attention and
depth agree strongly (their cross-correlation exceeds a threshold) both
weights are pinned to 0.5; otherwise dispersed attention is down-weighted
via 1 / (1 + sparsity) and the depth weight follows the gradient
consistency of the depth map. Each weighted combination is thresholded at
the average of its mean and standard deviation and binarized to {0, 255}.

Note the default product combination makes the binary mask independent of
the weights (the threshold is homogeneous in the map); the weights still
scale the raw map and therefore the downstream box scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionMap
from .depth_layers import DepthLayer, LayerSet, depth_gradient_consistency
from .validation import ContractError, as_raster, check_same_shape

BINARY_ON = 255.0


@dataclass(frozen=True)
class FusionWeights:
    cc: float
    w_a: float
    w_d: float
    gated: bool  # True when the agreement gate pinned both weights to 0.5

    def __post_init__(self):
        if not 0.0 <= self.w_a <= 1.0 or not 0.0 < self.w_d <= 1.0:
            raise ContractError(f"weights out of range: {self}")
        if self.gated and (self.w_a != 0.5 or self.w_d != 0.5):
            raise ContractError(f"gated weights must be (0.5, 0.5): {self}")


@dataclass
class CombinedLayer:
    raw: np.ndarray  # weighted attention-depth map for this layer
    tau: float
    binary: np.ndarray  # {0, 255}
    layer_index: int  # position in the foreground stack, 0 = nearest


def cross_correlation(att: np.ndarray, depth: np.ndarray) -> float:
    """Mean of the element-wise product of two normalized maps."""
    a = as_raster(att, "attention")
    d = as_raster(depth, "depth")
    check_same_shape(a, d, "attention/depth")
    return float(np.mean(a.astype(np.float64) * d.astype(np.float64)))


def compute_weights(
    att: AttentionMap, depth: np.ndarray, cc_threshold: float = 0.5,
    lambda_consistency: float = 10.0,
) -> FusionWeights:
    """Per-image fusion weights from attention sparsity and depth smoothness."""
    if not 0.0 < cc_threshold < 1.0:
        raise ContractError(f"cc_threshold {cc_threshold} outside (0, 1)")
    cc = cross_correlation(att.mask, depth)
    if cc > cc_threshold:
        return FusionWeights(cc=cc, w_a=0.5, w_d=0.5, gated=True)
    w_a = 1.0 / (1.0 + att.sparsity)
    w_d = depth_gradient_consistency(depth, lam=lambda_consistency)
    return FusionWeights(cc=cc, w_a=w_a, w_d=w_d, gated=False)


def combine(
    att: np.ndarray, layer: DepthLayer, w: FusionWeights, mode: str = "product"
) -> np.ndarray:
    """Weighted combination of the attention map with one layer mask.

    product: (w_a * att) element-wise (w_d * mask), i.e. w_a*w_d*att inside
    the layer and 0 outside. sum: clamp(w_a*att + w_d*mask, 0, 1) restricted
    to the layer support.
    """
    a = as_raster(att, "attention")
    mask = as_raster(layer.mask, "layer mask")
    check_same_shape(a, mask, "attention/layer")
    if mode == "product":
        return (np.float32(w.w_a) * a) * (np.float32(w.w_d) * mask)
    if mode == "sum":
        blended = np.clip(np.float32(w.w_a) * a + np.float32(w.w_d) * mask, 0.0, 1.0)
        return np.where(mask > 0, blended, np.float32(0.0)).astype(np.float32)
    raise ContractError(f"unknown combine mode {mode!r}")


def adaptive_threshold(combined: np.ndarray, support: np.ndarray | None = None) -> float:
    """Average of the map's mean and population standard deviation.

    Statistics run over every pixel, zeros outside the layer included; pass
    ``support`` to restrict them to the layer (sensitivity studies only).
    """
    arr = as_raster(combined, "combined").astype(np.float64)
    if support is not None:
        values = arr[np.asarray(support) > 0]
        if values.size == 0:
            return 0.0
    else:
        values = arr.ravel()
    return float((values.mean() + values.std()) / 2.0)


def binarize(combined: np.ndarray, tau: float) -> np.ndarray:
    """255 where the map strictly exceeds tau, else 0; ties are masked out."""
    arr = as_raster(combined, "combined")
    return np.where(arr > tau, np.float32(BINARY_ON), np.float32(0.0))


def fuse_image(
    att: AttentionMap,
    layers: LayerSet,
    mode: str = "product",
    cc_threshold: float = 0.5,
    lambda_consistency: float = 10.0,
    tau_on_support: bool = False,
    weights: FusionWeights | None = None,
) -> tuple[list[CombinedLayer], FusionWeights]:
    """Fuse the attention map with every foreground layer of one image.

    ``layers.depth`` must hold the normalized depth raster (used for the
    weight computation unless ``weights`` is given). Returns one
    CombinedLayer per foreground layer, nearest first, plus the weights.
    """
    if weights is None:
        if layers.depth is None:
            raise ContractError("LayerSet.depth required to compute fusion weights")
        weights = compute_weights(
            att, layers.depth, cc_threshold=cc_threshold,
            lambda_consistency=lambda_consistency,
        )
    combined_layers = []
    for i, layer in enumerate(layers.layers):
        raw = combine(att.mask, layer, weights, mode=mode)
        tau = adaptive_threshold(raw, support=layer.mask if tau_on_support else None)
        combined_layers.append(
            CombinedLayer(raw=raw, tau=tau, binary=binarize(raw, tau), layer_index=i)
        )
    return combined_layers, weights
