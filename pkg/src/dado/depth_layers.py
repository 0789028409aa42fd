"""Split a depth raster into overlapping foreground layers.

The depth map (normalized nearness, larger = closer) is histogrammed;
prominent histogram peaks mark dominant depth planes. Valleys between
adjacent peaks bound one interval per peak, each interval is expanded by a
configurable overlap fraction, and every interval yields a binary layer
mask. The farthest layers can then be moved aside as background.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import ContractError, as_raster, check_unit_range


@dataclass
class DepthHistogram:
    bin_count: int
    counts: np.ndarray  # integer tallies; smoothing produces float counts
    total: int

    def __post_init__(self):
        if self.bin_count < 2:
            raise ContractError(f"bin_count {self.bin_count} must be >= 2")


@dataclass
class DepthLayer:
    lo: float  # inclusive nearness bounds, post-overlap-expansion
    hi: float
    mask: np.ndarray  # {0, 1}, mask[p] = 1 iff lo <= depth[p] <= hi
    peak_bin: int


@dataclass
class LayerSet:
    layers: list[DepthLayer]  # nearest first
    discarded: list[DepthLayer] = field(default_factory=list)
    depth: np.ndarray | None = None  # the normalized raster the layers were cut from

    @property
    def n(self) -> int:
        return len(self.layers)


def depth_histogram(depth: np.ndarray, bins: int) -> DepthHistogram:
    """Tally normalized depth values into ``bins`` equal bins over [0, 1].

    Value v lands in bin floor(v * bins); v = 1 goes to the last bin.
    """
    arr = as_raster(depth, "depth")
    check_unit_range(arr, "depth")
    if bins < 2:
        raise ContractError(f"bins {bins} must be >= 2")
    idx = np.minimum((arr.astype(np.float64) * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx.ravel(), minlength=bins)
    return DepthHistogram(bin_count=bins, counts=counts, total=int(arr.size))


def smooth_histogram(hist: DepthHistogram, window: int = 3) -> DepthHistogram:
    """Centered moving average; the window is truncated at the edges.

    Applied between tallying and peak search to suppress single-bin noise.
    The pixel total is carried through unchanged so prominence thresholds
    keep their meaning.
    """
    if window < 1 or window % 2 == 0:
        raise ContractError(f"window {window} must be odd and >= 1")
    counts = hist.counts.astype(np.float64)
    half = window // 2
    n = len(counts)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        out[i] = counts[lo:hi].mean()
    return DepthHistogram(bin_count=hist.bin_count, counts=out, total=hist.total)


def _plateau_peaks(counts: np.ndarray) -> list[int]:
    """Leftmost bins of maximal plateaus strictly above both bounding neighbors.

    Runs touching either histogram edge are not peaks.
    """
    n = len(counts)
    peaks = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and counts[j + 1] == counts[i]:
            j += 1
        if i > 0 and j < n - 1 and counts[i - 1] < counts[i] and counts[j + 1] < counts[i]:
            peaks.append(i)
        i = j + 1
    return peaks


def _prominence(counts: np.ndarray, peak: int) -> float:
    """Peak height above the higher of its two bounding valleys.

    Each valley is the minimum encountered while descending from the peak
    until a strictly higher bar or the histogram edge.
    """
    h = counts[peak]
    left = h
    for j in range(peak - 1, -1, -1):
        if counts[j] > h:
            break
        left = min(left, counts[j])
    right = h
    for j in range(peak + 1, len(counts)):
        if counts[j] > h:
            break
        right = min(right, counts[j])
    return float(h - max(left, right))


def find_peaks(hist: DepthHistogram, min_prominence_frac: float) -> list[int]:
    """Bins of peaks whose topographic prominence is at least the given
    fraction of the pixel total; the caller is expected to have smoothed the
    histogram first. Falls back to the single global-maximum bin when no
    peak qualifies. Result is in ascending bin order.
    """
    counts = np.asarray(hist.counts, dtype=np.float64)
    threshold = min_prominence_frac * hist.total
    peaks = [p for p in _plateau_peaks(counts) if _prominence(counts, p) >= threshold]
    if not peaks:
        return [int(np.argmax(counts))]
    return peaks


def _valley_bin(counts: np.ndarray, left_peak: int, right_peak: int) -> int:
    """Deepest bin strictly between two peaks; ties take the middle one."""
    between = counts[left_peak + 1 : right_peak]
    if between.size == 0:
        return right_peak
    lo = between.min()
    tied = np.flatnonzero(between == lo) + left_peak + 1
    return int(tied[len(tied) // 2])


def build_layers(
    depth: np.ndarray,
    hist: DepthHistogram,
    peaks: list[int],
    overlap_frac: float,
) -> LayerSet:
    """One layer per peak, bounded by inter-peak valleys, expanded by overlap.

    The first interval starts at 0 and the last ends at 1, so the layers
    cover every pixel. Valley bins convert to boundary values at their left
    bin edge. Each interval then grows by ``overlap_frac`` of its own width
    on both sides, clamped to [0, 1]. Layers come back nearest-first.
    """
    if not peaks:
        raise ContractError("peaks must be nonempty")
    if not 0.0 <= overlap_frac < 0.5:
        raise ContractError(f"overlap_frac {overlap_frac} outside [0, 0.5)")
    arr = as_raster(depth, "depth")
    counts = np.asarray(hist.counts, dtype=np.float64)
    bins = hist.bin_count
    bounds = [0.0]
    for k in range(len(peaks) - 1):
        v = _valley_bin(counts, peaks[k], peaks[k + 1])
        bounds.append(v / bins)
    bounds.append(1.0)

    layers = []
    for k, peak in enumerate(peaks):
        lo, hi = bounds[k], bounds[k + 1]
        width = hi - lo
        lo = max(0.0, lo - overlap_frac * width)
        hi = min(1.0, hi + overlap_frac * width)
        mask = ((arr >= lo) & (arr <= hi)).astype(np.float32)
        layers.append(DepthLayer(lo=lo, hi=hi, mask=mask, peak_bin=peak))
    layers.sort(key=lambda l: -l.peak_bin)  # nearest (highest bin) first
    return LayerSet(layers=layers, depth=arr)


def discard_background(layerset: LayerSet, n_discard: int) -> LayerSet:
    """Move the ``n_discard`` farthest layers to ``discarded``, keeping at least one."""
    if n_discard < 0:
        raise ContractError(f"n_discard {n_discard} must be >= 0")
    keep = max(1, layerset.n - n_discard)
    return LayerSet(
        layers=layerset.layers[:keep],
        discarded=layerset.discarded + layerset.layers[keep:],
        depth=layerset.depth,
    )


def depth_gradient_consistency(depth: np.ndarray, lam: float = 10.0) -> float:
    """Smoothness score 1 / (1 + lam * mean gradient magnitude), in (0, 1].

    Gradients are central differences with one-sided differences at the
    borders; a constant raster scores exactly 1.
    """
    arr = as_raster(depth, "depth").astype(np.float64)
    h, w = arr.shape
    gy = np.gradient(arr, axis=0, edge_order=1) if h > 1 else np.zeros_like(arr)
    gx = np.gradient(arr, axis=1, edge_order=1) if w > 1 else np.zeros_like(arr)
    g = float(np.sqrt(gx * gx + gy * gy).mean())
    return 1.0 / (1.0 + lam * g)


def layer_depth(
    depth_normalized: np.ndarray,
    bins: int,
    min_prominence_frac: float,
    overlap_frac: float,
    n_discard: int,
) -> LayerSet:
    """Full layering pass: histogram, smooth, peaks, intervals, background."""
    hist = smooth_histogram(depth_histogram(depth_normalized, bins))
    peaks = find_peaks(hist, min_prominence_frac)
    layerset = build_layers(depth_normalized, hist, peaks, overlap_frac)
    return discard_background(layerset, n_discard)
