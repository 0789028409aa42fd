"""Input validation helpers shared across the pipeline.

Rasters are plain numpy arrays: 2-D, float32, row-major, indexed [y, x].
These checks are the single place where that convention is enforced, so
downstream code can assume well-formed inputs.
"""

from __future__ import annotations

import numpy as np


class ContractError(ValueError):
    """An argument violates a documented precondition."""


def as_raster(arr, name: str = "raster") -> np.ndarray:
    """Coerce to a valid 2-D float32 raster, raising ContractError otherwise."""
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ContractError(f"{name} must be at least 1x1, got shape {a.shape}")
    if a.dtype != np.float32:
        a = a.astype(np.float32)
    return a


def check_finite(arr: np.ndarray, name: str = "raster") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ContractError(f"{name} contains a non-finite value at pixel index {bad}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "rasters") -> None:
    if a.shape != b.shape:
        raise ContractError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def check_binary(arr: np.ndarray, name: str = "mask") -> np.ndarray:
    """Require values drawn from {0, 255} (thresholded maps) or {0, 1} (layer masks)."""
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0.0, 1.0))) and not np.all(np.isin(vals, (0.0, 255.0))):
        raise ContractError(f"{name} is not binary; found values {vals[:5]}")
    return arr


def check_unit_range(arr: np.ndarray, name: str = "raster") -> np.ndarray:
    lo, hi = float(arr.min()), float(arr.max())
    if lo < -1e-6 or hi > 1.0 + 1e-6:
        raise ContractError(f"{name} must lie in [0, 1], got range [{lo}, {hi}]")
    return arr
