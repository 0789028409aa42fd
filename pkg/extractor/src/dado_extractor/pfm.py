"""Grayscale PFM output, matching the discovery pipeline's interchange format.

The PFM directory is the entire contract with the consumer; this module is
deliberately self-contained so the extractor has no runtime dependency on
the pipeline package. Format: "Pf" magic, "<width> <height>", scale "-1.0"
(little-endian), then little-endian float32 rows bottom-to-top.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pfm(raster: np.ndarray, path) -> None:
    arr = np.asarray(raster, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"raster must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("raster contains non-finite values")
    height, width = arr.shape
    with open(Path(path), "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{width} {height}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.flipud(arr).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Reader used only by the extractor's own tests."""
    with open(Path(path), "rb") as f:
        if f.readline().strip() != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM")
        width, height = (int(t) for t in f.readline().split())
        scale = float(f.readline())
        endian = "<" if scale < 0 else ">"
        data = np.frombuffer(f.read(4 * width * height), dtype=f"{endian}f4")
    return np.flipud(data.reshape(height, width)).astype(np.float32)
