"""16-bit millimeter-quantized depth PNGs.

Pixel value = round(range * 1000) in millimeters; 0 encodes invalid. Ranges
beyond 65.535 m clamp to 65535 and the writer reports the overflow so the
sample record can carry a flag. Valid ranges below half a millimeter
quantize to 0 and therefore read back as invalid; that is the documented
limit of the format, not an error.
"""

from __future__ import annotations

import io
from typing import Optional

import numpy as np
from PIL import Image

from ..errors import DataError
from ..spherical_stereo import DepthMap
from ._atomic import atomic_write_bytes

__all__ = ["read_depth_png", "write_depth_png", "MAX_DEPTH_MM"]

MAX_DEPTH_MM = 65535


def write_depth_png(path, depth: DepthMap) -> bool:
    """Write the map; returns True when any valid pixel overflowed the clamp."""
    mm = np.rint(depth.values * 1000.0)
    overflow = bool(np.any(depth.valid & (mm > MAX_DEPTH_MM)))
    mm = np.where(depth.valid, np.clip(mm, 0, MAX_DEPTH_MM), 0).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(mm).save(buf, format="PNG")  # uint16 -> 16-bit gray
    atomic_write_bytes(path, buf.getvalue())
    return overflow


def read_depth_png(path, baseline_m: Optional[float] = None) -> DepthMap:
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
        raise DataError(f"{path} is not a single-channel integer PNG")
    values = arr.astype(np.float64) / 1000.0
    return DepthMap(values, arr > 0, baseline_m)
