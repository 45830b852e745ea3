"""PFM ("Pf") reader/writer for single-channel float maps.

The writer always emits little-endian (negative scale line) with the PFM
standard's bottom-up scanline order; the reader accepts either endianness.
Roundtrips are bit-identical. Disparity maps encode invalid pixels as
negative values by convention.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataFormatError
from ._atomic import atomic_write_bytes

__all__ = ["read_pfm", "write_pfm"]


def write_pfm(path, values: np.ndarray) -> None:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("PFM writer expects a single-channel 2D array")
    height, width = arr.shape
    header = b"Pf\n" + f"{width} {height}\n".encode("ascii") + b"-1.0\n"
    atomic_write_bytes(path, header + np.flipud(arr).astype("<f4").tobytes())


def _read_token(handle) -> bytes:
    c = handle.read(1)
    while c and c.isspace():
        c = handle.read(1)
    if not c:
        raise DataFormatError("unexpected end of PFM header", handle.tell())
    token = bytearray()
    while c and not c.isspace():
        token += c
        c = handle.read(1)
    return bytes(token)


def read_pfm(path) -> np.ndarray:
    """Parse a Pf file into a top-down (H, W) float32 array."""
    with open(path, "rb") as handle:
        magic = _read_token(handle)
        if magic == b"PF":
            raise DataFormatError("color PFM (PF) is not supported", 0)
        if magic != b"Pf":
            raise DataFormatError(f"not a PFM file (magic {magic!r})", 0)
        at = handle.tell()
        try:
            width = int(_read_token(handle))
            height = int(_read_token(handle))
        except ValueError:
            raise DataFormatError("malformed PFM dimensions", at) from None
        if width <= 0 or height <= 0:
            raise DataFormatError("PFM dimensions must be positive", at)
        at = handle.tell()
        try:
            scale = float(_read_token(handle))
        except ValueError:
            raise DataFormatError("malformed PFM scale line", at) from None
        if scale == 0.0:
            raise DataFormatError("PFM scale must be nonzero", at)
        dtype = "<f4" if scale < 0 else ">f4"
        expected = width * height * 4
        raw = handle.read(expected)
        if len(raw) != expected:
            raise DataFormatError(
                f"PFM data truncated: expected {expected} bytes, got {len(raw)}",
                handle.tell())
        data = np.frombuffer(raw, dtype=dtype).reshape(height, width)
        return np.flipud(data).astype(np.float32)
