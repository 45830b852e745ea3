"""Depth <-> disparity conversions for pole-on-baseline spherical stereo.

Geometry: two cameras share an orientation and are displaced by the
baseline B along the +y axis of the reference (upper) camera. In the
equirectangular grids of both cameras the row coordinate encodes latitude
from the -y pole,

    L(v) = (v + 0.5) / H * pi,

and a scene point keeps its longitude (column) in both views, so parallax
moves strictly along columns. With the parallax angle rho = disp / H * pi
the triangle (reference camera, second camera, point) has the angle
pi - L at the reference camera and L - rho at the second one, giving

    range = B * sin(L - rho) / sin(rho)            (disparity -> depth)
    disp  = H / pi * atan2(sin L, range / B + cos L)  (depth -> disparity)

which are exact inverses of each other. Depth always means Euclidean range
from the camera center, never planar z. All kernels are pure per-pixel
functions of their inputs; outputs never contain NaN (zero + validity mask
instead).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, GeometryDomainError

__all__ = [
    "EPS_DISP",
    "row_latitudes",
    "DepthMap",
    "DisparityMap",
    "disparity_to_depth",
    "depth_to_disparity",
    "depth_from_disparity",
    "disparity_from_depth",
    "transfer_ranges",
    "depth_between_frames",
]

# Disparities at or below this many pixels are treated as zero parallax
# (unbounded range) and marked invalid: sin(rho) sits in a denominator.
EPS_DISP = 1e-4


def row_latitudes(height: int) -> np.ndarray:
    """Latitude of each pixel row, measured from the -y pole, pixel centers."""
    if height <= 0:
        raise ValueError("height must be positive")
    return (np.arange(height, dtype=np.float64) + 0.5) / height * np.pi


class _MaskedGrid:
    """Shared container logic: 2D float values + validity mask + baseline."""

    _lower_bound_inclusive = False  # subclasses: is value == 0 acceptable?

    def __init__(self, values: np.ndarray, valid: Optional[np.ndarray] = None,
                 baseline_m: Optional[float] = None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("expected a 2D grid of values")
        if valid is None:
            valid = np.isfinite(values) & (
                values >= 0.0 if self._lower_bound_inclusive else values > 0.0)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != values.shape:
                raise DataError("validity mask shape does not match values")
            ok = np.isfinite(values) & (
                values >= 0.0 if self._lower_bound_inclusive else values > 0.0)
            valid = valid & ok
        if baseline_m is not None and not baseline_m > 0.0:
            raise GeometryDomainError(f"baseline must be positive, got {baseline_m}")
        self.values = np.where(valid, values, 0.0)
        self.valid = valid
        self.baseline_m = baseline_m

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def require_baseline(self) -> float:
        if self.baseline_m is None:
            raise GeometryDomainError(
                "operation requires the stereo baseline, but none is attached")
        return self.baseline_m

    def __eq__(self, other) -> bool:
        return (type(self) is type(other)
                and self.baseline_m == other.baseline_m
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.valid, other.valid))


class DepthMap(_MaskedGrid):
    """Euclidean range in meters from the camera center; zero = invalid."""

    _lower_bound_inclusive = False


class DisparityMap(_MaskedGrid):
    """Per-pixel parallax in pixels along the epipolar column; >= 0 valid."""

    _lower_bound_inclusive = True


def disparity_to_depth(disp: DisparityMap) -> DepthMap:
    """Convert a disparity map to Euclidean range.

    Pixels with disparity at or below EPS_DISP, or whose triangle angle
    L - rho is not positive (geometrically impossible parallax), become
    invalid zeros rather than clamped values.
    """
    B = disp.require_baseline()
    H = disp.height
    lat = row_latitudes(H)[:, None]
    rho = disp.values * (np.pi / H)
    gamma = lat - rho
    valid = disp.valid & (disp.values > EPS_DISP) & (gamma > 0.0)
    sin_rho = np.sin(rho)
    safe = np.where(valid, sin_rho, 1.0)
    depth = np.where(valid, B * np.sin(gamma) / safe, 0.0)
    return DepthMap(depth, valid, B)


def depth_to_disparity(depth: DepthMap) -> DisparityMap:
    """Exact inverse of disparity_to_depth on its valid domain."""
    B = depth.require_baseline()
    H = depth.height
    lat = row_latitudes(H)[:, None]
    valid = depth.valid
    ratio = np.where(valid, depth.values, 1.0) / B
    # Two-argument arctan keeps rho on (0, pi) even when ratio + cos L < 0
    # (points below the second camera); sin L >= 0 by construction.
    rho = np.arctan2(np.sin(lat), ratio + np.cos(lat))
    disp = np.where(valid, rho * (H / np.pi), 0.0)
    return DisparityMap(disp, valid, B)


def depth_from_disparity(latitude_rad, disparity_px, baseline_m, height):
    """Scalar/array form of range = B sin(L - rho) / sin(rho).

    Operates on explicit latitudes; the caller is responsible for keeping
    rho = disparity * pi / height inside (0, L).
    """
    rho = np.asarray(disparity_px, dtype=np.float64) * (np.pi / height)
    gamma = np.asarray(latitude_rad, dtype=np.float64) - rho
    return baseline_m * np.sin(gamma) / np.sin(rho)


def disparity_from_depth(latitude_rad, range_m, baseline_m, height):
    """Scalar/array form of disp = H/pi * atan2(sin L, range/B + cos L)."""
    lat = np.asarray(latitude_rad, dtype=np.float64)
    ratio = np.asarray(range_m, dtype=np.float64) / baseline_m
    return np.arctan2(np.sin(lat), ratio + np.cos(lat)) * (height / np.pi)


def transfer_ranges(depth: DepthMap):
    """Re-express reference-view ranges in the second camera's frame.

    For a point at range r and latitude L in the reference view, the second
    camera (displaced by B toward +y, i.e. away from the -y pole) sees it at

        r2 = sqrt(r^2 + B^2 + 2 r B cos L),   cos L2 = (r cos L + B) / r2

    with the longitude (column) unchanged. Returns (range2, latitude2,
    valid) on the reference pixel grid, without resampling.
    """
    B = depth.require_baseline()
    lat = row_latitudes(depth.height)[:, None]
    r = depth.values
    cos_l = np.cos(lat)
    r2sq = r * r + B * B + 2.0 * r * B * cos_l
    r2 = np.sqrt(np.clip(r2sq, 0.0, None))
    valid = depth.valid & (r2 > 0.0)
    safe = np.where(valid, r2, 1.0)
    cos_l2 = np.clip((r * cos_l + B) / safe, -1.0, 1.0)
    lat2 = np.where(valid, np.arccos(cos_l2), 0.0)
    return np.where(valid, r2, 0.0), lat2, valid


def depth_between_frames(depth: DepthMap) -> DepthMap:
    """Resample the reference depth map onto the second camera's grid.

    Each valid pixel's transferred range is splatted onto the second view's
    row nearest its new latitude (same column); conflicts resolve to the
    smaller range, then to the smaller source row, so the result is
    independent of evaluation order. Rows nobody lands on stay invalid.
    """
    r2, lat2, valid = transfer_ranges(depth)
    H, W = depth.values.shape
    v2 = np.rint(lat2 / np.pi * H - 0.5).astype(np.int64)

    src_rows, src_cols = np.nonzero(valid & (v2 >= 0) & (v2 < H))
    out = np.zeros((H, W), dtype=np.float64)
    out_valid = np.zeros((H, W), dtype=bool)
    if src_rows.size == 0:
        return DepthMap(out, out_valid, depth.baseline_m)

    target = v2[src_rows, src_cols] * W + src_cols
    ranges = r2[src_rows, src_cols]
    order = np.lexsort((src_rows, ranges, target))
    target = target[order]
    keep = np.ones(target.size, dtype=bool)
    keep[1:] = target[1:] != target[:-1]
    flat = out.reshape(-1)
    flat[target[keep]] = ranges[order][keep]
    out_valid.reshape(-1)[target[keep]] = True
    return DepthMap(out, out_valid, depth.baseline_m)
