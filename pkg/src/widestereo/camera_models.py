"""Double Sphere and pinhole camera models as pure per-point functions.

Points are (..., 3) arrays in the camera frame (x right, y down, z forward
along the optical axis); pixels are (..., 2) arrays of (u, v) with the
center of pixel (row i, column j) at coordinates u = j, v = i. Every
projection function returns a (values, valid) pair: entries outside the
model's domain are zeroed, never NaN, and `valid` is the sole carrier of
domain information. Projected pixels may fall outside image bounds; callers
decide clipping.

The double-sphere model projects a point onto two unit spheres offset by xi
along the optical axis, then through a generalized pinhole whose plane is
blended by alpha. It admits a closed-form inverse, which is what makes it
usable as the resampling kernel of the warping pipeline.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import DataError, GeometryDomainError
from .geometry import normalize

__all__ = [
    "DoubleSphereIntrinsics",
    "PinholeIntrinsics",
    "intrinsics_from_dict",
    "ds_project",
    "ds_unproject",
    "pinhole_project",
    "pinhole_unproject",
]


@dataclass(frozen=True)
class DoubleSphereIntrinsics:
    """Six-parameter double-sphere camera: fx, fy, cx, cy, xi, alpha.

    xi is the offset between the two unit spheres along the optical axis;
    alpha in [0, 1] blends between the second sphere and the pinhole plane.
    width/height describe the sensor the parameters were calibrated for.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    xi: float
    alpha: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": "double_sphere",
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "xi": self.xi,
            "alpha": self.alpha,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DoubleSphereIntrinsics":
        if d.get("model") != "double_sphere":
            raise DataError(f"expected a double_sphere camera block, got {d.get('model')!r}")
        try:
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                xi=float(d["xi"]),
                alpha=float(d["alpha"]),
                width=int(d["width"]),
                height=int(d["height"]),
            )
        except KeyError as exc:
            raise DataError(f"camera block missing field {exc}") from exc


@dataclass(frozen=True)
class PinholeIntrinsics:
    """Standard perspective camera, effective for narrow fields of view."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @classmethod
    def from_fov(cls, fov_deg: float, width: int, height: int) -> "PinholeIntrinsics":
        """Square-pixel camera whose horizontal FOV spans the image width.

        The image spans [-0.5, width - 0.5] in pixel units (centers at
        integers), so a 90 degree camera of size F x F gets fx = F / 2.
        """
        if not 0 < fov_deg < 180:
            raise ValueError("pinhole FOV must lie in (0, 180) degrees")
        f = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
        return cls(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                   width=width, height=height)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": "pinhole",
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PinholeIntrinsics":
        if d.get("model") != "pinhole":
            raise DataError(f"expected a pinhole camera block, got {d.get('model')!r}")
        try:
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                width=int(d["width"]),
                height=int(d["height"]),
            )
        except KeyError as exc:
            raise DataError(f"camera block missing field {exc}") from exc


def intrinsics_from_dict(d: Mapping[str, Any]):
    """Dispatch a serialized camera block to the right intrinsics type."""
    model = d.get("model")
    if model == "double_sphere":
        return DoubleSphereIntrinsics.from_dict(d)
    if model == "pinhole":
        return PinholeIntrinsics.from_dict(d)
    raise DataError(f"unknown camera model {model!r}")


def _ds_w2(alpha: float, xi: float) -> float:
    # Constant of the validity half-space z > -w2 * d1. w1 switches branch at
    # alpha = 0.5, where both expressions equal 1 (the condition is continuous).
    w1 = alpha / (1.0 - alpha) if alpha <= 0.5 else (1.0 - alpha) / alpha
    arg = 2.0 * w1 * xi + xi * xi + 1.0
    if arg <= 0.0:
        raise GeometryDomainError(
            f"double-sphere domain constant undefined for alpha={alpha}, xi={xi}")
    return (w1 + xi) / math.sqrt(arg)


def ds_project(points: np.ndarray, K: DoubleSphereIntrinsics):
    """Project camera-frame points through the double-sphere model.

    Returns (uv, valid) where uv has shape points.shape[:-1] + (2,). A point
    is valid when the blended denominator is positive and it lies in front of
    the model's validity half-space (z > -w2 * |p|).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != 3:
        raise ValueError("points must have shape (..., 3)")
    if not np.all(np.isfinite(points)):
        raise GeometryDomainError("points must be finite")

    x = points[..., 0]
    y = points[..., 1]
    z = points[..., 2]
    d1 = np.sqrt(x * x + y * y + z * z)
    if np.any(d1 == 0.0):
        raise GeometryDomainError("cannot project a zero-length point")

    zeta = K.xi * d1 + z
    d2 = np.sqrt(x * x + y * y + zeta * zeta)
    denom = K.alpha * d2 + (1.0 - K.alpha) * zeta
    valid = (z > -_ds_w2(K.alpha, K.xi) * d1) & (denom > 0.0)

    safe = np.where(valid, denom, 1.0)
    uv = np.stack((K.fx * x / safe + K.cx, K.fy * y / safe + K.cy), axis=-1)
    uv[~valid] = 0.0
    return uv, valid


def ds_unproject(pixels: np.ndarray, K: DoubleSphereIntrinsics):
    """Closed-form inverse of ds_project.

    Returns (rays, valid); rays are unit directions in the camera frame.
    Pixels beyond r^2 = 1 / (2 alpha - 1) (for alpha > 0.5) have no preimage
    and come back invalid with a zero direction.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape[-1] != 2:
        raise ValueError("pixels must have shape (..., 2)")

    mx = (pixels[..., 0] - K.cx) / K.fx
    my = (pixels[..., 1] - K.cy) / K.fy
    r2 = mx * mx + my * my

    valid = np.isfinite(r2)
    if K.alpha > 0.5:
        valid &= r2 <= 1.0 / (2.0 * K.alpha - 1.0)

    inner = 1.0 - (2.0 * K.alpha - 1.0) * r2
    sq = np.sqrt(np.clip(inner, 0.0, None))
    den = K.alpha * sq + (1.0 - K.alpha)
    valid &= den > 0.0
    mz = (1.0 - K.alpha * K.alpha * r2) / np.where(den > 0.0, den, 1.0)

    inner2 = mz * mz + (1.0 - K.xi * K.xi) * r2
    valid &= inner2 >= 0.0
    # mz^2 + r2 vanishes only at r2 = 0, where mz = 1; the divisor is safe.
    scale = (mz * K.xi + np.sqrt(np.clip(inner2, 0.0, None))) / (mz * mz + r2)

    rays = scale[..., None] * np.stack((mx, my, mz), axis=-1)
    rays[..., 2] -= K.xi
    rays = normalize(rays)
    # The disc boundary maps onto the projection validity cut in exact
    # arithmetic; enforce the cut on the result so every recovered ray is
    # guaranteed to re-project (round-off can strand rim rays otherwise).
    valid &= rays[..., 2] > -_ds_w2(K.alpha, K.xi)
    rays[~valid] = 0.0
    return rays, valid


def pinhole_project(points: np.ndarray, K: PinholeIntrinsics):
    """Perspective projection; valid for z > 0."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != 3:
        raise ValueError("points must have shape (..., 3)")
    if not np.all(np.isfinite(points)):
        raise GeometryDomainError("points must be finite")

    z = points[..., 2]
    valid = z > 0.0
    safe = np.where(valid, z, 1.0)
    uv = np.stack(
        (K.fx * points[..., 0] / safe + K.cx, K.fy * points[..., 1] / safe + K.cy),
        axis=-1,
    )
    uv[~valid] = 0.0
    return uv, valid


def pinhole_unproject(pixels: np.ndarray, K: PinholeIntrinsics):
    """Unit rays through the given pixels; every pixel has one."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape[-1] != 2:
        raise ValueError("pixels must have shape (..., 2)")
    mx = (pixels[..., 0] - K.cx) / K.fx
    my = (pixels[..., 1] - K.cy) / K.fy
    rays = normalize(np.stack((mx, my, np.ones_like(mx)), axis=-1))
    return rays, np.ones(rays.shape[:-1], dtype=bool)
