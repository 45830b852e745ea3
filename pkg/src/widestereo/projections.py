"""Ray-grid generation and resampling-based warping between projections.

A ProjectionSpec fixes how a pixel grid samples the sphere (or the
perspective plane). `make_ray_grid` yields per-pixel unit directions in the
projection's own frame; `spec.orientation` rotates that frame into the
shared camera/world frame. `warp` composes the two: target pixels are turned
into rays, carried into the source camera, projected, and sampled.

Frame conventions (shared with `camera_models`): x right, y down, z forward.
For equirectangular grids latitude runs top-to-bottom with the pole at the
top of the image pointing along -y, so a stereo baseline along +y turns
epipolar curves into image columns. The Cassini grid is the same mapping
with the pixel axes transposed (pole along -x), the horizontal-pair
analogue.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .camera_models import (
    DoubleSphereIntrinsics,
    PinholeIntrinsics,
    ds_project,
    ds_unproject,
    pinhole_project,
    pinhole_unproject,
)
from .errors import ConfigError, DataError
from .geometry import is_rotation, rotation_about_x, rotation_about_y

__all__ = [
    "PROJECTION_KINDS",
    "CUBE_FACE_ORDER",
    "ProjectionSpec",
    "RayGrid",
    "make_ray_grid",
    "project_to_pixels",
    "sample_image",
    "warp",
    "CropRotateRecord",
    "crop_and_rotate_for_stereo",
    "undo_crop_and_rotate",
    "cubemap_assemble",
    "cubemap_split",
]

PROJECTION_KINDS = ("equirectangular", "pinhole", "cubemap", "cassini", "ds_fisheye")

# Cube faces in fixed order; each entry is (name, rotation face->projection
# frame, (cell column, cell row) in the 4x3 horizontal cross). The middle row
# of the cross reads -x, +z, +x, -z; -y (up) sits above +z, +y (down) below.
CUBE_FACE_ORDER = ("+x", "-x", "+y", "-y", "+z", "-z")
_CUBE_FACES = (
    ("+x", rotation_about_y(np.pi / 2), (2, 1)),
    ("-x", rotation_about_y(-np.pi / 2), (0, 1)),
    ("+y", rotation_about_x(-np.pi / 2), (1, 2)),
    ("-y", rotation_about_x(np.pi / 2), (1, 0)),
    ("+z", np.eye(3), (1, 1)),
    ("-z", rotation_about_y(np.pi), (3, 1)),
)


@dataclass(frozen=True, eq=False)
class ProjectionSpec:
    """Target projection: kind, pixel grid, and orientation.

    `orientation` rotates projection-frame directions into the camera/world
    frame. Kind-specific parameters: `pinhole` / `ds` intrinsics for the
    camera kinds, `face_size` for cubemaps.
    """

    kind: str
    width: int
    height: int
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    pinhole: Optional[PinholeIntrinsics] = None
    ds: Optional[DoubleSphereIntrinsics] = None
    face_size: Optional[int] = None

    def __post_init__(self):
        if self.kind not in PROJECTION_KINDS:
            raise ConfigError(f"unsupported projection kind {self.kind!r}")
        object.__setattr__(self, "orientation",
                           np.asarray(self.orientation, dtype=np.float64))
        if not is_rotation(self.orientation):
            raise ConfigError("orientation must be a rotation matrix (det +1)")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("projection dimensions must be positive")
        if self.kind == "equirectangular" and self.width != 2 * self.height:
            raise ConfigError("equirectangular projection requires width = 2 * height")
        if self.kind == "cassini" and self.height != 2 * self.width:
            raise ConfigError("cassini projection requires height = 2 * width")
        if self.kind == "pinhole":
            if self.pinhole is None:
                raise ConfigError("pinhole projection requires pinhole intrinsics")
            if (self.width, self.height) != (self.pinhole.width, self.pinhole.height):
                raise ConfigError("projection size must match pinhole intrinsics")
        if self.kind == "ds_fisheye":
            if self.ds is None:
                raise ConfigError("ds_fisheye projection requires double-sphere intrinsics")
            if (self.width, self.height) != (self.ds.width, self.ds.height):
                raise ConfigError("projection size must match double-sphere intrinsics")
        if self.kind == "cubemap":
            if not self.face_size or self.face_size <= 0:
                raise ConfigError("cubemap projection requires a positive face_size")
            if (self.width, self.height) != (4 * self.face_size, 3 * self.face_size):
                raise ConfigError("cubemap cross layout is 4F wide by 3F tall")

    # -- constructors ------------------------------------------------------

    @classmethod
    def equirectangular(cls, height: int, orientation=None) -> "ProjectionSpec":
        return cls("equirectangular", 2 * height, height,
                   np.eye(3) if orientation is None else orientation)

    @classmethod
    def cassini(cls, width: int, orientation=None) -> "ProjectionSpec":
        return cls("cassini", width, 2 * width,
                   np.eye(3) if orientation is None else orientation)

    @classmethod
    def for_pinhole(cls, K: PinholeIntrinsics, orientation=None) -> "ProjectionSpec":
        return cls("pinhole", K.width, K.height,
                   np.eye(3) if orientation is None else orientation, pinhole=K)

    @classmethod
    def for_ds(cls, K: DoubleSphereIntrinsics, orientation=None) -> "ProjectionSpec":
        return cls("ds_fisheye", K.width, K.height,
                   np.eye(3) if orientation is None else orientation, ds=K)

    @classmethod
    def cubemap(cls, face_size: int, orientation=None) -> "ProjectionSpec":
        return cls("cubemap", 4 * face_size, 3 * face_size,
                   np.eye(3) if orientation is None else orientation,
                   face_size=face_size)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "kind": self.kind,
            "width": self.width,
            "height": self.height,
            "orientation": self.orientation.tolist(),
        }
        if self.pinhole is not None:
            d["pinhole"] = self.pinhole.to_dict()
        if self.ds is not None:
            d["ds"] = self.ds.to_dict()
        if self.face_size is not None:
            d["face_size"] = self.face_size
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ProjectionSpec":
        try:
            kind = d["kind"]
            width = int(d["width"])
            height = int(d["height"])
        except KeyError as exc:
            raise DataError(f"projection spec missing field {exc}") from exc
        orientation = np.asarray(d.get("orientation", np.eye(3)), dtype=np.float64)
        pin = PinholeIntrinsics.from_dict(d["pinhole"]) if "pinhole" in d else None
        ds = DoubleSphereIntrinsics.from_dict(d["ds"]) if "ds" in d else None
        face = int(d["face_size"]) if "face_size" in d else None
        return cls(kind, width, height, orientation, pinhole=pin, ds=ds, face_size=face)


@dataclass
class RayGrid:
    """Per-pixel unit directions (H, W, 3) in the projection frame."""

    directions: np.ndarray
    valid: np.ndarray

    def camera_directions(self, spec: ProjectionSpec) -> np.ndarray:
        """Directions rotated into the camera/world frame by spec.orientation."""
        return self.directions @ spec.orientation.T


def _pixel_grid(width: int, height: int) -> np.ndarray:
    u, v = np.meshgrid(np.arange(width, dtype=np.float64),
                       np.arange(height, dtype=np.float64))
    return np.stack((u, v), axis=-1)


def make_ray_grid(spec: ProjectionSpec) -> RayGrid:
    """One unit direction per pixel of the target projection.

    Equirectangular: latitude L(v) = (v + 0.5) / H * pi measured from the -y
    pole, longitude phi(u) = (u + 0.5) / W * 2 pi - pi with +z at the image
    center; d = (sin L sin phi, -cos L, sin L cos phi). Cassini transposes
    the two pixel axes (pole along -x). Cubemap builds six 90-degree pinhole
    faces in the cross layout; pixels outside the cross are invalid.
    """
    H, W = spec.height, spec.width
    if spec.kind == "equirectangular":
        lat = (np.arange(H, dtype=np.float64) + 0.5) / H * np.pi
        lon = (np.arange(W, dtype=np.float64) + 0.5) / W * (2.0 * np.pi) - np.pi
        sl, cl = np.sin(lat)[:, None], np.cos(lat)[:, None]
        sp, cp = np.sin(lon)[None, :], np.cos(lon)[None, :]
        dirs = np.stack(
            (sl * sp, np.broadcast_to(-cl, (H, W)), sl * cp), axis=-1)
        return RayGrid(dirs, np.ones((H, W), dtype=bool))

    if spec.kind == "cassini":
        lat = (np.arange(W, dtype=np.float64) + 0.5) / W * np.pi
        lon = (np.arange(H, dtype=np.float64) + 0.5) / H * (2.0 * np.pi) - np.pi
        sl, cl = np.sin(lat)[None, :], np.cos(lat)[None, :]
        sp, cp = np.sin(lon)[:, None], np.cos(lon)[:, None]
        dirs = np.stack(
            (np.broadcast_to(-cl, (H, W)), sl * sp, sl * cp), axis=-1)
        return RayGrid(dirs, np.ones((H, W), dtype=bool))

    if spec.kind == "pinhole":
        rays, valid = pinhole_unproject(_pixel_grid(W, H), spec.pinhole)
        return RayGrid(rays, valid)

    if spec.kind == "ds_fisheye":
        rays, valid = ds_unproject(_pixel_grid(W, H), spec.ds)
        return RayGrid(rays, valid)

    if spec.kind == "cubemap":
        F = spec.face_size
        K = PinholeIntrinsics.from_fov(90.0, F, F)
        base, _ = pinhole_unproject(_pixel_grid(F, F), K)
        dirs = np.zeros((H, W, 3), dtype=np.float64)
        valid = np.zeros((H, W), dtype=bool)
        for _, R, (col, row) in _CUBE_FACES:
            r0, c0 = row * F, col * F
            dirs[r0:r0 + F, c0:c0 + F] = base @ R.T
            valid[r0:r0 + F, c0:c0 + F] = True
        return RayGrid(dirs, valid)

    raise ConfigError(f"unsupported projection kind {spec.kind!r}")


def project_to_pixels(vectors: np.ndarray, spec: ProjectionSpec):
    """Map camera-frame vectors (not necessarily unit) to pixel coordinates.

    The inverse of the ray grid: applies spec.orientation^T, then the kind's
    forward mapping. Returns (uv, valid); invalid entries are zeroed. All
    mappings are scale-invariant in the input vectors.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[-1] != 3:
        raise ValueError("vectors must have shape (..., 3)")
    d = vectors @ spec.orientation  # row-vector form of orientation^T @ d
    H, W = spec.height, spec.width

    if spec.kind in ("equirectangular", "cassini"):
        n = np.linalg.norm(d, axis=-1)
        valid = np.isfinite(n) & (n > 0.0)
        safe = np.where(valid, n, 1.0)
        dn = d / safe[..., None]
        if spec.kind == "equirectangular":
            lat = np.arccos(np.clip(-dn[..., 1], -1.0, 1.0))
            lon = np.arctan2(dn[..., 0], dn[..., 2])
            u = (lon + np.pi) / (2.0 * np.pi) * W - 0.5
            v = lat / np.pi * H - 0.5
        else:
            lat = np.arccos(np.clip(-dn[..., 0], -1.0, 1.0))
            lon = np.arctan2(dn[..., 1], dn[..., 2])
            u = lat / np.pi * W - 0.5
            v = (lon + np.pi) / (2.0 * np.pi) * H - 0.5
        uv = np.stack((u, v), axis=-1)
        uv[~valid] = 0.0
        return uv, valid

    if spec.kind in ("pinhole", "ds_fisheye"):
        # tolerate zeroed/nonfinite placeholder vectors: mark them invalid
        # instead of tripping the strict camera-model domain checks
        n = np.linalg.norm(d, axis=-1)
        ok = np.isfinite(n) & (n > 0.0)
        safe = np.where(ok[..., None], d, np.array([0.0, 0.0, 1.0]))
        if spec.kind == "pinhole":
            uv, proj_ok = pinhole_project(safe, spec.pinhole)
        else:
            uv, proj_ok = ds_project(safe, spec.ds)
        valid = ok & proj_ok
        uv[~valid] = 0.0
        return uv, valid

    if spec.kind == "cubemap":
        F = spec.face_size
        K = PinholeIntrinsics.from_fov(90.0, F, F)
        n = np.linalg.norm(d, axis=-1)
        valid = np.isfinite(n) & (n > 0.0)
        face_idx = np.argmax(np.abs(d), axis=-1)
        comp = np.take_along_axis(d, face_idx[..., None], axis=-1)[..., 0]
        face = 2 * face_idx + (comp < 0.0)
        uv = np.zeros(d.shape[:-1] + (2,), dtype=np.float64)
        for i, (_, R, (col, row)) in enumerate(_CUBE_FACES):
            sel = (face == i) & valid
            if not np.any(sel):
                continue
            df = d[sel] @ R  # into the face frame
            uvf, okf = pinhole_project(df, K)
            # Boundary directions can land a hair outside the face; clamp to
            # the face's pixel-center range so samples never bleed into the
            # neighboring cross cell.
            uvf = np.clip(uvf, 0.0, F - 1.0)
            uvf[..., 0] += col * F
            uvf[..., 1] += row * F
            uv[sel] = uvf
            valid[sel] &= okf
        uv[~valid] = 0.0
        return uv, valid

    raise ConfigError(f"unsupported projection kind {spec.kind!r}")


def _wrap_or_clip(idx: np.ndarray, size: int, wrap: bool) -> np.ndarray:
    return idx % size if wrap else np.clip(idx, 0, size - 1)


def sample_image(image: np.ndarray, uv: np.ndarray,
                 src_valid: Optional[np.ndarray] = None,
                 *, method: str = "bilinear", wrap_u: bool = False,
                 wrap_v: bool = False):
    """Sample `image` at continuous (u, v) positions.

    wrap_u / wrap_v make the corresponding axis periodic (longitude of an
    equirectangular source, respectively the Cassini vertical axis); the
    other axis is edge-clamped within half a pixel of the border and invalid
    beyond. Nearest sampling preserves dtype; bilinear returns float64.
    Validity requires the contributing source pixels (all four for bilinear)
    to be valid under `src_valid`.
    """
    if method not in ("nearest", "bilinear"):
        raise ConfigError(f"unknown interpolation {method!r}")
    image = np.asarray(image)
    Hs, Ws = image.shape[:2]
    u = np.asarray(uv, dtype=np.float64)[..., 0]
    v = np.asarray(uv, dtype=np.float64)[..., 1]

    ok = np.isfinite(u) & np.isfinite(v)
    if wrap_u:
        u = u % Ws
    else:
        ok &= (u >= -0.5) & (u <= Ws - 0.5)
    if wrap_v:
        v = v % Hs
    else:
        ok &= (v >= -0.5) & (v <= Hs - 0.5)
    u = np.where(ok, u, 0.0)
    v = np.where(ok, v, 0.0)

    if method == "nearest":
        ui = _wrap_or_clip(np.rint(u).astype(np.int64), Ws, wrap_u)
        vi = _wrap_or_clip(np.rint(v).astype(np.int64), Hs, wrap_v)
        out = image[vi, ui]
        if src_valid is not None:
            ok = ok & src_valid[vi, ui]
        return out, ok

    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    tu = u - u0
    tv = v - v0
    u0c = _wrap_or_clip(u0, Ws, wrap_u)
    u1c = _wrap_or_clip(u0 + 1, Ws, wrap_u)
    v0c = _wrap_or_clip(v0, Hs, wrap_v)
    v1c = _wrap_or_clip(v0 + 1, Hs, wrap_v)

    w00 = (1.0 - tu) * (1.0 - tv)
    w10 = tu * (1.0 - tv)
    w01 = (1.0 - tu) * tv
    w11 = tu * tv
    img = image.astype(np.float64, copy=False)
    if img.ndim == 3:
        w00, w10, w01, w11 = (w[..., None] for w in (w00, w10, w01, w11))
    out = (w00 * img[v0c, u0c] + w10 * img[v0c, u1c]
           + w01 * img[v1c, u0c] + w11 * img[v1c, u1c])
    if src_valid is not None:
        ok = ok & src_valid[v0c, u0c] & src_valid[v0c, u1c] \
            & src_valid[v1c, u0c] & src_valid[v1c, u1c]
    return out, ok


def warp(src_image: np.ndarray, src_spec: ProjectionSpec, dst_spec: ProjectionSpec,
         *, interpolation: str = "bilinear", kind: str = "color",
         src_valid: Optional[np.ndarray] = None):
    """Resample a source projection into a target projection (shared center).

    kind="range" forbids bilinear interpolation: averaging range values
    across depth discontinuities fabricates geometry, so range grids must be
    warped with nearest sampling. Returns (warped, valid); invalid output
    pixels are zeroed.
    """
    if kind not in ("color", "range"):
        raise ConfigError(f"unknown warp kind {kind!r}")
    if kind == "range" and interpolation == "bilinear":
        raise ConfigError("range grids must be warped with nearest interpolation")
    src_image = np.asarray(src_image)
    if src_image.shape[:2] != (src_spec.height, src_spec.width):
        raise DataError("source image does not match source projection size")

    grid = make_ray_grid(dst_spec)
    world = grid.camera_directions(dst_spec)
    uv, pvalid = project_to_pixels(world, src_spec)
    out, svalid = sample_image(
        src_image, uv, src_valid, method=interpolation,
        wrap_u=src_spec.kind == "equirectangular",
        wrap_v=src_spec.kind == "cassini",
    )
    valid = grid.valid & pvalid & svalid
    out = out.copy()
    out[~valid] = 0
    return out, valid


@dataclass(frozen=True)
class CropRotateRecord:
    """Bookkeeping needed to undo crop_and_rotate_for_stereo."""

    original_height: int
    original_width: int
    row_margin: int
    col_margin: int

    def to_dict(self) -> dict[str, int]:
        return {
            "original_height": self.original_height,
            "original_width": self.original_width,
            "row_margin": self.row_margin,
            "col_margin": self.col_margin,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CropRotateRecord":
        try:
            return cls(int(d["original_height"]), int(d["original_width"]),
                       int(d["row_margin"]), int(d["col_margin"]))
        except KeyError as exc:
            raise DataError(f"crop record missing field {exc}") from exc


def crop_and_rotate_for_stereo(image: np.ndarray, valid: np.ndarray):
    """Strip empty borders and rotate 90 degrees counter-clockwise.

    Fully-invalid border rows/columns are removed symmetrically (the same
    margin on both sides, so the projection center stays centered); the
    rotation turns vertical-stereo epipolar columns into scanlines with the
    standard positive left-to-right disparity convention. Returns
    (image, valid, record); the record drives undo_crop_and_rotate.
    """
    image = np.asarray(image)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != image.shape[:2]:
        raise DataError("validity mask does not match image")
    rows = valid.any(axis=1)
    cols = valid.any(axis=0)
    if not rows.any():
        raise DataError("image has no valid pixels to crop to")
    H, W = valid.shape
    row_margin = int(min(np.argmax(rows), np.argmax(rows[::-1])))
    col_margin = int(min(np.argmax(cols), np.argmax(cols[::-1])))
    img = image[row_margin:H - row_margin, col_margin:W - col_margin]
    msk = valid[row_margin:H - row_margin, col_margin:W - col_margin]
    record = CropRotateRecord(H, W, row_margin, col_margin)
    return np.rot90(img, 1).copy(), np.rot90(msk, 1).copy(), record


def undo_crop_and_rotate(image: np.ndarray, valid: np.ndarray,
                         record: CropRotateRecord):
    """Rotate back clockwise and re-pad to the original dimensions."""
    img = np.rot90(np.asarray(image), -1)
    msk = np.rot90(np.asarray(valid, dtype=bool), -1)
    ch = record.original_height - 2 * record.row_margin
    cw = record.original_width - 2 * record.col_margin
    if img.shape[:2] != (ch, cw):
        raise DataError("image does not match the crop record")
    pad = [(record.row_margin, record.row_margin),
           (record.col_margin, record.col_margin)]
    if img.ndim == 3:
        out = np.pad(img, pad + [(0, 0)])
    else:
        out = np.pad(img, pad)
    return out, np.pad(msk, pad)


def cubemap_assemble(faces: Sequence[np.ndarray]) -> np.ndarray:
    """Pack six F x F face grids (+x,-x,+y,-y,+z,-z) into the 4F x 3F cross."""
    faces = [np.asarray(f) for f in faces]
    if len(faces) != 6:
        raise DataError("expected exactly six cube faces")
    F = faces[0].shape[0]
    for f in faces:
        if f.shape[:2] != (F, F):
            raise DataError("cube faces must be square and equally sized")
    shape = (3 * F, 4 * F) + faces[0].shape[2:]
    cross = np.zeros(shape, dtype=faces[0].dtype)
    for f, (_, _, (col, row)) in zip(faces, _CUBE_FACES):
        cross[row * F:(row + 1) * F, col * F:(col + 1) * F] = f
    return cross


def cubemap_split(cross: np.ndarray) -> list[np.ndarray]:
    """Inverse of cubemap_assemble."""
    cross = np.asarray(cross)
    H, W = cross.shape[:2]
    if H % 3 or W % 4 or W // 4 != H // 3:
        raise DataError("not a 4F x 3F cubemap cross")
    F = H // 3
    return [cross[row * F:(row + 1) * F, col * F:(col + 1) * F].copy()
            for _, _, (col, row) in _CUBE_FACES]
