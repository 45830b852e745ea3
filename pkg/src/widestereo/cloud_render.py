"""Point-cloud rendering: z-buffered splatting, occlusion filling from
adjacent scans, and full stereo sample synthesis.

Rendering is deterministic by construction: every (point, splat offset)
candidate carries its pixel, its Euclidean range, and the point's stable
index; the winner per pixel is the lexicographic minimum of (range,
point_index). That reduction is associative and commutative, so the result
is bit-identical for any chunking, any thread count, and any point order.
Points are processed in fixed-size chunks that do not depend on the thread
count; per-chunk winners are merged sequentially in the caller's thread.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw

from ._parallel import run_chunked
from .camera_models import PinholeIntrinsics
from .errors import ConfigError, DataError
from .geometry import RigidTransform
from .projections import ProjectionSpec, make_ray_grid, project_to_pixels, warp
from .spherical_stereo import DepthMap, DisparityMap, depth_to_disparity
from .virtual_rig import StereoRig, VirtualIntrinsicsPolicy, virtual_intrinsics

__all__ = [
    "PointCloud",
    "RenderSettings",
    "RenderResult",
    "render",
    "render_with_hole_fill",
    "StereoSample",
    "synthesize_stereo_sample",
    "PolygonMask",
    "mask_regions",
]

_CHUNK_POINTS = 1 << 17  # fixed chunk size; must not depend on thread count


@dataclass(eq=False)
class PointCloud:
    """Colored points in the world frame with per-point scan provenance.

    point_index is a stable, unique ordinal used for deterministic tie
    breaking; it defaults to the array position. `reflective` optionally
    flags points whose rendered depth must be zeroed (their color still
    renders normally).
    """

    positions: np.ndarray
    colors: Optional[np.ndarray] = None
    scan_id: Optional[np.ndarray] = None
    point_index: Optional[np.ndarray] = None
    reflective: Optional[np.ndarray] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        n = self.positions.shape[0]
        if n == 0:
            raise ValueError("a point cloud must contain at least one point")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if self.colors is None:
            self.colors = np.full((n, 3), 255, dtype=np.uint8)
        else:
            self.colors = np.asarray(self.colors, dtype=np.uint8)
            if self.colors.shape != (n, 3):
                raise ValueError("colors must have shape (N, 3)")
        if self.scan_id is None:
            self.scan_id = np.zeros(n, dtype=np.int32)
        else:
            self.scan_id = np.asarray(self.scan_id).astype(np.int32)
            if self.scan_id.shape != (n,):
                raise ValueError("scan_id must have shape (N,)")
        if self.point_index is None:
            self.point_index = np.arange(n, dtype=np.int64)
        else:
            self.point_index = np.asarray(self.point_index, dtype=np.int64)
            if self.point_index.shape != (n,):
                raise ValueError("point_index must have shape (N,)")
            if np.unique(self.point_index).size != n:
                raise ValueError("point_index values must be unique")
        if self.reflective is not None:
            self.reflective = np.asarray(self.reflective, dtype=bool)
            if self.reflective.shape != (n,):
                raise ValueError("reflective must have shape (N,)")

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class RenderSettings:
    """Splat footprint, merge policy, fill order, and threading."""

    splat_radius_px: float = 1.0
    depth_merge_policy: str = "nearest"
    hole_fill_order: Optional[tuple] = None
    threads: Optional[int] = None

    def __post_init__(self):
        if self.splat_radius_px < 0.0:
            raise ConfigError("splat radius must be non-negative")
        if self.depth_merge_policy != "nearest":
            raise ConfigError(
                f"unsupported depth merge policy {self.depth_merge_policy!r}")


def _disc_offsets(radius_px: float) -> np.ndarray:
    """Integer (du, dv) offsets with du^2 + dv^2 <= (radius + 0.5)^2.

    radius 0 gives the single center pixel, radius 1 the full 3x3 block.
    """
    lim = (radius_px + 0.5) ** 2
    m = int(np.floor(radius_px + 0.5))
    span = np.arange(-m, m + 1)
    du, dv = np.meshgrid(span, span)
    keep = du * du + dv * dv <= lim
    return np.stack((du[keep], dv[keep]), axis=-1).astype(np.int64)


@dataclass
class RenderResult:
    """Per-pixel winners of the splatting pass.

    point_index holds the winning point's stable ordinal (-1 where invalid);
    scan_id the scan that supplied the pixel (-1 where invalid). reflective
    marks pixels won by reflective-flagged points: their color is real but
    their range must not be trusted.
    """

    rgb: np.ndarray
    ranges: np.ndarray
    valid: np.ndarray
    point_index: np.ndarray
    scan_id: np.ndarray
    reflective: np.ndarray

    def depth_map(self, baseline_m: Optional[float] = None) -> DepthMap:
        """Ranges as a DepthMap; reflective pixels become invalid zeros."""
        ok = self.valid & ~self.reflective
        return DepthMap(np.where(ok, self.ranges, 0.0), ok, baseline_m)


def _splat_candidates(pc_cam: np.ndarray, indices: np.ndarray,
                      spec: ProjectionSpec, offsets: np.ndarray):
    """Project one chunk of camera-frame points and expand splat discs.

    Returns (pixel_flat, range, array_position) with at most one candidate
    per pixel (the chunk-local lexicographic winner).
    """
    H, W = spec.height, spec.width
    rng = np.linalg.norm(pc_cam, axis=-1)
    ok = rng > 0.0
    uv, pok = project_to_pixels(np.where(ok[:, None], pc_cam, 1.0), spec)
    ok &= pok
    ub = np.rint(uv[..., 0]).astype(np.int64)
    vb = np.rint(uv[..., 1]).astype(np.int64)

    uu = ub[:, None] + offsets[None, :, 0]
    vv = vb[:, None] + offsets[None, :, 1]
    okc = np.broadcast_to(ok[:, None], uu.shape).copy()
    if spec.kind == "equirectangular":
        uu = uu % W
        okc &= (vv >= 0) & (vv < H)
    elif spec.kind == "cassini":
        vv = vv % H
        okc &= (uu >= 0) & (uu < W)
    elif spec.kind == "cubemap":
        # Splats must stay inside the face cell they were projected into;
        # neighboring cross cells are not neighbors on the sphere.
        F = spec.face_size
        base_ok = ok & (ub >= 0) & (ub < W) & (vb >= 0) & (vb < H)
        okc &= base_ok[:, None]
        okc &= (uu // F == (ub // F)[:, None]) & (vv // F == (vb // F)[:, None])
        okc &= (uu >= 0) & (uu < W) & (vv >= 0) & (vv < H)
    else:
        okc &= (uu >= 0) & (uu < W) & (vv >= 0) & (vv < H)

    pix = (vv * W + uu)[okc]
    rr = np.broadcast_to(rng[:, None], uu.shape)[okc]
    pos = np.broadcast_to(indices[:, None], uu.shape)[okc]
    if pix.size == 0:
        return pix, rr, pos
    order = np.lexsort((pos, rr, pix))
    pix, rr, pos = pix[order], rr[order], pos[order]
    keep = np.ones(pix.size, dtype=bool)
    keep[1:] = pix[1:] != pix[:-1]
    return pix[keep], rr[keep], pos[keep]


def render(cloud: PointCloud, pose: RigidTransform, spec: ProjectionSpec,
           settings: Optional[RenderSettings] = None) -> RenderResult:
    """Splat a cloud through a camera at `pose` onto the target projection.

    Nearest range wins per pixel; exact range ties go to the lowest
    point_index. Pixels no candidate reaches stay invalid.
    """
    if not isinstance(cloud, PointCloud):
        raise DataError("render expects a PointCloud")
    settings = settings or RenderSettings()
    world_to_cam = pose.inverse()
    offsets = _disc_offsets(settings.splat_radius_px)
    H, W = spec.height, spec.width
    n = len(cloud)

    def project_chunk(start: int, stop: int):
        pc = world_to_cam.transform_points(cloud.positions[start:stop])
        return _splat_candidates(
            pc, np.arange(start, stop, dtype=np.int64), spec, offsets)

    chunks = run_chunked(n, _CHUNK_POINTS, project_chunk, settings.threads)

    best_r = np.full(H * W, np.inf)
    best_key = np.full(H * W, np.iinfo(np.int64).max, dtype=np.int64)
    best_pos = np.full(H * W, -1, dtype=np.int64)
    for pix, rr, pos in chunks:
        if pix.size == 0:
            continue
        key = cloud.point_index[pos]
        take = (rr < best_r[pix]) | ((rr == best_r[pix]) & (key < best_key[pix]))
        idx = pix[take]
        best_r[idx] = rr[take]
        best_key[idx] = key[take]
        best_pos[idx] = pos[take]

    valid = np.isfinite(best_r)
    pos = best_pos[valid]
    rgb = np.zeros((H * W, 3), dtype=np.uint8)
    rgb[valid] = cloud.colors[pos]
    ranges = np.where(valid, best_r, 0.0)
    point_index = np.where(valid, best_key, -1)
    scan = np.full(H * W, -1, dtype=np.int32)
    scan[valid] = cloud.scan_id[pos]
    refl = np.zeros(H * W, dtype=bool)
    if cloud.reflective is not None:
        refl[valid] = cloud.reflective[pos]
    return RenderResult(
        rgb=rgb.reshape(H, W, 3),
        ranges=ranges.reshape(H, W),
        valid=valid.reshape(H, W),
        point_index=point_index.reshape(H, W),
        scan_id=scan.reshape(H, W),
        reflective=refl.reshape(H, W),
    )


def _bundle_fill_order(bundle: Sequence[PointCloud],
                       settings: RenderSettings) -> List[int]:
    """Indices into the bundle in fill order (central scan first)."""
    scan_of = []
    for k, cloud in enumerate(bundle):
        ids = np.unique(cloud.scan_id)
        if ids.size != 1:
            raise DataError(
                f"bundle cloud {k} mixes scan ids {ids.tolist()}; one scan per cloud")
        scan_of.append(int(ids[0]))
    if len(set(scan_of)) != len(scan_of):
        raise DataError("bundle clouds must have distinct scan ids")
    if settings.hole_fill_order is None:
        return list(range(len(bundle)))
    order = [int(s) for s in settings.hole_fill_order]
    if sorted(order) != sorted(scan_of):
        raise DataError(
            f"hole_fill_order {order} does not cover the bundle scans {sorted(scan_of)}")
    return [scan_of.index(s) for s in order]


def render_with_hole_fill(bundle: Sequence[PointCloud], pose: RigidTransform,
                          spec: ProjectionSpec,
                          settings: Optional[RenderSettings] = None) -> RenderResult:
    """Render the central scan, then fill still-invalid pixels from the
    adjacent scans in order.

    Fill passes never modify a pixel that is already valid, so the central
    scan's geometry is preserved exactly. The result's scan_id channel
    records which scan supplied each pixel; point_index values are offset by
    each cloud's position in the bundle so they stay globally unambiguous.
    """
    if len(bundle) == 0:
        raise DataError("render_with_hole_fill requires a non-empty bundle")
    settings = settings or RenderSettings()
    order = _bundle_fill_order(bundle, settings)
    offsets = np.concatenate(([0], np.cumsum([len(c) for c in bundle])))

    acc: Optional[RenderResult] = None
    for k in order:
        res = render(bundle[k], pose, spec, settings)
        res.point_index = np.where(res.valid, res.point_index + offsets[k], -1)
        if acc is None:
            acc = res
            continue
        fill = res.valid & ~acc.valid
        acc.rgb[fill] = res.rgb[fill]
        acc.ranges[fill] = res.ranges[fill]
        acc.point_index[fill] = res.point_index[fill]
        acc.scan_id[fill] = res.scan_id[fill]
        acc.reflective[fill] = res.reflective[fill]
        acc.valid |= fill
    return acc


@dataclass
class StereoSample:
    """The four artifacts of one benchmark cell plus their masks."""

    rgb_ref: np.ndarray
    rgb_sec: np.ndarray
    rgb_valid_ref: np.ndarray
    rgb_valid_sec: np.ndarray
    depth_ref: DepthMap
    disparity_ref: DisparityMap
    scan_provenance: np.ndarray
    camera_kind: str
    spec: ProjectionSpec


def _fov_mask(eq_spec: ProjectionSpec, ds_spec: ProjectionSpec) -> np.ndarray:
    """Equirect pixels whose rays land inside the fisheye camera's image."""
    grid = make_ray_grid(eq_spec)
    uv, ok = project_to_pixels(grid.camera_directions(eq_spec), ds_spec)
    ok &= (uv[..., 0] >= -0.5) & (uv[..., 0] <= ds_spec.width - 0.5)
    ok &= (uv[..., 1] >= -0.5) & (uv[..., 1] <= ds_spec.height - 0.5)
    return ok


def synthesize_stereo_sample(bundle: Sequence[PointCloud], rig: StereoRig, *,
                             camera_kind: str = "fisheye", image_height: int = 256,
                             policy: Optional[VirtualIntrinsicsPolicy] = None,
                             settings: Optional[RenderSettings] = None,
                             masks: Optional[Sequence["PolygonMask"]] = None
                             ) -> StereoSample:
    """Render both rig views and derive ground-truth depth and disparity.

    Fisheye cells render color through the FOV-scaled virtual double-sphere
    camera and warp it to the rig-aligned equirectangular grid (H =
    image_height, W = 2H); range is rendered directly on that grid and
    limited to the virtual camera's footprint, so depth and color cover the
    same region. Pinhole cells render natively at image_height square.
    Disparity comes from the reference depth: spherical stereo for the
    equirect grids, fy * B / z for pinhole grids. Reflective points and
    polygon masks zero out / clip ground-truth depth without touching color.
    """
    settings = settings or RenderSettings()
    B = rig.baseline_m

    if camera_kind == "fisheye":
        if policy is None:
            raise ConfigError("fisheye synthesis requires a VirtualIntrinsicsPolicy")
        eq_spec = ProjectionSpec.equirectangular(image_height)
        ds_spec = ProjectionSpec.for_ds(virtual_intrinsics(policy, rig.fov_deg))

        def view_rgb(pose: RigidTransform):
            ds_res = render_with_hole_fill(bundle, pose, ds_spec, settings)
            rgb_f, ok = warp(ds_res.rgb, ds_spec, eq_spec,
                             interpolation="bilinear", kind="color",
                             src_valid=ds_res.valid)
            rgb = np.clip(np.rint(rgb_f), 0, 255).astype(np.uint8)
            rgb[~ok] = 0
            return rgb, ok

        rgb_ref, ok_ref = view_rgb(rig.reference_pose)
        rgb_sec, ok_sec = view_rgb(rig.second_pose)
        eq_res = render_with_hole_fill(bundle, rig.reference_pose, eq_spec, settings)
        depth_ref = eq_res.depth_map(B)
        fov = _fov_mask(eq_spec, ds_spec)
        depth_ref = DepthMap(np.where(fov, depth_ref.values, 0.0),
                             depth_ref.valid & fov, B)
        if masks:
            depth_ref = mask_regions(depth_ref, masks)
        disparity_ref = depth_to_disparity(depth_ref)
        return StereoSample(rgb_ref, rgb_sec, ok_ref, ok_sec, depth_ref,
                            disparity_ref, eq_res.scan_id, camera_kind, eq_spec)

    if camera_kind == "pinhole":
        K = PinholeIntrinsics.from_fov(rig.fov_deg, image_height, image_height)
        spec = ProjectionSpec.for_pinhole(K)
        res_ref = render_with_hole_fill(bundle, rig.reference_pose, spec, settings)
        res_sec = render_with_hole_fill(bundle, rig.second_pose, spec, settings)
        depth_ref = res_ref.depth_map(B)
        if masks:
            depth_ref = mask_regions(depth_ref, masks)
        # Disparity along the baseline-parallel v axis of the rolled/vertical
        # frame: disp = fy * B / z with planar z recovered from the range.
        dz = make_ray_grid(spec).directions[..., 2]
        z = depth_ref.values * dz
        ok = depth_ref.valid & (z > 0.0)
        disp = np.where(ok, K.fy * B / np.where(ok, z, 1.0), 0.0)
        disparity_ref = DisparityMap(disp, ok, B)
        return StereoSample(res_ref.rgb, res_sec.rgb, res_ref.valid, res_sec.valid,
                            depth_ref, disparity_ref, res_ref.scan_id,
                            camera_kind, spec)

    raise ConfigError(f"unknown camera kind {camera_kind!r}")


@dataclass(frozen=True)
class PolygonMask:
    """A polygon annotation in artifact pixel coordinates.

    With normalized=True the vertices are fractions of the image span and
    get scaled to the target grid, which lets one annotation serve grids of
    different resolutions. mode "zero_out" invalidates the region (reflective
    surfaces); "clip_to" caps the range at clip_m meters (windows).
    """

    vertices: tuple
    mode: str = "zero_out"
    clip_m: Optional[float] = None
    normalized: bool = False

    def __post_init__(self):
        verts = tuple((float(u), float(v)) for u, v in self.vertices)
        if len(verts) < 3:
            raise ConfigError("a polygon mask needs at least three vertices")
        object.__setattr__(self, "vertices", verts)
        if self.mode not in ("zero_out", "clip_to"):
            raise ConfigError(f"unknown mask mode {self.mode!r}")
        if self.mode == "clip_to" and (self.clip_m is None or self.clip_m <= 0):
            raise ConfigError("clip_to masks require a positive clip_m")

    def rasterize(self, height: int, width: int) -> np.ndarray:
        if self.normalized:
            pts = [(u * width - 0.5, v * height - 0.5) for u, v in self.vertices]
        else:
            pts = list(self.vertices)
        img = Image.new("L", (width, height), 0)
        ImageDraw.Draw(img).polygon(pts, fill=1)
        return np.asarray(img, dtype=bool)

    def to_dict(self) -> dict:
        d = {"polygon": [list(p) for p in self.vertices], "mode": self.mode}
        if self.clip_m is not None:
            d["clip_m"] = self.clip_m
        if self.normalized:
            d["normalized"] = True
        return d

    @classmethod
    def from_dict(cls, d) -> "PolygonMask":
        try:
            return cls(
                vertices=tuple(tuple(p) for p in d["polygon"]),
                mode=d.get("mode", "zero_out"),
                clip_m=d.get("clip_m"),
                normalized=bool(d.get("normalized", False)),
            )
        except KeyError as exc:
            raise DataError(f"polygon mask missing field {exc}") from exc


def mask_regions(depth: DepthMap, masks: Sequence[PolygonMask],
                 mode: Optional[str] = None,
                 clip_m: Optional[float] = None) -> DepthMap:
    """Apply polygon annotations to a depth map.

    Each mask uses its own mode unless `mode` overrides all of them
    (clip_m then supplies the cap). zero_out regions become invalid;
    clip_to regions keep validity but cap the stored range.
    """
    values = depth.values.copy()
    valid = depth.valid.copy()
    for mask in masks:
        region = mask.rasterize(depth.height, depth.width)
        eff_mode = mode or mask.mode
        if eff_mode == "zero_out":
            valid &= ~region
        elif eff_mode == "clip_to":
            cap = clip_m if mode == "clip_to" else mask.clip_m
            if cap is None or cap <= 0:
                raise ConfigError("clip_to requires a positive cap in meters")
            sel = region & valid
            values[sel] = np.minimum(values[sel], cap)
        else:
            raise ConfigError(f"unknown mask mode {eff_mode!r}")
    return DepthMap(np.where(valid, values, 0.0), valid, depth.baseline_m)
