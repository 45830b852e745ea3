"""FOV-parameterized virtual cameras and stereo rig construction.

A calibrated reference camera is rescaled to an arbitrary field of view by
making its parameters functions of the FOV:

    f_virt     = f * (n * 180 / FOV)
    xi_virt    = xi * (1 - m * FOV / 180)
    alpha_virt = alpha + m * (1 - alpha) * FOV / 180

with the empirical defaults m = 0.2, n = 1.25. Stereo rigs place the
reference camera at the requested pose and displace the second camera along
the baseline axis; the camera frames are oriented so the equirectangular
pole axis (+/- y) coincides with the baseline, which is what makes the
spherical disparity equations valid. Vertical rigs use the reference camera
as the upper one and shift the second camera downward (+y in the reference
frame); horizontal rigs roll the camera frame about the optical axis so the
same machinery applies with the baseline along the original x axis.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .camera_models import DoubleSphereIntrinsics
from .errors import ConfigError
from .geometry import RigidTransform, normalize, rotation_about_z

__all__ = [
    "ORIENTATION_KINDS",
    "VirtualIntrinsicsPolicy",
    "virtual_intrinsics",
    "StereoRig",
    "build_rig",
    "BenchmarkGrid",
    "RigDescriptor",
    "enumerate_benchmark",
]

ORIENTATION_KINDS = ("vertical", "horizontal")


@dataclass(frozen=True)
class VirtualIntrinsicsPolicy:
    """Reference camera plus the (m, n) scaling factors."""

    reference: DoubleSphereIntrinsics
    m: float = 0.2
    n: float = 1.25

    def __post_init__(self):
        if not 0.0 <= self.m < 1.0:
            raise ConfigError(f"m must lie in [0, 1), got {self.m}")
        if not self.n > 0.0:
            raise ConfigError(f"n must be positive, got {self.n}")


def virtual_intrinsics(policy: VirtualIntrinsicsPolicy,
                       fov_deg: float) -> DoubleSphereIntrinsics:
    """Rescale the reference camera to the requested field of view.

    Focal lengths shrink as the FOV grows (keeping the projected image
    scale), xi shrinks and alpha grows toward the fisheye end. cx, cy and
    the image size are copied from the reference unchanged.
    """
    if not fov_deg > 0.0:
        raise ConfigError(f"fov_deg must be positive, got {fov_deg}")
    ref = policy.reference
    ratio = fov_deg / 180.0
    f_scale = policy.n * 180.0 / fov_deg
    alpha_virt = ref.alpha + policy.m * (1.0 - ref.alpha) * ratio
    if not 0.0 <= alpha_virt <= 1.0:
        raise ConfigError(
            f"virtual alpha {alpha_virt} escapes [0, 1] for fov={fov_deg}")
    return dataclasses.replace(
        ref,
        fx=ref.fx * f_scale,
        fy=ref.fy * f_scale,
        xi=ref.xi * (1.0 - policy.m * ratio),
        alpha=alpha_virt,
    )


@dataclass(frozen=True, eq=False)
class StereoRig:
    """Reference camera pose plus baseline direction and length.

    The reference camera sits at `reference_pose`; the second camera is
    displaced by baseline_m along `axis` (a unit vector in world frame).
    For vertical rigs the reference is the upper camera and the axis points
    down (+y of the reference frame); horizontal rigs point it along the
    pre-roll +x. Either way the axis equals the reference frame's +y.
    """

    reference_pose: RigidTransform
    baseline_m: float
    axis: np.ndarray
    fov_deg: float
    orientation_kind: str

    def __post_init__(self):
        if not self.baseline_m > 0.0:
            raise ConfigError(f"baseline must be positive, got {self.baseline_m}")
        if not 60.0 <= self.fov_deg <= 200.0:
            raise ConfigError(f"fov_deg must lie in [60, 200], got {self.fov_deg}")
        if self.orientation_kind not in ORIENTATION_KINDS:
            raise ConfigError(f"unknown orientation kind {self.orientation_kind!r}")
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-9:
            raise ConfigError("baseline axis must be a unit vector")
        object.__setattr__(self, "axis", axis / n)

    @property
    def second_pose(self) -> RigidTransform:
        return RigidTransform(
            self.reference_pose.rotation,
            self.reference_pose.translation + self.baseline_m * self.axis,
        )


def build_rig(center_pose: RigidTransform, baseline_m: float, fov_deg: float,
              orientation_kind: str) -> StereoRig:
    """Construct a rig whose equirectangular pole axis lies on the baseline.

    Vertical rigs keep the center orientation (baseline along the camera's
    +y, i.e. downward, reference on top). Horizontal rigs roll the camera
    -90 degrees about the optical axis, which carries the frame's +y onto
    the original +x; the baseline then runs along the camera's right with
    identical column-epipolar geometry.
    """
    if orientation_kind == "vertical":
        R = center_pose.rotation
    elif orientation_kind == "horizontal":
        R = center_pose.rotation @ rotation_about_z(-np.pi / 2)
    else:
        raise ConfigError(f"unknown orientation kind {orientation_kind!r}")
    axis = normalize(R @ np.array([0.0, 1.0, 0.0]))
    return StereoRig(
        reference_pose=RigidTransform(R, center_pose.translation),
        baseline_m=baseline_m,
        axis=axis,
        fov_deg=fov_deg,
        orientation_kind=orientation_kind,
    )


@dataclass(frozen=True)
class BenchmarkGrid:
    """The baseline x FOV sweep rendered for each scene."""

    baselines_m: tuple = (0.020, 0.065, 0.120, 0.200, 0.300)
    fovs_deg: tuple = (120.0, 140.0, 165.0, 195.0)
    pinhole_fov_deg: float = 90.0

    def __post_init__(self):
        object.__setattr__(self, "baselines_m", tuple(float(b) for b in self.baselines_m))
        object.__setattr__(self, "fovs_deg", tuple(float(f) for f in self.fovs_deg))
        for b in self.baselines_m:
            if not (np.isfinite(b) and b > 0.0):
                raise ConfigError(f"baselines must be positive, got {b}")
        for f in self.fovs_deg:
            if not (np.isfinite(f) and f > 0.0):
                raise ConfigError(f"FOVs must be positive, got {f}")
        if not self.pinhole_fov_deg > 0.0:
            raise ConfigError("pinhole FOV must be positive")


@dataclass(frozen=True)
class RigDescriptor:
    """One benchmark cell: which camera, which geometry, which rig."""

    sample_id: str
    camera_kind: str  # "fisheye" or "pinhole"
    orientation_kind: str
    fov_deg: float
    baseline_m: float
    rig: StereoRig


def _sample_id(camera_kind: str, orientation_kind: str, fov_deg: float,
               baseline_m: float) -> str:
    return (f"{camera_kind}_{orientation_kind}"
            f"_fov{int(round(fov_deg)):03d}_b{int(round(baseline_m * 1000)):03d}mm")


def enumerate_benchmark(grid: BenchmarkGrid,
                        scene_pose: RigidTransform | None = None) -> List[RigDescriptor]:
    """All rig descriptors for one scene, deterministically ordered by id.

    The default grid yields 20 fisheye vertical + 20 fisheye horizontal +
    5 pinhole vertical + 5 pinhole horizontal descriptors. Empty baseline or
    FOV lists simply produce fewer (or zero) descriptors.
    """
    if scene_pose is None:
        scene_pose = RigidTransform.identity()
    out: List[RigDescriptor] = []
    for orientation in ORIENTATION_KINDS:
        for camera_kind, fovs in (("fisheye", grid.fovs_deg),
                                  ("pinhole", (grid.pinhole_fov_deg,))):
            for fov in fovs:
                for b in grid.baselines_m:
                    out.append(RigDescriptor(
                        sample_id=_sample_id(camera_kind, orientation, fov, b),
                        camera_kind=camera_kind,
                        orientation_kind=orientation,
                        fov_deg=fov,
                        baseline_m=b,
                        rig=build_rig(scene_pose, b, fov, orientation),
                    ))
    ids = [d.sample_id for d in out]
    if len(set(ids)) != len(ids):
        raise ConfigError("benchmark grid produces duplicate sample ids")
    return sorted(out, key=lambda d: d.sample_id)
