"""Shared fixtures and scene builders for the test suite."""

import numpy as np
import pytest

from widestereo import DoubleSphereIntrinsics, PointCloud

# Reference fisheye calibration used across the suite. The negative xi /
# mid-range alpha pair keeps both projection branches exercised while the
# valid image circle stays inside the 400x400 sensor for FOVs up to ~195.
DS_FIXTURE = DoubleSphereIntrinsics(
    fx=95.0, fy=95.0, cx=199.5, cy=199.5,
    xi=-0.25, alpha=0.58, width=400, height=400,
)

# Wider HD-style camera for parameter-roundtrip tests.
DS_HD = DoubleSphereIntrinsics(
    fx=350.0, fy=350.0, cx=960.0, cy=540.0,
    xi=-0.2, alpha=0.6, width=1920, height=1080,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def plane_cloud(z_m, half_extent_m=6.0, step_m=0.02, color=None, shade=True):
    """Dense points on the plane z = const, optionally with a smooth shade."""
    axis = np.arange(-half_extent_m, half_extent_m, step_m)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([xs.ravel(), ys.ravel(),
                           np.full(xs.size, float(z_m))])
    if color is not None:
        colors = np.tile(np.asarray(color, dtype=np.uint8), (len(pts), 1))
    elif shade:
        # smooth low-frequency shading so photometric checks have texture
        shade_v = 128 + 90 * np.sin(0.8 * pts[:, 0]) * np.cos(0.6 * pts[:, 1])
        colors = np.repeat(np.clip(shade_v, 0, 255).astype(np.uint8)[:, None],
                           3, axis=1)
    else:
        colors = None
    return PointCloud(pts, colors=colors)


def box_cloud(half_x=3.0, half_y=1.5, half_z=3.0, step_m=0.02):
    """Axis-aligned box room centred on the origin (floor at y=+half_y)."""
    def face(axis, value, a_half, b_half):
        a = np.arange(-a_half, a_half, step_m)
        b = np.arange(-b_half, b_half, step_m)
        A, B = np.meshgrid(a, b, indexing="ij")
        pts = np.empty((A.size, 3))
        other = [i for i in range(3) if i != axis]
        pts[:, axis] = value
        pts[:, other[0]] = A.ravel()
        pts[:, other[1]] = B.ravel()
        return pts

    pts = np.concatenate([
        face(1, half_y, half_x, half_z), face(1, -half_y, half_x, half_z),
        face(0, half_x, half_y, half_z), face(0, -half_x, half_y, half_z),
        face(2, half_z, half_x, half_y), face(2, -half_z, half_x, half_y),
    ])
    shade = 128 + 60 * np.sin(1.3 * pts[:, 0]) + 40 * np.cos(0.9 * pts[:, 2])
    colors = np.repeat(np.clip(shade, 0, 255).astype(np.uint8)[:, None], 3, axis=1)
    return PointCloud(pts, colors=colors)
