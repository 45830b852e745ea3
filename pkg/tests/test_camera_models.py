import dataclasses
import math

import numpy as np
import pytest

from widestereo import (
    DataError,
    DoubleSphereIntrinsics,
    GeometryDomainError,
    PinholeIntrinsics,
    ds_project,
    ds_unproject,
    intrinsics_from_dict,
    pinhole_project,
    pinhole_unproject,
)

from conftest import DS_HD


def _angle_between(a, b):
    # atan2 form stays accurate for tiny angles where arccos saturates
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dots = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dots)


def test_project_matches_scalar_construction():
    # Frozen from a scalar walkthrough of the two-sphere construction:
    # d1 = |p|, lift z by xi*d1, blend the second sphere with the image
    # plane by alpha, then apply the pinhole affinity.
    uv, valid = ds_project(np.array([[0.5, -0.2, 1.0]]), DS_HD)
    assert valid[0]
    np.testing.assert_allclose(
        uv[0], [1160.1571406292362, 459.93714374830552], rtol=0, atol=1e-9)


def test_unproject_matches_scalar_construction():
    rays, valid = ds_unproject(
        np.array([[1160.1571406292362, 459.93714374830552]]), DS_HD)
    assert valid[0]
    expected = np.array(
        [0.44022545316281186, -0.17609018126512477, 0.88045090632562384])
    np.testing.assert_allclose(rays[0], expected, rtol=0, atol=1e-12)


def test_projection_is_scale_invariant(rng):
    pts = rng.normal(size=(500, 3))
    pts[:, 2] = np.abs(pts[:, 2]) + 0.5
    uv1, v1 = ds_project(pts, DS_HD)
    uv2, v2 = ds_project(pts * rng.uniform(0.1, 50.0, size=(500, 1)), DS_HD)
    np.testing.assert_array_equal(v1, v2)
    np.testing.assert_allclose(uv1[v1], uv2[v1], atol=1e-9)


@pytest.mark.parametrize("alpha", [0.05, 0.3, 0.5, 0.58, 0.75, 0.95])
@pytest.mark.parametrize("xi", [-0.3, -0.1, 0.0, 0.4, 0.9])
def test_roundtrip_over_parameter_grid(alpha, xi, rng):
    if alpha > 0.9 and xi < -0.2:
        # for alpha near 1 with strongly negative xi the radial curve folds
        # back just inside the validity cut, so the projection is not
        # injective there; see test_fold_shares_pixel below
        pytest.skip("projection folds at the rim for this corner")
    K = DoubleSphereIntrinsics(fx=300.0, fy=310.0, cx=511.5, cy=511.5,
                               xi=xi, alpha=alpha, width=1024, height=1024)
    dirs = rng.normal(size=(2000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    uv, ok = ds_project(dirs, K)
    ok &= np.all(np.abs(uv - [K.cx, K.cy]) < 2000.0, axis=1)
    rays, ok2 = ds_unproject(uv[ok], K)
    assert ok2.all()
    ang = _angle_between(rays, dirs[ok])
    assert ok.sum() > 200
    assert ang.max() < 1e-10


def test_fold_shares_pixel():
    # The alpha=0.95 / xi=-0.3 corner folds: two directions straddling the
    # fold angle land on the same pixel. The closed-form inverse returns the
    # inner branch, and re-projecting it reproduces the pixel exactly.
    K = DoubleSphereIntrinsics(fx=300.0, fy=310.0, cx=511.5, cy=511.5,
                               xi=-0.3, alpha=0.95, width=1024, height=1024)
    outer = np.array([[np.sin(np.radians(75.9)), 0.0, np.cos(np.radians(75.9))]])
    uv, ok = ds_project(outer, K)
    assert ok[0]
    ray, ok2 = ds_unproject(uv, K)
    assert ok2[0]
    uv_again, _ = ds_project(ray, K)
    np.testing.assert_allclose(uv_again, uv, atol=1e-8)
    assert _angle_between(ray, outer)[0] > 1e-4  # genuinely the other branch


def test_pinhole_degeneracy():
    # alpha = 0, xi = 0 collapses the model to a plain pinhole camera.
    K = DoubleSphereIntrinsics(fx=400.0, fy=420.0, cx=320.0, cy=240.0,
                               xi=0.0, alpha=0.0, width=640, height=480)
    P = PinholeIntrinsics(fx=400.0, fy=420.0, cx=320.0, cy=240.0,
                          width=640, height=480)
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(1000, 3))
    pts[:, 2] = np.abs(pts[:, 2]) + 0.2
    uv_ds, ok_ds = ds_project(pts, K)
    uv_ph, ok_ph = pinhole_project(pts, P)
    assert ok_ds.all() and ok_ph.all()
    np.testing.assert_allclose(uv_ds, uv_ph, atol=1e-9)


def test_principal_point_unprojects_to_optical_axis():
    rays, ok = ds_unproject(np.array([[DS_HD.cx, DS_HD.cy]]), DS_HD)
    assert ok[0]
    np.testing.assert_array_equal(rays[0], [0.0, 0.0, 1.0])


def test_unproject_domain_boundary():
    # For alpha > 0.5 pixels beyond r^2 = 1/(2 alpha - 1) have no ray.
    K = DoubleSphereIntrinsics(fx=100.0, fy=100.0, cx=250.0, cy=250.0,
                               xi=0.1, alpha=0.75, width=500, height=500)
    r_max = math.sqrt(1.0 / (2 * K.alpha - 1.0))
    inside = np.array([[K.cx + K.fx * (r_max - 1e-3), K.cy]])
    outside = np.array([[K.cx + K.fx * (r_max + 1e-3), K.cy]])
    _, ok_in = ds_unproject(inside, K)
    rays_out, ok_out = ds_unproject(outside, K)
    assert ok_in[0] and not ok_out[0]
    np.testing.assert_array_equal(rays_out[0], [0.0, 0.0, 0.0])


def test_points_behind_validity_cut():
    # straight behind the camera is never projectable
    uv, ok = ds_project(np.array([[0.0, 0.0, -1.0]]), DS_HD)
    assert not ok[0]
    np.testing.assert_array_equal(uv[0], [0.0, 0.0])


def test_project_rejects_nonfinite_and_zero():
    with pytest.raises(GeometryDomainError):
        ds_project(np.array([[np.nan, 0.0, 1.0]]), DS_HD)
    with pytest.raises(GeometryDomainError):
        ds_project(np.array([[0.0, 0.0, 0.0]]), DS_HD)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        dataclasses.replace(DS_HD, alpha=1.5)
    with pytest.raises(ValueError):
        dataclasses.replace(DS_HD, fx=-1.0)
    with pytest.raises(ValueError):
        dataclasses.replace(DS_HD, cx=5000.0)


def test_dict_roundtrip_and_dispatch():
    doc = DS_HD.to_dict()
    assert doc["model"] == "double_sphere"
    assert DoubleSphereIntrinsics.from_dict(doc) == DS_HD
    K = intrinsics_from_dict(doc)
    assert isinstance(K, DoubleSphereIntrinsics)

    P = PinholeIntrinsics(fx=500.0, fy=500.0, cx=319.5, cy=239.5,
                          width=640, height=480)
    assert intrinsics_from_dict(P.to_dict()) == P

    with pytest.raises(DataError):
        PinholeIntrinsics.from_dict(doc)  # wrong model tag
    with pytest.raises(DataError):
        intrinsics_from_dict({"model": "fisheye624"})


def test_pinhole_from_fov():
    P = PinholeIntrinsics.from_fov(90.0, 512, 512)
    assert P.fx == pytest.approx(256.0, abs=1e-12)
    assert P.cx == pytest.approx(255.5)
    with pytest.raises(ValueError):
        PinholeIntrinsics.from_fov(180.0, 512, 512)


def test_pinhole_roundtrip(rng):
    P = PinholeIntrinsics.from_fov(90.0, 512, 384)
    pts = rng.normal(size=(300, 3))
    pts[:, 2] = np.abs(pts[:, 2]) + 0.1
    uv, ok = pinhole_project(pts, P)
    assert ok.all()
    rays, _ = pinhole_unproject(uv, P)
    ang = _angle_between(rays, pts / np.linalg.norm(pts, axis=1, keepdims=True))
    assert ang.max() < 1e-12


def test_pinhole_behind_camera_invalid():
    P = PinholeIntrinsics.from_fov(90.0, 64, 64)
    _, ok = pinhole_project(np.array([[0.0, 0.0, -2.0]]), P)
    assert not ok[0]
