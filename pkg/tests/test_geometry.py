import numpy as np

from widestereo import (
    RigidTransform,
    is_rotation,
    normalize,
    rotation_about_x,
    rotation_about_y,
    rotation_about_z,
)


def test_axis_rotations_are_rotations():
    for rot in (rotation_about_x, rotation_about_y, rotation_about_z):
        for angle in (-2.1, 0.0, 0.3, np.pi / 2, 3.0):
            assert is_rotation(rot(angle))


def test_rotation_about_z_quarter_turn():
    R = rotation_about_z(np.pi / 2)
    np.testing.assert_allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(R @ [0, 1, 0], [-1, 0, 0], atol=1e-15)


def test_is_rotation_rejects_scaled_and_reflected():
    assert not is_rotation(2.0 * np.eye(3))
    R = np.eye(3)
    R[0, 0] = -1.0  # reflection: orthonormal but det -1
    assert not is_rotation(R)


def test_normalize_unit_and_zero():
    v = np.array([[3.0, 0.0, 4.0], [0.0, 0.0, 0.0]])
    out = normalize(v)
    np.testing.assert_allclose(out[0], [0.6, 0.0, 0.8], atol=1e-15)
    np.testing.assert_array_equal(out[1], [0.0, 0.0, 0.0])


def test_rigid_transform_roundtrip(rng):
    R = rotation_about_z(0.7) @ rotation_about_x(-0.3)
    t = np.array([0.5, -1.0, 2.0])
    T = RigidTransform(R, t)
    pts = rng.normal(size=(100, 3))
    back = T.inverse().transform_points(T.transform_points(pts))
    np.testing.assert_allclose(back, pts, atol=1e-12)


def test_rigid_transform_compose_order(rng):
    A = RigidTransform(rotation_about_y(0.4), np.array([1.0, 0.0, 0.0]))
    B = RigidTransform(rotation_about_z(-1.1), np.array([0.0, 2.0, 0.0]))
    pts = rng.normal(size=(50, 3))
    np.testing.assert_allclose(
        A.compose(B).transform_points(pts),
        A.transform_points(B.transform_points(pts)),
        atol=1e-12,
    )


def test_transform_directions_ignores_translation():
    T = RigidTransform(rotation_about_x(0.2), np.array([5.0, 5.0, 5.0]))
    d = np.array([[0.0, 0.0, 1.0]])
    np.testing.assert_allclose(T.transform_directions(d),
                               d @ T.rotation.T, atol=1e-15)


def test_identity_is_noop():
    pts = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(
        RigidTransform.identity().transform_points(pts), pts)
