import numpy as np
import pytest

from roadscale.errors import (
    BehindCamera,
    InvalidDepth,
    NoGroundIntersection,
    ShapeMismatch,
)
from roadscale.geometry import (
    CameraIntrinsics,
    RigidTransform,
    backproject,
    intersect_ray_ground,
    inverse_warp,
    project,
    rotation_about_x,
    rotation_about_y,
    rotation_about_z,
)

INTR = CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)


def test_backproject_principal_point():
    np.testing.assert_allclose(backproject(INTR, 50, 50, 10), [0, 0, 10], atol=0)


def test_backproject_right_of_center():
    np.testing.assert_allclose(backproject(INTR, 150, 50, 10), [10, 0, 10], atol=0)


def test_backproject_below_center_is_negative_y():
    np.testing.assert_allclose(backproject(INTR, 50, 150, 10), [0, -10, 10], atol=0)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
def test_backproject_rejects_bad_depth(bad):
    with pytest.raises(InvalidDepth):
        backproject(INTR, 50, 50, bad)


def test_backproject_homogeneous_in_depth():
    rng = np.random.default_rng(11)
    u = rng.uniform(0, 99, 200)
    v = rng.uniform(0, 99, 200)
    d = rng.uniform(0.1, 60, 200)
    for a in (0.1, 3.0, 41.0):
        np.testing.assert_allclose(
            backproject(INTR, u, v, a * d), a * backproject(INTR, u, v, d), rtol=1e-12
        )


def test_project_on_axis():
    assert project(INTR, np.array([0.0, 0.0, 5.0])) == (50.0, 50.0)


def test_project_behind_camera():
    with pytest.raises(BehindCamera):
        project(INTR, np.array([0.0, 0.0, -1.0]))
    with pytest.raises(BehindCamera):
        project(INTR, np.array([1.0, 1.0, 0.0]))


def test_project_backproject_roundtrip():
    rng = np.random.default_rng(3)
    u = rng.uniform(0, 99, 500)
    v = rng.uniform(0, 99, 500)
    d = rng.uniform(0.01, 100, 500)
    uu, vv = project(INTR, backproject(INTR, u, v, d))
    np.testing.assert_allclose(uu, u, atol=1e-9)
    np.testing.assert_allclose(vv, v, atol=1e-9)


def test_ray_ground_straight_down_the_lane():
    np.testing.assert_allclose(intersect_ray_ground(INTR, 50, 60, 1.5), [0, -1.5, 15])


def test_ray_ground_off_axis():
    np.testing.assert_allclose(intersect_ray_ground(INTR, 60, 60, 1.5), [1.5, -1.5, 15])


def test_ray_ground_horizon_fails():
    with pytest.raises(NoGroundIntersection):
        intersect_ray_ground(INTR, 50, 50, 1.5)
    with pytest.raises(NoGroundIntersection):
        intersect_ray_ground(INTR, 50, 10, 1.5)  # above the horizon


def test_ray_ground_exact_height_positive_range():
    """Returned points satisfy Y = -h exactly and Z > 0 for any below-horizon pixel."""
    rng = np.random.default_rng(7)
    u = rng.uniform(0, 99, 300)
    v = rng.uniform(50.5, 99, 300)
    pts = intersect_ray_ground(INTR, u, v, 1.37)
    assert np.all(pts[:, 1] == -1.37)
    assert np.all(pts[:, 2] > 0)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=-1, fy=100, cx=50, cy=50, width=100, height=100)
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=100, fy=100, cx=120, cy=50, width=100, height=100)


def test_rigid_transform_validation():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 2, np.zeros(3))
    flip = np.diag([1.0, 1.0, -1.0])  # det -1
    with pytest.raises(ValueError):
        RigidTransform(flip, np.zeros(3))


def _checker_image(h, w):
    rng = np.random.default_rng(19)
    return rng.uniform(0, 1, (h, w))


def test_inverse_warp_identity():
    src = _checker_image(40, 60)
    depth = np.full((40, 60), 7.0)
    intr = CameraIntrinsics(fx=60.0, fy=60.0, cx=30.0, cy=20.0, width=60, height=40)
    warped, valid = inverse_warp(src, depth, RigidTransform.identity(), intr)
    assert valid.all()
    np.testing.assert_allclose(warped, src, atol=1e-9)


def test_inverse_warp_scale_identity():
    """Jointly scaling depth and translation leaves the warp unchanged."""
    rng = np.random.default_rng(23)
    intr = CameraIntrinsics(fx=60.0, fy=60.0, cx=30.0, cy=20.0, width=60, height=40)
    src = _checker_image(40, 60)
    depth = rng.uniform(4, 30, (40, 60))
    rot = rotation_about_x(0.01) @ rotation_about_y(-0.02) @ rotation_about_z(0.005)
    xform = RigidTransform(rot, np.array([0.05, -0.03, 0.08]))
    ref, ref_valid = inverse_warp(src, depth, xform, intr)
    for a in (0.1, 10.0):
        warped, valid = inverse_warp(src, a * depth, xform.with_translation_scaled(a), intr)
        joint = ref_valid & valid
        assert joint.any()
        assert np.abs(warped[joint] - ref[joint]).max() < 1e-6


def test_inverse_warp_out_of_bounds_pixels():
    intr = CameraIntrinsics(fx=60.0, fy=60.0, cx=30.0, cy=20.0, width=60, height=40)
    src = _checker_image(40, 60)
    depth = np.full((40, 60), 5.0)
    # shift far enough sideways that some reprojections leave the image
    xform = RigidTransform(np.eye(3), np.array([3.0, 0.0, 0.0]))
    warped, valid = inverse_warp(src, depth, xform, intr)
    assert not valid.all()
    assert np.all(warped[~valid] == 0)


def test_inverse_warp_invalid_depth_pixels_masked():
    intr = CameraIntrinsics(fx=60.0, fy=60.0, cx=30.0, cy=20.0, width=60, height=40)
    src = _checker_image(40, 60)
    depth = np.full((40, 60), 5.0)
    depth[3, 4] = 0.0
    _, valid = inverse_warp(src, depth, RigidTransform.identity(), intr)
    assert not valid[3, 4]
    assert valid.sum() == depth.size - 1


def test_inverse_warp_shape_mismatch():
    intr = CameraIntrinsics(fx=60.0, fy=60.0, cx=30.0, cy=20.0, width=60, height=40)
    with pytest.raises(ShapeMismatch):
        inverse_warp(np.zeros((40, 60)), np.ones((30, 60)), RigidTransform.identity(), intr)
