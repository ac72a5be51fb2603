import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import mc_iou_bev

from bevlift.boxes import (
    BevBox,
    Box3D,
    ClassHeightPrior,
    bev_from_3d,
    corners_3d,
    corners_bev,
    iou_2d,
    iou_3d,
    iou_bev,
    lift_to_3d,
    normalize_angle,
    polygon_area,
    project_to_image,
)
from bevlift.exceptions import ConfigError, DegenerateGeometryError
from bevlift.ground_plane import Plane
from bevlift.kitti_io import Calibration, GroundTruthObject


def test_normalize_angle():
    assert normalize_angle(math.pi) == math.pi
    assert normalize_angle(-math.pi) == math.pi
    assert normalize_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def test_bev_from_3d():
    b = bev_from_3d(Box3D((10, 2, -0.9), (3.9, 1.6, 1.5), 0.3))
    assert b == BevBox((10, 2), (3.9, 1.6), 0.3)
    assert bev_from_3d(Box3D((0, 0, 0), (1, 1, 1), math.pi)).yaw == math.pi


def test_lift_examples():
    flat = Plane.horizontal(-1.73)
    box = lift_to_3d(BevBox((10, 0), (3.9, 1.6), 0.2), flat, 1.5)
    assert box.center[2] == pytest.approx(-0.98, abs=1e-12)
    assert lift_to_3d(BevBox((3, 4), (1, 1)), Plane.horizontal(0.0), 2.0).center[2] == 1.0
    tilt = Plane((math.sin(math.radians(5)), 0, math.cos(math.radians(5))), 0.0)
    lifted = lift_to_3d(BevBox((1, 0), (2, 1)), tilt, 1.0)
    assert lifted.bottom == pytest.approx(-math.tan(math.radians(5)), abs=1e-12)
    with pytest.raises(DegenerateGeometryError):
        lift_to_3d(BevBox((1, 0), (2, 1)), Plane((1, 0, 0), 0), 1.0)
    with pytest.raises(ValueError):
        lift_to_3d(BevBox((1, 0), (2, 1)), flat, 0.0)


boxes = st.builds(
    lambda x, y, l, w, yaw: BevBox((x, y), (l, w), yaw),
    st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-4, 4),
)


@settings(max_examples=200, deadline=None)
@given(boxes, st.floats(-3, 3), st.floats(0.1, 3))
def test_lift_round_trip(b, z0, h):
    assert bev_from_3d(lift_to_3d(b, Plane.horizontal(z0), h)) == b


def test_corners():
    c = corners_bev(BevBox((0, 0), (1, 1), 0))
    np.testing.assert_allclose(c, [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]])
    q = corners_bev(BevBox((0, 0), (4, 2), math.pi / 2))
    np.testing.assert_allclose(np.ptp(q, axis=0), [2, 4], atol=1e-12)
    assert corners_3d(Box3D((0, 0, 1), (4, 2, 2))).shape == (8, 3)


@settings(max_examples=200, deadline=None)
@given(boxes)
def test_corner_area(b):
    assert polygon_area(corners_bev(b)) == pytest.approx(b.size[0] * b.size[1], rel=1e-9)


def test_iou_examples():
    a = BevBox((0, 0), (1, 1))
    assert iou_bev(a, a) == 1.0
    assert iou_bev(a, BevBox((0.5, 0), (1, 1))) == pytest.approx(1 / 3, abs=1e-12)
    assert iou_bev(a, BevBox((1, 0), (1, 1))) == 0.0  # edge contact
    assert iou_bev(a, BevBox((5, 0), (1, 1))) == 0.0


def test_iou_3d_examples():
    a = Box3D((0, 0, 1), (2, 2, 2))
    assert iou_3d(a, a) == 1.0
    assert iou_3d(a, Box3D((0, 0, 2), (2, 2, 2))) == pytest.approx(1 / 3, abs=1e-12)
    assert iou_3d(a, Box3D((0, 0, 5), (2, 2, 2))) == 0.0


def test_iou_2d():
    assert iou_2d((0, 0, 2, 2), (1, 0, 3, 2)) == pytest.approx(1 / 3)
    assert iou_2d((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0


@settings(max_examples=300, deadline=None)
@given(boxes, boxes, st.floats(-20, 20), st.floats(-20, 20), st.floats(-4, 4))
def test_iou_laws(a, b, tx, ty, rot):
    v = iou_bev(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(iou_bev(b, a), abs=1e-9)

    def move(box):
        c, s = math.cos(rot), math.sin(rot)
        x, y = box.center
        return BevBox((c * x - s * y + tx, s * x + c * y + ty), box.size, box.yaw + rot)

    assert iou_bev(move(a), move(b)) == pytest.approx(v, abs=1e-9)


def test_iou_one_for_flipped_box():
    a = BevBox((3, 1), (4, 2), 0.4)
    flipped = BevBox((3, 1), (4, 2), 0.4 + math.pi)
    assert iou_bev(a, flipped) == pytest.approx(1.0, abs=1e-12)


def test_iou_vs_monte_carlo(rng):
    for k in range(40):
        a = BevBox(tuple(rng.uniform(-2, 2, 2)), tuple(rng.uniform(0.5, 5, 2)), rng.uniform(-4, 4))
        b = BevBox(tuple(rng.uniform(-2, 2, 2)), tuple(rng.uniform(0.5, 5, 2)), rng.uniform(-4, 4))
        assert abs(iou_bev(a, b) - mc_iou_bev(a, b, seed=k)) <= 2e-3


def test_project_to_image():
    calib = Calibration.nominal()
    # on the optical axis: camera center is the sensor origin under nominal calib
    box = Box3D((20, 0, 0), (2, 2, 2), 0.0)
    u0, v0, u1, v1 = project_to_image(box, calib)
    assert (u0 + u1) / 2 == pytest.approx(calib.p2[0, 2], abs=1e-9)
    assert (v0 + v1) / 2 == pytest.approx(calib.p2[1, 2], abs=1e-9)
    assert project_to_image(Box3D((-20, 0, 0), (2, 2, 2)), calib) is None


def test_project_hull_contains_corners(rng):
    calib = Calibration.nominal()
    for _ in range(50):
        box = Box3D((rng.uniform(5, 40), rng.uniform(-10, 10), rng.uniform(-2, 1)),
                    tuple(rng.uniform(0.5, 4, 3)), rng.uniform(-4, 4))
        hull = project_to_image(box, calib)
        cam = corners_3d(box) @ calib.tr_velo_to_cam[:, :3].T
        uvw = np.hstack([cam, np.ones((8, 1))]) @ calib.p2.T
        uv = uvw[:, :2] / uvw[:, 2:]
        assert np.all(uv[:, 0] >= hull[0] - 1e-9) and np.all(uv[:, 0] <= hull[2] + 1e-9)
        assert np.all(uv[:, 1] >= hull[1] - 1e-9) and np.all(uv[:, 1] <= hull[3] + 1e-9)


def test_height_prior():
    prior = ClassHeightPrior()
    assert prior.height_for("Car") == 1.53 and prior.policy_for("Car") == "plane"
    with pytest.raises(ConfigError):
        ClassHeightPrior(heights={"Car": -1})
    with pytest.raises(ConfigError):
        ClassHeightPrior(policy={"Car": "guess"})
    labels = [GroundTruthObject("Car", 0, 0, 0, (0, 0, 1, 1), (h, 1.6, 3.9), (0, 0, 10), 0) for h in (1.4, 1.6)]
    assert ClassHeightPrior.from_labels(labels).height_for("Car") == pytest.approx(1.5)


def test_box_validation():
    with pytest.raises(ValueError):
        Box3D((0, 0, 0), (0, 1, 1))
    with pytest.raises(ValueError):
        BevBox((0, 0), (1, -1))
