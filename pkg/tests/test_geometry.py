import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railcheck.config import HorizonConfig
from railcheck.geometry import (
    GeometryError,
    ImageLine,
    camera_pose,
    horizon_line,
    point_above_line,
    project_point,
    vertical_overlap,
    x_at_row,
)
from railcheck.model import CameraIntrinsics

from oracles import far_ground_points, fit_line, quat_to_matrix

K = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)
FLAT = HorizonConfig()


def _oracle_line(intr, pose):
    rot = quat_to_matrix(*pose.quaternion)
    return fit_line(far_ground_points(intr.fx, intr.fy, intr.cx, intr.cy, rot, pose.translation))


def _distance_to_far_points(line, intr, pose):
    rot = quat_to_matrix(*pose.quaternion)
    pts = far_ground_points(intr.fx, intr.fy, intr.cx, intr.cy, rot, pose.translation, bearings=720,
                            max_angle_deg=60)
    assert len(pts) >= 2
    return max(abs(line.evaluate(u, v)) for u, v in pts)


def test_level_camera():
    line = horizon_line(K, camera_pose(0, 0, 0, (2, 0, 3)), FLAT)
    assert (line.a, line.b, line.c) == (0.0, -1.0, 240.0)
    assert line.row_at(0) == 240.0 and line.row_at(640) == 240.0
    assert line.evaluate(10, 100) > 0


def test_pitched_camera():
    line = horizon_line(K, camera_pose(0, math.radians(-10), 0, (2, 0, 3)), FLAT)
    # 240 - 500 tan(10 deg); matches the far-point oracle fit within 0.01 px
    assert line.row_at(320) == pytest.approx(151.8365096, abs=1e-6)
    a, b, c = _oracle_line(K, camera_pose(0, math.radians(-10), 0, (2, 0, 3)))
    assert -(a * 320 + c) / b == pytest.approx(151.8365096, abs=0.1)
    assert line.a == pytest.approx(0.0, abs=1e-12)


def test_rolled_camera():
    line = horizon_line(K, camera_pose(0, 0, math.radians(30), (2, 0, 3)), FLAT)
    slope = -line.a / line.b
    assert slope == pytest.approx(math.tan(math.radians(30)), abs=1e-12)
    assert line.evaluate(K.cx, K.cy) == pytest.approx(0.0, abs=1e-9)
    a, b, _ = _oracle_line(K, camera_pose(0, 0, math.radians(30), (2, 0, 3)))
    assert -a / b == pytest.approx(math.tan(math.radians(30)), abs=1e-6)


def test_sky_side_positive():
    line = horizon_line(K, camera_pose(0, math.radians(-5), math.radians(3), (0, 0, 2)), FLAT)
    # a point straight above the camera's horizon is sky; the ground just ahead is not
    sky = project_point(K, camera_pose(0, math.radians(-5), math.radians(3), (0, 0, 2)), (50, 0, 30))
    ground = project_point(K, camera_pose(0, math.radians(-5), math.radians(3), (0, 0, 2)), (10, 0, 0))
    assert line.evaluate(*sky) > 0 > line.evaluate(*ground)


def test_normalized():
    line = horizon_line(K, camera_pose(0.2, -0.3, 0.4), FLAT)
    assert math.hypot(line.a, line.b) == pytest.approx(1.0, abs=1e-9)


def test_degenerate_camera_looking_down():
    with pytest.raises(GeometryError):
        horizon_line(K, camera_pose(0, math.radians(-90), 0), FLAT)


def test_tilted_ground_normal():
    tilt = math.radians(2)
    cfg = HorizonConfig(ground_normal_vehicle=(-math.sin(tilt), 0.0, math.cos(tilt)))
    # an uphill ground plane raises the horizon like a camera pitched down by the same angle
    line = horizon_line(K, camera_pose(0, 0, 0), cfg)
    assert line.row_at(320) == pytest.approx(240 - 500 * math.tan(tilt), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(
    tx=st.floats(-50, 50), ty=st.floats(-50, 50), tz=st.floats(-5, 50),
    pitch=st.floats(-45, 45), roll=st.floats(-45, 45), yaw=st.floats(-180, 180),
)
def test_translation_invariance(tx, ty, tz, pitch, roll, yaw):
    angles = (math.radians(yaw), math.radians(pitch), math.radians(roll))
    a = horizon_line(K, camera_pose(*angles), FLAT)
    b = horizon_line(K, camera_pose(*angles, (tx, ty, tz)), FLAT)
    assert (a.a, a.b) == pytest.approx((b.a, b.b), abs=1e-12)
    assert a.c == pytest.approx(b.c, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(
    pitch=st.floats(-45, 45), roll=st.floats(-45, 45), yaw=st.floats(-180, 180),
    f=st.floats(300, 3000), height=st.floats(0.5, 5),
)
def test_far_point_oracle(pitch, roll, yaw, f, height):
    intr = CameraIntrinsics(f, f * 1.01, 960.0, 600.0, 1920, 1200)
    pose = camera_pose(math.radians(yaw), math.radians(pitch), math.radians(roll), (1.0, 0.0, height))
    line = horizon_line(intr, pose, FLAT)
    assert _distance_to_far_points(line, intr, pose) < 0.5


# -- point_above_line -------------------------------------------------------------

HORIZONTAL = ImageLine(0.0, -1.0, 240.0)


@pytest.mark.parametrize("point,tol,expected", [
    ((10, 240), 0, False),
    ((10, 100), 0, True),
    ((10, 235), 10, False),
    ((10, 229), 10, True),
    ((10, 300), 0, False),
])
def test_point_above_line(point, tol, expected):
    assert point_above_line(HORIZONTAL, point, tol) is expected


# -- polyline helpers ---------------------------------------------------------------

def test_x_at_row_interpolates():
    assert x_at_row([(0, 0), (10, 10)], 5) == [5.0]


def test_x_at_row_no_span():
    assert x_at_row([(0, 0), (10, 10)], 20) == []


def test_x_at_row_two_crossings():
    # segment (0,0)-(4,8): u = v/2 -> 2; segment (4,8)-(8,0): u = 8 - v/2 -> 6
    assert x_at_row([(0, 0), (4, 8), (8, 0)], 4) == [2.0, 6.0]


def test_x_at_row_horizontal_segment():
    assert x_at_row([(0, 5), (10, 5), (10, 9)], 5) == [0.0, 10.0, 10.0]


def test_x_at_row_closed_polygon():
    square = [(0, 0), (10, 0), (10, 10), (0, 10)]
    assert sorted(x_at_row(square, 5)) == [10.0]
    assert sorted(x_at_row(square, 5, closed=True)) == [0.0, 10.0]


@settings(max_examples=200, deadline=None)
@given(
    pts=st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)), min_size=2, max_size=8),
    row=st.floats(-1e4, 1e4),
)
def test_x_at_row_within_segment_bounds(pts, row):
    us = x_at_row(pts, row)
    lo, hi = min(p[0] for p in pts), max(p[0] for p in pts)
    assert all(lo <= u <= hi for u in us)
    spans = [(min(a[0], b[0]), max(a[0], b[0])) for a, b in zip(pts, pts[1:])
             if min(a[1], b[1]) <= row <= max(a[1], b[1])]
    assert all(any(s0 <= u <= s1 for s0, s1 in spans) for u in us)


def test_vertical_overlap():
    a = [(0, 0), (1, 10)]
    assert vertical_overlap(a, [(0, 5), (1, 20)]) == (5, 10)
    assert vertical_overlap([(0, 0), (1, 4)], [(0, 5), (1, 9)]) is None
    assert vertical_overlap(a, a) == (0, 10)


def test_project_point_behind_camera():
    pose = camera_pose(0, 0, 0)
    assert project_point(K, pose, (-5, 0, 0)) is None
    assert project_point(K, pose, (10, 0, 0)) == pytest.approx((320, 240))
    np.testing.assert_allclose(project_point(K, pose, (10, 1, 0)), (270, 240))
