"""Pinhole geometry for the horizon check and polyline helpers for the rail checks.

Lens distortion is ignored: annotations are compared against the horizon of
the undistorted pinhole model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .model import CameraIntrinsics, Pose

# camera optical axes (x right, y down, z forward) expressed in the vehicle
# frame (x forward, y left, z up)
_OPTICAL_TO_VEHICLE = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
_DEGENERATE = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ImageLine:
    """Line ``a*u + b*v + c = 0`` with ``hypot(a, b) == 1``.

    ``evaluate`` is the signed pixel distance to the line, positive on the
    sky side.
    """

    a: float
    b: float
    c: float

    def evaluate(self, u: float, v: float) -> float:
        return self.a * u + self.b * v + self.c

    def row_at(self, u: float) -> float | None:
        if self.b == 0.0:
            return None
        return -(self.a * u + self.c) / self.b


def rotation_matrix(pose: Pose) -> np.ndarray:
    """Sensor-to-vehicle rotation as a 3x3 matrix."""
    return Rotation.from_quat([pose.qx, pose.qy, pose.qz, pose.qw]).as_matrix()


def camera_pose(yaw: float, pitch: float, roll: float,
                translation: Sequence[float] = (0.0, 0.0, 0.0)) -> Pose:
    """Pose of an optical-frame camera from vehicle-frame angles in radians.

    ``yaw`` turns left (positive) about the vehicle z axis, negative
    ``pitch`` looks down, and positive ``roll`` about the optical axis tilts
    the horizon so that image rows grow with columns (slope ``tan(roll)``
    when ``fx == fy``).
    """
    rot = (
        Rotation.from_euler("z", yaw)
        * Rotation.from_euler("y", -pitch)
        * Rotation.from_matrix(_OPTICAL_TO_VEHICLE)
        * Rotation.from_euler("z", -roll)
    )
    qx, qy, qz, qw = rot.as_quat(canonical=True)
    return Pose(float(qw), float(qx), float(qy), float(qz), tuple(float(t) for t in translation))


def project_point(intrinsics: CameraIntrinsics, pose: Pose, point: Sequence[float]) -> tuple[float, float] | None:
    """Project a vehicle-frame point to pixels; ``None`` if it is behind the camera."""
    rot = rotation_matrix(pose)
    x, y, z = rot.T @ (np.asarray(point, dtype=float) - np.asarray(pose.translation))
    if z <= 0:
        return None
    return (intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy)


def horizon_line(intrinsics: CameraIntrinsics, pose: Pose, horizon_cfg) -> ImageLine:
    """Vanishing line of the flat ground plane in the image.

    Ground-plane directions ``d`` (``d . normal == 0`` in the vehicle frame)
    are rotated into the camera and projected; the line they trace does not
    depend on the camera translation or the ground height.
    """
    normal = np.asarray(horizon_cfg.ground_normal_vehicle, dtype=float)
    n0, n1, n2 = rotation_matrix(pose).T @ normal
    if math.hypot(n0, n1) < _DEGENERATE:
        raise GeometryError("optical axis is parallel to the ground normal; horizon is undefined")
    a = n0 / intrinsics.fx
    b = n1 / intrinsics.fy
    scale = math.hypot(a, b)
    a /= scale
    b /= scale
    return ImageLine(float(a), float(b), float(n2 / scale - a * intrinsics.cx - b * intrinsics.cy))


def point_above_line(line: ImageLine, point: Sequence[float], tolerance_px: float = 0.0) -> bool:
    return line.evaluate(point[0], point[1]) > tolerance_px


def x_at_row(polyline: Sequence[Sequence[float]], row: float, closed: bool = False) -> list[float]:
    """Columns where the polyline crosses image row ``row``.

    A horizontal segment lying on the row contributes both endpoints.
    """
    points = list(polyline)
    segments = list(zip(points, points[1:]))
    if closed and len(points) > 2:
        segments.append((points[-1], points[0]))
    out: list[float] = []
    for (u1, v1, *_), (u2, v2, *_) in segments:
        if v1 == v2:
            if v1 == row:
                out.extend((float(u1), float(u2)))
            continue
        if min(v1, v2) <= row <= max(v1, v2):
            u = u1 + (row - v1) / (v2 - v1) * (u2 - u1)
            out.append(float(min(max(u, min(u1, u2)), max(u1, u2))))
    return out


def vertical_overlap(a: Sequence[Sequence[float]], b: Sequence[Sequence[float]]) -> tuple[float, float] | None:
    lo = max(min(p[1] for p in a), min(p[1] for p in b))
    hi = min(max(p[1] for p in a), max(p[1] for p in b))
    if lo > hi:
        return None
    return (lo, hi)
