"""Scene data model and the strict OpenLABEL-subset parser.

Only the parts of an OpenLABEL document the checks need are modeled.
Unknown keys are ignored so newer files still load. The accepted layout is
described in ``docs/format.md``.

Conventions:

* quaternions are stored ``(qw, qx, qy, qz)`` on the Python side; in the
  file they follow OpenLABEL order ``[qx, qy, qz, qw]``;
* a sensor pose maps sensor-frame vectors into the vehicle frame
  (``parse_scene(..., invert_extrinsics=True)`` accepts the opposite);
* camera sensor frames are optical frames: x right, y down, z forward.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator

ROOT_KEY = "openlabel"
SCHEMA_VERSION = "1.0.0"
QUATERNION_TOLERANCE = 1e-6


class ParseError(ValueError):
    """Raised for documents that cannot be turned into a valid Scene."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class Modality(str, Enum):
    CAMERA = "Camera"
    LIDAR = "Lidar"
    RADAR = "Radar"
    OTHER = "Other"


class Kind(str, Enum):
    BBOX2D = "Bbox2D"
    CUBOID3D = "Cuboid3D"
    POLY2D = "Poly2D"
    POLY3D = "Poly3D"


# OpenLABEL object_data key for each annotation kind
KIND_KEYS: dict[Kind, str] = {
    Kind.BBOX2D: "bbox",
    Kind.CUBOID3D: "cuboid",
    Kind.POLY2D: "poly2d",
    Kind.POLY3D: "poly3d",
}
_KEY_KINDS = {v: k for k, v in KIND_KEYS.items()}

_STREAM_TYPES = {
    "camera": Modality.CAMERA,
    "lidar": Modality.LIDAR,
    "radar": Modality.RADAR,
}


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    distortion: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Pose:
    """Rigid sensor-to-vehicle transform."""

    qw: float
    qx: float
    qy: float
    qz: float
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def quaternion(self) -> tuple[float, float, float, float]:
        return (self.qw, self.qx, self.qy, self.qz)

    def inverse(self) -> Pose:
        from scipy.spatial.transform import Rotation

        rot = Rotation.from_quat([self.qx, self.qy, self.qz, self.qw])
        inv = rot.inv()
        t = -inv.apply(self.translation)
        x, y, z, w = inv.as_quat()
        return Pose(float(w), float(x), float(y), float(z), tuple(float(v) for v in t))


@dataclass(frozen=True)
class Sensor:
    name: str
    modality: Modality
    intrinsics: CameraIntrinsics | None = None
    pose: Pose | None = None


@dataclass(frozen=True)
class ObjectDecl:
    uid: str
    class_name: str
    display_name: str = ""


@dataclass(frozen=True)
class Bbox2D:
    center: tuple[float, float]
    size: tuple[float, float]


@dataclass(frozen=True)
class Cuboid:
    center: tuple[float, float, float]
    quaternion: tuple[float, float, float, float]  # (qw, qx, qy, qz)
    size: tuple[float, float, float]


@dataclass(frozen=True)
class Polyline:
    points: tuple[tuple[float, ...], ...]
    closed: bool = False


Geometry = Bbox2D | Cuboid | Polyline


@dataclass(frozen=True)
class Annotation:
    uid: str
    object_uid: str
    kind: Kind
    geometry: Geometry
    sensor: str
    attributes: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Frame:
    index: int
    annotations: tuple[Annotation, ...] = ()
    timestamp: float | None = None


@dataclass(frozen=True)
class Scene:
    sensors: dict[str, Sensor] = field(default_factory=dict)
    objects: dict[str, ObjectDecl] = field(default_factory=dict)
    frames: dict[int, Frame] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def annotations(self) -> Iterator[tuple[Frame, Annotation]]:
        for frame in self.frames.values():
            for ann in frame.annotations:
                yield frame, ann

    def class_of(self, ann: Annotation) -> str:
        return self.objects[ann.object_uid].class_name


@dataclass(frozen=True)
class ElementCount:
    annotations: int = 0
    attributes: int = 0

    @property
    def total(self) -> int:
        return self.annotations + self.attributes

    def __add__(self, other: ElementCount) -> ElementCount:
        return ElementCount(self.annotations + other.annotations, self.attributes + other.attributes)


def count_elements(scene: Scene) -> ElementCount:
    """Annotations plus their attribute entries: the error-rate denominator."""
    n_ann = n_attr = 0
    for frame in scene.frames.values():
        n_ann += len(frame.annotations)
        n_attr += sum(len(a.attributes) for a in frame.annotations)
    return ElementCount(n_ann, n_attr)


def attr_type(value: Any) -> str:
    """Name of the attribute group a Python value belongs to."""
    if isinstance(value, bool):
        return "Bool"
    if isinstance(value, str):
        return "Text"
    if isinstance(value, (int, float)):
        return "Num"
    if isinstance(value, (tuple, list)):
        return "Vec"
    raise TypeError(f"unsupported attribute value {value!r}")


# --------------------------------------------------------------------------
# parsing

def _dict(node: Any, path: str) -> dict:
    if not isinstance(node, dict):
        raise ParseError(f"expected an object, got {type(node).__name__}", path)
    return node


def _list(node: Any, path: str) -> list:
    if not isinstance(node, list):
        raise ParseError(f"expected an array, got {type(node).__name__}", path)
    return node


def _str(node: Any, path: str) -> str:
    if not isinstance(node, str):
        raise ParseError(f"expected a string, got {type(node).__name__}", path)
    return node


def _num(node: Any, path: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ParseError(f"expected a number, got {type(node).__name__}", path)
    value = float(node)
    if not math.isfinite(value):
        raise ParseError("expected a finite number", path)
    return value


def _nums(node: Any, path: str, length: int | None = None) -> tuple[float, ...]:
    items = _list(node, path)
    if length is not None and len(items) != length:
        raise ParseError(f"expected {length} numbers, got {len(items)}", path)
    return tuple(_num(v, f"{path}/{i}") for i, v in enumerate(items))


def _unit_quaternion(qx: float, qy: float, qz: float, qw: float, path: str) -> tuple[float, float, float, float]:
    norm = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    if abs(norm - 1.0) > QUATERNION_TOLERANCE:
        raise ParseError(f"quaternion is not unit length (norm {norm:.9g})", path)
    return (qw, qx, qy, qz)


def _parse_intrinsics(node: Any, path: str) -> CameraIntrinsics:
    node = _dict(node, path)
    if "camera_matrix" not in node:
        raise ParseError("missing camera_matrix", path)
    m = _nums(node["camera_matrix"], f"{path}/camera_matrix")
    if len(m) == 12:
        fx, cx, fy, cy = m[0], m[2], m[5], m[6]
    elif len(m) == 9:
        fx, cx, fy, cy = m[0], m[2], m[4], m[5]
    else:
        raise ParseError("camera_matrix must have 9 (3x3) or 12 (3x4) entries", f"{path}/camera_matrix")
    width = _num(node.get("width_px"), f"{path}/width_px")
    height = _num(node.get("height_px"), f"{path}/height_px")
    if width <= 0 or height <= 0:
        raise ParseError("image size must be positive", path)
    if fx <= 0 or fy <= 0:
        raise ParseError("focal lengths must be positive", f"{path}/camera_matrix")
    if not (0 <= cx <= width and 0 <= cy <= height):
        raise ParseError("principal point lies outside the image", f"{path}/camera_matrix")
    distortion = None
    if node.get("distortion_coeffs") is not None:
        distortion = _nums(node["distortion_coeffs"], f"{path}/distortion_coeffs")
    return CameraIntrinsics(fx, fy, cx, cy, int(width), int(height), distortion)


def _parse_pose(node: Any, path: str) -> Pose:
    node = _dict(node, path)
    if "quaternion" in node:
        qx, qy, qz, qw = _nums(node["quaternion"], f"{path}/quaternion", 4)
        q = _unit_quaternion(qx, qy, qz, qw, f"{path}/quaternion")
        t = _nums(node.get("translation", [0, 0, 0]), f"{path}/translation", 3)
        return Pose(*q, translation=t)
    if "matrix4x4" in node:
        from scipy.spatial.transform import Rotation

        m = _nums(node["matrix4x4"], f"{path}/matrix4x4", 16)
        rot = [m[0:3], m[4:7], m[8:11]]
        det = (
            rot[0][0] * (rot[1][1] * rot[2][2] - rot[1][2] * rot[2][1])
            - rot[0][1] * (rot[1][0] * rot[2][2] - rot[1][2] * rot[2][0])
            + rot[0][2] * (rot[1][0] * rot[2][1] - rot[1][1] * rot[2][0])
        )
        if abs(det - 1.0) > 1e-6:
            raise ParseError("matrix4x4 rotation block is not a proper rotation", f"{path}/matrix4x4")
        qx, qy, qz, qw = Rotation.from_matrix(rot).as_quat()
        return Pose(float(qw), float(qx), float(qy), float(qz), (m[3], m[7], m[11]))
    raise ParseError("pose needs 'quaternion' or 'matrix4x4'", path)


def _parse_sensors(root: dict, invert: bool) -> dict[str, Sensor]:
    streams = _dict(root.get("streams", {}), f"{ROOT_KEY}/streams")
    coord_systems = _dict(root.get("coordinate_systems", {}), f"{ROOT_KEY}/coordinate_systems")
    sensors: dict[str, Sensor] = {}
    for name, stream in streams.items():
        path = f"{ROOT_KEY}/streams/{name}"
        stream = _dict(stream, path)
        stype = _str(stream.get("type", "other"), f"{path}/type").lower()
        modality = _STREAM_TYPES.get(stype, Modality.OTHER)
        intrinsics = None
        props = stream.get("stream_properties")
        if modality is Modality.CAMERA and props is not None:
            props = _dict(props, f"{path}/stream_properties")
            if props.get("intrinsics_pinhole") is not None:
                intrinsics = _parse_intrinsics(
                    props["intrinsics_pinhole"], f"{path}/stream_properties/intrinsics_pinhole"
                )
        pose = None
        cs = coord_systems.get(name)
        if cs is not None:
            cs = _dict(cs, f"{ROOT_KEY}/coordinate_systems/{name}")
            if cs.get("pose_wrt_parent") is not None:
                pose = _parse_pose(cs["pose_wrt_parent"], f"{ROOT_KEY}/coordinate_systems/{name}/pose_wrt_parent")
                if invert:
                    pose = pose.inverse()
        sensors[name] = Sensor(name, modality, intrinsics, pose)
    return sensors


def _parse_attributes(node: Any, path: str) -> dict[str, Any]:
    groups = _dict(node, path)
    attrs: dict[str, Any] = {}
    for group, items in groups.items():
        if group not in ("text", "num", "boolean", "vec"):
            continue
        for i, item in enumerate(_list(items, f"{path}/{group}")):
            ipath = f"{path}/{group}/{i}"
            item = _dict(item, ipath)
            name = _str(item.get("name"), f"{ipath}/name")
            if "val" not in item:
                raise ParseError("attribute without 'val'", ipath)
            raw = item["val"]
            if group == "text":
                value: Any = _str(raw, f"{ipath}/val")
            elif group == "num":
                value = _num(raw, f"{ipath}/val")
            elif group == "boolean":
                if not isinstance(raw, bool):
                    raise ParseError("expected a boolean", f"{ipath}/val")
                value = raw
            else:
                elems = []
                for j, v in enumerate(_list(raw, f"{ipath}/val")):
                    elems.append(v if isinstance(v, str) else _num(v, f"{ipath}/val/{j}"))
                value = tuple(elems)
            if name in attrs:
                raise ParseError(f"duplicate attribute {name!r}", ipath)
            attrs[name] = value
    return attrs


def _parse_points(node: Any, path: str, dim: int) -> tuple[tuple[float, ...], ...]:
    flat = _nums(node, path)
    if len(flat) % dim:
        raise ParseError(f"coordinate count {len(flat)} is not a multiple of {dim}", path)
    points = tuple(flat[i:i + dim] for i in range(0, len(flat), dim))
    if len(points) < 2:
        raise ParseError("polyline needs at least 2 points", path)
    return points


def _parse_geometry(kind: Kind, item: dict, path: str) -> Geometry:
    if "val" not in item:
        raise ParseError("geometry without 'val'", path)
    vpath = f"{path}/val"
    if kind is Kind.BBOX2D:
        x, y, w, h = _nums(item["val"], vpath, 4)
        if w <= 0 or h <= 0:
            raise ParseError("bounding box size must be positive", vpath)
        return Bbox2D((x, y), (w, h))
    if kind is Kind.CUBOID3D:
        v = _nums(item["val"], vpath, 10)
        q = _unit_quaternion(v[3], v[4], v[5], v[6], vpath)
        if min(v[7:10]) <= 0:
            raise ParseError("cuboid size must be positive", vpath)
        return Cuboid(v[0:3], q, v[7:10])
    closed = item.get("closed", False)
    if not isinstance(closed, bool):
        raise ParseError("expected a boolean", f"{path}/closed")
    dim = 2 if kind is Kind.POLY2D else 3
    return Polyline(_parse_points(item["val"], vpath, dim), closed)


def _parse_frame(index: int, node: Any, path: str, objects: dict, sensors: dict) -> Frame:
    node = _dict(node, path)
    timestamp = None
    props = node.get("frame_properties")
    if props is not None:
        ts = _dict(props, f"{path}/frame_properties").get("timestamp")
        if ts is not None:
            tpath = f"{path}/frame_properties/timestamp"
            if isinstance(ts, str):
                try:
                    ts = float(ts)
                except ValueError:
                    raise ParseError("timestamp is not numeric", tpath) from None
            timestamp = _num(ts, tpath)
    annotations: list[Annotation] = []
    seen: set[str] = set()
    frame_objects = _dict(node.get("objects", {}), f"{path}/objects")
    for obj_uid, obj_node in frame_objects.items():
        opath = f"{path}/objects/{obj_uid}"
        if obj_uid not in objects:
            raise ParseError(f"reference to undeclared object {obj_uid!r}", opath)
        obj_node = _dict(obj_node, opath)
        data = _dict(obj_node.get("object_data", {}), f"{opath}/object_data")
        for key, items in data.items():
            kind = _KEY_KINDS.get(key)
            if kind is None:
                continue
            for i, item in enumerate(_list(items, f"{opath}/object_data/{key}")):
                ipath = f"{opath}/object_data/{key}/{i}"
                item = _dict(item, ipath)
                uid = _str(item.get("uid"), f"{ipath}/uid")
                if uid in seen:
                    raise ParseError(f"duplicate annotation uid {uid!r} in frame", f"{ipath}/uid")
                seen.add(uid)
                sensor = _str(item.get("coordinate_system"), f"{ipath}/coordinate_system")
                if sensor not in sensors:
                    raise ParseError(f"reference to undeclared sensor {sensor!r}", f"{ipath}/coordinate_system")
                geometry = _parse_geometry(kind, item, ipath)
                attrs = _parse_attributes(item.get("attributes", {}), f"{ipath}/attributes")
                annotations.append(Annotation(uid, obj_uid, kind, geometry, sensor, attrs))
    return Frame(index, tuple(annotations), timestamp)


def parse_scene(document: str | bytes, *, invert_extrinsics: bool = False) -> Scene:
    """Parse one OpenLABEL-style JSON document into a :class:`Scene`.

    Raises :class:`ParseError` (with a slash-separated path to the offending
    node) for anything structurally wrong. Never raises anything else.
    """
    try:
        if isinstance(document, (bytes, bytearray)):
            document = bytes(document).decode("utf-8")
        data = json.loads(document)
    except (UnicodeDecodeError, ValueError) as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    except RecursionError:
        raise ParseError("malformed JSON: nesting too deep") from None
    if not isinstance(data, dict) or ROOT_KEY not in data:
        raise ParseError("missing root", ROOT_KEY)
    root = _dict(data[ROOT_KEY], ROOT_KEY)

    version = SCHEMA_VERSION
    if root.get("metadata") is not None:
        meta = _dict(root["metadata"], f"{ROOT_KEY}/metadata")
        if "schema_version" in meta:
            version = _str(meta["schema_version"], f"{ROOT_KEY}/metadata/schema_version")

    sensors = _parse_sensors(root, invert_extrinsics)

    objects: dict[str, ObjectDecl] = {}
    for uid, node in _dict(root.get("objects", {}), f"{ROOT_KEY}/objects").items():
        path = f"{ROOT_KEY}/objects/{uid}"
        node = _dict(node, path)
        class_name = _str(node.get("type"), f"{path}/type")
        display = node.get("name", "")
        objects[uid] = ObjectDecl(uid, class_name, display if isinstance(display, str) else "")

    raw_frames = _dict(root.get("frames", {}), f"{ROOT_KEY}/frames")
    keyed: list[tuple[int, str]] = []
    for key in raw_frames:
        if not (key.isascii() and key.isdigit()):
            raise ParseError("frame key must be a non-negative integer", f"{ROOT_KEY}/frames/{key}")
        keyed.append((int(key), key))
    keyed.sort()
    frames: dict[int, Frame] = {}
    for index, key in keyed:
        if index in frames:
            raise ParseError(f"duplicate frame index {index}", f"{ROOT_KEY}/frames/{key}")
        frames[index] = _parse_frame(index, raw_frames[key], f"{ROOT_KEY}/frames/{key}", objects, sensors)

    return Scene(sensors, objects, frames, version)


def load_scene(path, *, invert_extrinsics: bool = False) -> Scene:
    with open(path, "rb") as fh:
        return parse_scene(fh.read(), invert_extrinsics=invert_extrinsics)


# --------------------------------------------------------------------------
# serialization

def _attributes_to_dict(attrs: dict[str, Any]) -> dict:
    groups: dict[str, list] = {}
    names = {"Text": "text", "Num": "num", "Bool": "boolean", "Vec": "vec"}
    for name, value in attrs.items():
        group = names[attr_type(value)]
        groups.setdefault(group, []).append({"name": name, "val": list(value) if group == "vec" else value})
    return groups


def _annotation_to_dict(ann: Annotation) -> dict:
    g = ann.geometry
    if ann.kind is Kind.BBOX2D:
        val = [*g.center, *g.size]
    elif ann.kind is Kind.CUBOID3D:
        qw, qx, qy, qz = g.quaternion
        val = [*g.center, qx, qy, qz, qw, *g.size]
    else:
        val = [c for p in g.points for c in p]
    out: dict[str, Any] = {"uid": ann.uid, "val": val, "coordinate_system": ann.sensor}
    if ann.kind in (Kind.POLY2D, Kind.POLY3D):
        out["closed"] = g.closed
        if ann.kind is Kind.POLY2D:
            out["mode"] = "MODE_POLY2D_ABSOLUTE"
    if ann.attributes:
        out["attributes"] = _attributes_to_dict(ann.attributes)
    return out


def scene_to_dict(scene: Scene) -> dict:
    """Inverse of :func:`parse_scene`.

    Annotations are written grouped by object, then by kind; a scene whose
    frames already list annotations in that grouping round-trips exactly.
    """
    streams: dict[str, Any] = {}
    coord_systems: dict[str, Any] = {"base": {"type": "local", "parent": "", "children": list(scene.sensors)}}
    for name, sensor in scene.sensors.items():
        stream: dict[str, Any] = {"type": sensor.modality.value.lower()}
        k = sensor.intrinsics
        if k is not None:
            pinhole: dict[str, Any] = {
                "camera_matrix": [k.fx, 0.0, k.cx, 0.0, 0.0, k.fy, k.cy, 0.0, 0.0, 0.0, 1.0, 0.0],
                "width_px": k.width,
                "height_px": k.height,
            }
            if k.distortion is not None:
                pinhole["distortion_coeffs"] = list(k.distortion)
            stream["stream_properties"] = {"intrinsics_pinhole": pinhole}
        streams[name] = stream
        cs: dict[str, Any] = {"type": "sensor", "parent": "base"}
        if sensor.pose is not None:
            p = sensor.pose
            cs["pose_wrt_parent"] = {"quaternion": [p.qx, p.qy, p.qz, p.qw], "translation": list(p.translation)}
        coord_systems[name] = cs

    frames: dict[str, Any] = {}
    for index, frame in scene.frames.items():
        objs: dict[str, Any] = {}
        for ann in frame.annotations:
            data = objs.setdefault(ann.object_uid, {"object_data": {}})["object_data"]
            data.setdefault(KIND_KEYS[ann.kind], []).append(_annotation_to_dict(ann))
        fnode: dict[str, Any] = {"objects": objs}
        if frame.timestamp is not None:
            fnode["frame_properties"] = {"timestamp": frame.timestamp}
        frames[str(index)] = fnode

    return {
        ROOT_KEY: {
            "metadata": {"schema_version": scene.schema_version},
            "streams": streams,
            "coordinate_systems": coord_systems,
            "objects": {
                uid: {"name": o.display_name, "type": o.class_name} for uid, o in scene.objects.items()
            },
            "frames": frames,
        }
    }


def dump_scene(scene: Scene, *, indent: int | None = None) -> str:
    return json.dumps(scene_to_dict(scene), indent=indent)
