"""Synthetic clean scenes and targeted fault injection.

``generate_scene`` builds a scene that passes every check under the default
config by construction: rails are straight-ish ground curves projected
through each camera (so they sit below the horizon and keep their left/right
order), sizes stay inside the class limits, and every required attribute is
present. ``inject_fault`` then applies one minimal mutation that creates a
single instance of a chosen issue type and reports where the detector is
expected to find it.
"""

from __future__ import annotations

import math
import random
import uuid
from dataclasses import dataclass, replace

from .config import RuleConfig, Scope, default_config
from .geometry import camera_pose, horizon_line, project_point
from .issues import IssueType
from .model import (
    Annotation,
    Bbox2D,
    CameraIntrinsics,
    Cuboid,
    Frame,
    Kind,
    Modality,
    ObjectDecl,
    Polyline,
    Pose,
    Scene,
    Sensor,
)

CAMERA_NAMES = (
    "rgb_center", "rgb_left", "rgb_right",
    "ir_center", "ir_left", "ir_right",
    "rgb_highres_center", "rgb_highres_left", "rgb_highres_right",
)
LIDAR_NAME = "lidar"
HALF_GAUGE = 0.7175
TRACK_SPACING = 4.5
ABOVE_HORIZON_PX = 50.0
OVERSIZED_PERSON_M = 3.2

_OCCLUSIONS = ("0-25 %", "25-50 %", "50-75 %")
_POSES = ("upright", "sitting", "lying", "other")
_SPECIES = ("deer", "dog", "fox", "horse", "sheep")


class InjectError(ValueError):
    pass


@dataclass(frozen=True)
class GenParams:
    seed: int = 0
    frames: int = 2
    tracks_per_frame: int = 2
    cameras: int = 3
    persons: int = 1
    poles: int = 1
    animals: int = 1
    transitions: int = 1
    include_lidar: bool = True

    def validate(self) -> None:
        counts = (self.frames, self.tracks_per_frame, self.cameras, self.persons,
                  self.poles, self.animals, self.transitions)
        if min(counts) < 0:
            raise ValueError("generator counts must be >= 0")
        if self.frames and (self.cameras < 1 or self.tracks_per_frame < 1):
            raise ValueError("need at least one camera and one track for the ego-track check")
        if self.cameras > len(CAMERA_NAMES):
            raise ValueError(f"at most {len(CAMERA_NAMES)} cameras")


@dataclass(frozen=True)
class FaultSpec:
    issue_type: IssueType
    target: str | None = None  # annotation uid, or object uid for object-level faults


@dataclass(frozen=True)
class ExpectedIssue:
    """Where the detector must report the injected fault.

    ``None`` location fields match anything. ``collateral`` lists other
    issue types the mutation unavoidably triggers.
    """

    issue_type: IssueType
    frame_index: int | None = None
    sensor: str | None = None
    object_uid: str | None = None
    annotation_uid: str | None = None
    collateral: frozenset[IssueType] = frozenset()

    def matches(self, issue) -> bool:
        if issue.issue_type is not self.issue_type:
            return False
        for name in ("frame_index", "sensor", "object_uid", "annotation_uid"):
            want = getattr(self, name)
            if want is not None and getattr(issue, name) != want:
                return False
        return True


# --------------------------------------------------------------------------
# generation

def _uid(rng: random.Random) -> str:
    return str(uuid.UUID(int=rng.getrandbits(128), version=4))


def _track_ids(n: int) -> list[int]:
    ids = [0]
    k = 1
    while len(ids) < n:
        ids.append(-k)
        if len(ids) < n:
            ids.append(k)
        k += 1
    return ids


def _make_camera(rng: random.Random, name: str, centered: bool) -> Sensor:
    width, height = 1920, 1200
    f = rng.uniform(1200.0, 2600.0)
    intr = CameraIntrinsics(
        fx=f, fy=f * rng.uniform(0.99, 1.01),
        cx=width / 2 + rng.uniform(-30, 30), cy=height / 2 + rng.uniform(-30, 30),
        width=width, height=height,
    )
    yaw = 0.0 if centered else math.radians(rng.uniform(-15, 15))
    pose = camera_pose(
        yaw, math.radians(rng.uniform(-20, -2)), math.radians(rng.uniform(-5, 5)),
        (rng.uniform(1.5, 2.5), rng.uniform(-0.5, 0.5), rng.uniform(2.5, 3.5)),
    )
    return Sensor(name, Modality.CAMERA, intr, pose)


def _project_all(sensor: Sensor, points) -> tuple[tuple[float, float], ...]:
    out = []
    for p in points:
        uv = project_point(sensor.intrinsics, sensor.pose, p)
        if uv is None:
            raise RuntimeError(f"generated point {p} is behind camera {sensor.name}")
        out.append(uv)
    return tuple(out)


def _random_box(rng: random.Random, sensor: Sensor) -> Bbox2D:
    k = sensor.intrinsics
    return Bbox2D(
        (rng.uniform(100, k.width - 100), rng.uniform(k.height / 2, k.height - 100)),
        (rng.uniform(20, 120), rng.uniform(40, 300)),
    )


def _yaw_quaternion(rng: random.Random) -> tuple[float, float, float, float]:
    half = rng.uniform(-math.pi, math.pi) / 2
    return (math.cos(half), 0.0, 0.0, math.sin(half))


def generate_scene(params: GenParams) -> Scene:
    """Build a scene that is clean under ``default_config()``; deterministic per seed."""
    params.validate()
    rng = random.Random(params.seed)

    cameras = [_make_camera(rng, CAMERA_NAMES[i], i == 0) for i in range(params.cameras)]
    sensors = {c.name: c for c in cameras}
    if params.include_lidar:
        sensors[LIDAR_NAME] = Sensor(LIDAR_NAME, Modality.LIDAR, None, Pose(1.0, 0.0, 0.0, 0.0))

    objects: dict[str, ObjectDecl] = {}

    def declare(class_name: str, n: int) -> list[str]:
        uids = []
        for i in range(n):
            uid = _uid(rng)
            objects[uid] = ObjectDecl(uid, class_name, f"{class_name}_{i}")
            uids.append(uid)
        return uids

    track_ids = _track_ids(params.tracks_per_frame)
    tracks = list(zip(declare("track", params.tracks_per_frame), track_ids))
    transitions = declare("transition", params.transitions)
    persons = [(uid, rng.choice(("adult", "child"))) for uid in declare("person", params.persons)]
    poles = [(uid, rng.choice(("structured", "solid"))) for uid in declare("catenary_pole", params.poles)]
    animals = [(uid, rng.choice(_SPECIES)) for uid in declare("animal", params.animals)]

    max_offset = max((abs(t) for t in track_ids), default=0) * TRACK_SPACING
    x_start = max(8.0, 1.5 * max_offset)
    lidar = params.include_lidar

    def camera_attrs(attrs: dict) -> dict:
        out = dict(attrs)
        if rng.random() < 0.3:
            out["occlusion"] = rng.choice(_OCCLUSIONS)
        return out

    frames: dict[int, Frame] = {}
    for index in range(params.frames):
        anns: list[Annotation] = []

        def add(obj: str, kind: Kind, geometry, sensor: str, attrs: dict) -> None:
            anns.append(Annotation(_uid(rng), obj, kind, geometry, sensor, attrs))

        for obj, track_id in tracks:
            y0 = -track_id * TRACK_SPACING
            curve = rng.uniform(-1e-4, 1e-4)
            x_near = x_start + rng.uniform(0, 4)
            xs = [x_near + i * (rng.uniform(40, 120) / 4) for i in range(rng.randint(3, 6))]
            rails = {
                "leftRail": [(x, y0 + HALF_GAUGE + curve * x * x, 0.0) for x in xs],
                "rightRail": [(x, y0 - HALF_GAUGE + curve * x * x, 0.0) for x in xs],
            }
            base = {"trackID": float(track_id)}
            for cam in cameras:
                for side, pts in rails.items():
                    add(obj, Kind.POLY2D, Polyline(_project_all(cam, pts)), cam.name,
                        camera_attrs({**base, "railSide": side}))
            if lidar:
                for side, pts in rails.items():
                    add(obj, Kind.POLY3D, Polyline(tuple(pts)), LIDAR_NAME, {**base, "railSide": side})

        for obj in transitions:
            start, end = 0.0, -1.0 if params.tracks_per_frame < 2 or rng.random() < 0.5 else 1.0
            x0 = x_start + rng.uniform(0, 10)
            pts = [
                (x0 + 6.0 * i, -start * TRACK_SPACING + (-(end - start) * TRACK_SPACING) * i / 4, 0.0)
                for i in range(5)
            ]
            attrs = {"fromTrackID": start, "toTrackID": end}
            add(obj, Kind.POLY2D, Polyline(_project_all(cameras[0], pts)), cameras[0].name, dict(attrs))
            if lidar:
                add(obj, Kind.POLY3D, Polyline(tuple(pts)), LIDAR_NAME, dict(attrs))

        for obj, age in persons:
            pose = rng.choice(_POSES)
            for cam in cameras:
                add(obj, Kind.BBOX2D, _random_box(rng, cam), cam.name, camera_attrs({"age": age, "pose": pose}))
            if lidar:
                size = (rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8), rng.uniform(1.4, 1.95))
                center = (rng.uniform(10, 60), rng.uniform(-10, 10), size[2] / 2)
                add(obj, Kind.CUBOID3D, Cuboid(center, _yaw_quaternion(rng), size), LIDAR_NAME,
                    {"age": age, "pose": pose})

        for obj, structure in poles:
            for cam in cameras:
                add(obj, Kind.BBOX2D, _random_box(rng, cam), cam.name, camera_attrs({"type": structure}))
            if lidar:
                size = (rng.uniform(0.2, 0.6), rng.uniform(0.2, 0.6), rng.uniform(6.0, 10.0))
                center = (rng.uniform(10, 80), rng.uniform(3, 8) * rng.choice((-1, 1)), size[2] / 2)
                add(obj, Kind.CUBOID3D, Cuboid(center, _yaw_quaternion(rng), size), LIDAR_NAME,
                    {"type": structure})

        for obj, species in animals:
            for cam in cameras:
                add(obj, Kind.BBOX2D, _random_box(rng, cam), cam.name, camera_attrs({"Species": species}))
            if lidar:
                size = (rng.uniform(0.3, 1.5), rng.uniform(0.2, 0.6), rng.uniform(0.3, 1.5))
                center = (rng.uniform(10, 60), rng.uniform(-10, 10), size[2] / 2)
                add(obj, Kind.CUBOID3D, Cuboid(center, _yaw_quaternion(rng), size), LIDAR_NAME,
                    {"Species": species})

        frames[index] = Frame(index, tuple(anns), timestamp=round(1_600_000_000 + index * 0.1, 3))

    return Scene(sensors, objects, frames)


# --------------------------------------------------------------------------
# injection

def _replace_annotations(scene: Scene, frame_index: int, old: Annotation, new: list[Annotation]) -> Scene:
    frame = scene.frames[frame_index]
    anns = []
    for ann in frame.annotations:
        if ann is old:
            anns.extend(new)
        else:
            anns.append(ann)
    frames = dict(scene.frames)
    frames[frame_index] = replace(frame, annotations=tuple(anns))
    return replace(scene, frames=frames)


def _with_attributes(ann: Annotation, **changes) -> Annotation:
    attrs = dict(ann.attributes)
    for k, v in changes.items():
        if v is None:
            attrs.pop(k, None)
        else:
            attrs[k] = v
    return replace(ann, attributes=attrs)


def _pick(rng: random.Random, candidates: list, target: str | None, key, what: str):
    if target is not None:
        candidates = [c for c in candidates if target in key(c)]
    if not candidates:
        raise InjectError(f"no applicable target for {what}" + (f" matching {target!r}" if target else ""))
    return rng.choice(candidates)


def _ann_expected(issue_type: IssueType, frame_index: int, ann: Annotation, **kw) -> ExpectedIssue:
    return ExpectedIssue(issue_type, frame_index, ann.sensor, ann.object_uid, ann.uid, **kw)


def _inject_missing_attribute(scene, cfg, rng, target, exclude):
    cands = []
    for frame, ann in scene.annotations():
        if ann.object_uid in exclude:
            continue
        schema = cfg.class_schemas.get(scene.class_of(ann))
        if schema is None:
            continue
        modality = scene.sensors[ann.sensor].modality
        for spec in schema.required:
            if spec.name in ann.attributes and spec.applies(ann.kind, modality):
                cands.append((frame.index, ann, spec.name))
    f, ann, name = _pick(rng, cands, target, lambda c: (c[1].uid, c[1].object_uid), "MissingAttribute")
    mutated = _replace_annotations(scene, f, ann, [_with_attributes(ann, **{name: None})])
    return mutated, _ann_expected(IssueType.MISSING_ATTRIBUTE, f, ann), ann.object_uid


def _inject_unexpected_attribute(scene, cfg, rng, target, exclude):
    cands = [
        (frame.index, ann) for frame, ann in scene.annotations()
        if scene.class_of(ann) == "person" and "Species" not in ann.attributes and ann.object_uid not in exclude
    ]
    f, ann = _pick(rng, cands, target, lambda c: (c[1].uid, c[1].object_uid), "UnexpectedAttribute (person)")
    new = _with_attributes(ann, Species=rng.choice(_SPECIES))
    return _replace_annotations(scene, f, ann, [new]), _ann_expected(IssueType.UNEXPECTED_ATTRIBUTE, f, ann), ann.object_uid


def _inject_inconsistent_scope(scene, cfg, rng, target, exclude):
    cands = []
    for rule in cfg.scoped_attributes:
        groups: dict[tuple, list] = {}
        for frame, ann in scene.annotations():
            cls = scene.class_of(ann)
            if rule.class_name not in ("*", cls) or rule.attribute_name not in ann.attributes:
                continue
            if ann.object_uid in exclude:
                continue
            key = (ann.object_uid, frame.index if rule.scope is Scope.FRAME_CONSTANT else None)
            groups.setdefault(key, []).append((frame.index, ann, cls))
        for (obj, fidx), members in groups.items():
            values = {repr(m[1].attributes[rule.attribute_name]) for m in members}
            if len(members) < 2 or len(values) != 1:
                continue
            schema = cfg.class_schemas.get(members[0][2])
            current = members[0][1].attributes[rule.attribute_name]
            allowed = set()
            if schema is not None:
                for spec in (*schema.required, *schema.optional):
                    if spec.name == rule.attribute_name and spec.allowed_values:
                        allowed |= {v for v in spec.allowed_values if v != current}
            if allowed:
                cands.append((rule, obj, fidx, members, sorted(allowed, key=repr)))
    rule, obj, fidx, members, alternatives = _pick(
        rng, cands, target, lambda c: (c[1],), "InconsistentAttributeScope"
    )
    f, ann, _ = rng.choice(members[1:])
    new = _with_attributes(ann, **{rule.attribute_name: rng.choice(alternatives)})
    expected = ExpectedIssue(IssueType.INCONSISTENT_ATTRIBUTE_SCOPE, fidx, None, obj, None)
    return _replace_annotations(scene, f, ann, [new]), expected, obj


def _inject_dimension_invalid(scene, cfg, rng, target, exclude):
    cands = [
        (frame.index, ann) for frame, ann in scene.annotations()
        if ann.kind is Kind.CUBOID3D and ann.sensor == cfg.merged_point_cloud_sensor
        and scene.class_of(ann) == "person" and ann.object_uid not in exclude
    ]
    f, ann = _pick(rng, cands, target, lambda c: (c[1].uid, c[1].object_uid), "DimensionInvalid (person cuboid)")
    g = ann.geometry
    size = (g.size[0], g.size[1], OVERSIZED_PERSON_M)
    new = replace(ann, geometry=Cuboid((g.center[0], g.center[1], size[2] / 2), g.quaternion, size))
    return _replace_annotations(scene, f, ann, [new]), _ann_expected(IssueType.DIMENSION_INVALID, f, ann), ann.object_uid


def _inject_above_horizon(scene, cfg, rng, target, exclude):
    cands = []
    for frame, ann in scene.annotations():
        sensor = scene.sensors[ann.sensor]
        if (ann.kind is Kind.POLY2D and sensor.modality is Modality.CAMERA and sensor.intrinsics
                and sensor.pose and scene.class_of(ann) in cfg.horizon.checked_classes
                and ann.object_uid not in exclude):
            cands.append((frame.index, ann))
    f, ann = _pick(rng, cands, target, lambda c: (c[1].uid, c[1].object_uid), "AnnotationAboveHorizon")
    sensor = scene.sensors[ann.sensor]
    line = horizon_line(sensor.intrinsics, sensor.pose, cfg.horizon)
    points = list(ann.geometry.points)
    i = max(range(len(points)), key=lambda k: line.evaluate(*points[k]))
    u, v = points[i]
    lift = ABOVE_HORIZON_PX + cfg.horizon.tolerance_px - line.evaluate(u, v)
    points[i] = (u + lift * line.a, v + lift * line.b)
    new = replace(ann, geometry=replace(ann.geometry, points=tuple(points)))
    expected = _ann_expected(IssueType.ANNOTATION_ABOVE_HORIZON, f, ann)
    return _replace_annotations(scene, f, ann, [new]), expected, ann.object_uid


def _ego_presence(scene: Scene, cfg: RuleConfig) -> dict[str, list[tuple[int, str]]]:
    """object uid -> [(frame, sensor)] where it serves as the ego track."""
    ego = cfg.ego
    found: dict[str, list[tuple[int, str]]] = {}
    for frame, ann in scene.annotations():
        if (ann.sensor in ego.required_sensors and scene.class_of(ann) == ego.track_class
                and ann.attributes.get(ego.track_id_attribute) == ego.ego_value):
            where = (frame.index, ann.sensor)
            if where not in found.setdefault(ann.object_uid, []):
                found[ann.object_uid].append(where)
    return found


def _inject_missing_ego(scene, cfg, rng, target, exclude):
    presence = _ego_presence(scene, cfg)
    cands = sorted(uid for uid in presence if uid not in exclude)
    obj = _pick(rng, cands, target, lambda c: (c,), "MissingEgoTrack")
    objects = dict(scene.objects)
    objects[obj] = replace(objects[obj], class_name="person")
    mutated = replace(scene, objects=objects)
    remaining = {w for locs in _ego_presence(mutated, cfg).values() for w in locs}
    lost = [w for w in presence[obj] if w not in remaining]
    if not lost:
        raise InjectError("another ego track covers every frame; relabeling changes nothing")
    order = {name: i for i, name in enumerate(cfg.ego.required_sensors)}
    frame_index, sensor = min(lost, key=lambda w: (order.get(w[1], len(order)), w[0]))
    expected = ExpectedIssue(IssueType.MISSING_EGO_TRACK, frame_index, sensor, None, None,
                             collateral=frozenset({IssueType.UNEXPECTED_ATTRIBUTE}))
    return mutated, expected, obj


def _rail_groups(scene: Scene, cfg: RuleConfig, exclude) -> dict[tuple, dict[str, list]]:
    rail = cfg.rail
    groups: dict[tuple, dict[str, list]] = {}
    for frame, ann in scene.annotations():
        if ann.kind is not Kind.POLY2D or scene.sensors[ann.sensor].modality is not Modality.CAMERA:
            continue
        if scene.class_of(ann) != rail.track_class or ann.object_uid in exclude:
            continue
        side = ann.attributes.get(rail.rail_side_attribute)
        group = groups.setdefault((ann.object_uid, frame.index, ann.sensor), {"left": [], "right": []})
        if side == rail.left_value:
            group["left"].append(ann)
        elif side == rail.right_value:
            group["right"].append(ann)
    return groups


def _inject_rail_side_count(scene, cfg, rng, target, exclude):
    cands = [(key, sides["left"][0]) for key, sides in _rail_groups(scene, cfg, exclude).items()
             if len(sides["left"]) == 1]
    (obj, f, sensor), ann = _pick(rng, cands, target, lambda c: (c[1].uid, c[0][0]), "RailSideCount")
    copy = replace(ann, uid=_uid(rng))
    expected = ExpectedIssue(IssueType.RAIL_SIDE_COUNT, f, sensor, obj, None)
    return _replace_annotations(scene, f, ann, [ann, copy]), expected, obj


def _inject_rail_side_order(scene, cfg, rng, target, exclude):
    cands = [(key, sides) for key, sides in _rail_groups(scene, cfg, exclude).items()
             if len(sides["left"]) == 1 and len(sides["right"]) == 1]
    (obj, f, sensor), sides = _pick(rng, cands, target, lambda c: (c[0][0],), "RailSideOrder")
    rail = cfg.rail
    left, right = sides["left"][0], sides["right"][0]
    mutated = _replace_annotations(scene, f, left, [_with_attributes(left, **{rail.rail_side_attribute: rail.right_value})])
    mutated = _replace_annotations(mutated, f, right,
                                   [_with_attributes(right, **{rail.rail_side_attribute: rail.left_value})])
    return mutated, ExpectedIssue(IssueType.RAIL_SIDE_ORDER, f, sensor, obj, None), obj


def _inject_transition(scene, cfg, rng, target, exclude):
    t = cfg.transition
    cands = [
        (frame.index, ann) for frame, ann in scene.annotations()
        if scene.class_of(ann) == t.transition_class and ann.object_uid not in exclude
        and t.from_attribute in ann.attributes and t.to_attribute in ann.attributes
        and ann.attributes[t.from_attribute] != ann.attributes[t.to_attribute]
    ]
    f, ann = _pick(rng, cands, target, lambda c: (c[1].uid, c[1].object_uid), "TransitionIdenticalStartAndEnd")
    new = _with_attributes(ann, **{t.to_attribute: ann.attributes[t.from_attribute]})
    expected = _ann_expected(IssueType.TRANSITION_IDENTICAL_START_AND_END, f, ann)
    return _replace_annotations(scene, f, ann, [new]), expected, ann.object_uid


_INJECTORS = {
    IssueType.MISSING_ATTRIBUTE: _inject_missing_attribute,
    IssueType.UNEXPECTED_ATTRIBUTE: _inject_unexpected_attribute,
    IssueType.INCONSISTENT_ATTRIBUTE_SCOPE: _inject_inconsistent_scope,
    IssueType.DIMENSION_INVALID: _inject_dimension_invalid,
    IssueType.ANNOTATION_ABOVE_HORIZON: _inject_above_horizon,
    IssueType.MISSING_EGO_TRACK: _inject_missing_ego,
    IssueType.RAIL_SIDE_COUNT: _inject_rail_side_count,
    IssueType.RAIL_SIDE_ORDER: _inject_rail_side_order,
    IssueType.TRANSITION_IDENTICAL_START_AND_END: _inject_transition,
}


def inject_fault(scene: Scene, spec: FaultSpec, seed: int = 0, *,
                 config: RuleConfig | None = None,
                 exclude_objects=frozenset()) -> tuple[Scene, ExpectedIssue]:
    """Return a mutated copy of ``scene`` with one fault of ``spec.issue_type``.

    Targets are drawn with ``random.Random(seed)`` from the applicable
    elements, skipping objects in ``exclude_objects``. Raises
    :class:`InjectError` when nothing applicable exists.
    """
    mutated, expected, _ = _inject(scene, spec, seed, config, exclude_objects)
    return mutated, expected


def _inject(scene, spec, seed, config, exclude):
    cfg = config or default_config()
    issue_type = IssueType.parse(str(spec.issue_type))
    rng = random.Random(seed)
    return _INJECTORS[issue_type](scene, cfg, rng, spec.target, frozenset(exclude))


# ego relabeling goes first so that later rail faults land on other tracks
INJECTION_ORDER = (
    IssueType.MISSING_EGO_TRACK,
    IssueType.DIMENSION_INVALID,
    IssueType.UNEXPECTED_ATTRIBUTE,
    IssueType.INCONSISTENT_ATTRIBUTE_SCOPE,
    IssueType.TRANSITION_IDENTICAL_START_AND_END,
    IssueType.ANNOTATION_ABOVE_HORIZON,
    IssueType.RAIL_SIDE_ORDER,
    IssueType.RAIL_SIDE_COUNT,
    IssueType.MISSING_ATTRIBUTE,
)


def inject_faults(scene: Scene, issue_types, seed: int = 0, *,
                  config: RuleConfig | None = None) -> tuple[Scene, list[ExpectedIssue]]:
    """Inject several faults, each on a different object where possible."""
    wanted = {IssueType.parse(str(t)) for t in issue_types}
    touched: set[str] = set()
    expected = []
    for n, issue_type in enumerate(t for t in INJECTION_ORDER if t in wanted):
        spec = FaultSpec(issue_type)
        try:
            scene, exp, obj = _inject(scene, spec, seed + n, config, touched)
        except InjectError:
            scene, exp, obj = _inject(scene, spec, seed + n, config, frozenset())
        touched.add(obj)
        expected.append(exp)
    return scene, expected

