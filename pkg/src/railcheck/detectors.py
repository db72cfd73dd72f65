"""The nine annotation issue detectors.

Every ``check_*`` function takes a parsed :class:`Scene` and a
:class:`RuleConfig` and returns a list of :class:`Issue`. Detectors never
raise on heterogeneous data: uncalibrated cameras, undeclared sensors and
unknown classes are skipped, and the reason is appended to the optional
``warnings`` list.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Any, Callable

from .config import WILDCARD, AXES, AttributeSpec, RuleConfig, Scope
from .geometry import GeometryError, ImageLine, horizon_line, vertical_overlap, x_at_row
from .issues import ALL_ISSUE_TYPES, Issue, IssueType, sort_issues
from .model import Annotation, Kind, Modality, Scene, attr_type
from .report import Report, build_report


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def _value_key(value: Any) -> tuple:
    # keeps True and 1.0 apart
    return (attr_type(value), tuple(value) if isinstance(value, list) else value)


def _same_value(a: Any, b: Any) -> bool:
    return _value_key(a) == _value_key(b)


def _numeric_equal(value: Any, target: float) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, (int, float)):
        return value == target
    if isinstance(value, str):
        try:
            return float(value) == target
        except ValueError:
            return False
    return False


def _value_ok(spec: AttributeSpec, value: Any) -> bool:
    if attr_type(value) != spec.value_type:
        return False
    if spec.allowed_values is None:
        return True
    if spec.value_type == "Vec":
        return all(v in spec.allowed_values for v in value)
    return value in spec.allowed_values


def _modality(scene: Scene, ann: Annotation) -> Modality:
    return scene.sensors[ann.sensor].modality


def _ann_issue(issue_type: IssueType, frame_index: int, ann: Annotation, message: str, **details) -> Issue:
    return Issue(issue_type, message, frame_index, ann.sensor, ann.object_uid, ann.uid,
                 {k: str(v) for k, v in details.items()})


def check_missing_attribute(scene: Scene, config: RuleConfig, warnings: list[str] | None = None) -> list[Issue]:
    issues = []
    for frame, ann in scene.annotations():
        schema = config.class_schemas.get(scene.class_of(ann))
        if schema is None:
            continue
        modality = _modality(scene, ann)
        for spec in schema.required:
            if spec.name not in ann.attributes and spec.applies(ann.kind, modality):
                issues.append(_ann_issue(
                    IssueType.MISSING_ATTRIBUTE, frame.index, ann,
                    f"{scene.class_of(ann)} annotation lacks required attribute {spec.name!r}",
                    attribute=spec.name,
                ))
    return issues


def check_unexpected_attribute(scene: Scene, config: RuleConfig, warnings: list[str] | None = None) -> list[Issue]:
    issues = []
    for frame, ann in scene.annotations():
        class_name = scene.class_of(ann)
        schema = config.class_schemas.get(class_name)
        if schema is None:
            continue
        modality = _modality(scene, ann)
        for name, value in ann.attributes.items():
            specs = schema.specs_for(name, ann.kind, modality)
            if not specs:
                reason = f"attribute {name!r} is not defined for class {class_name!r}"
            elif not any(_value_ok(s, value) for s in specs):
                reason = f"value {_fmt(value)!r} of attribute {name!r} violates the {class_name!r} schema"
            else:
                continue
            issues.append(_ann_issue(IssueType.UNEXPECTED_ATTRIBUTE, frame.index, ann, reason,
                                     attribute=name, value=_fmt(value)))
    return issues


def check_inconsistent_attribute_scope(scene: Scene, config: RuleConfig,
                                       warnings: list[str] | None = None) -> list[Issue]:
    issues = []
    for rule in config.scoped_attributes:
        per_frame = rule.scope is Scope.FRAME_CONSTANT
        # (object, frame|None) -> value key -> (value, first location)
        groups: dict[tuple, dict[tuple, tuple]] = defaultdict(dict)
        for frame, ann in scene.annotations():
            if rule.class_name != WILDCARD and scene.class_of(ann) != rule.class_name:
                continue
            if rule.attribute_name not in ann.attributes:
                continue
            value = ann.attributes[rule.attribute_name]
            key = (ann.object_uid, frame.index if per_frame else None)
            groups[key].setdefault(_value_key(value), (value, frame.index, ann.sensor, ann.uid))
        for (object_uid, frame_index), values in groups.items():
            if len(values) < 2:
                continue
            details = {"attribute": rule.attribute_name, "scope": rule.scope.value}
            for value, f, sensor, uid in values.values():
                details[f"value:{_fmt(value)}"] = f"frame {f}, sensor {sensor}, annotation {uid}"
            shown = ", ".join(repr(_fmt(v[0])) for v in values.values())
            where = f" in frame {frame_index}" if per_frame else ""
            issues.append(Issue(
                IssueType.INCONSISTENT_ATTRIBUTE_SCOPE,
                f"attribute {rule.attribute_name!r} of object {object_uid} takes {len(values)} values{where}: {shown}",
                frame_index, None, object_uid, None, details,
            ))
    return issues


def check_dimension_invalid(scene: Scene, config: RuleConfig, warnings: list[str] | None = None) -> list[Issue]:
    issues = []
    for frame, ann in scene.annotations():
        if ann.kind is not Kind.CUBOID3D or ann.sensor != config.merged_point_cloud_sensor:
            continue
        class_name = scene.class_of(ann)
        limits = config.dimension_limits.get(class_name, config.dimension_limits.get(WILDCARD))
        if limits is None:
            continue
        for axis, size in zip(AXES, ann.geometry.size):
            bound = getattr(limits, axis)
            if bound.max is not None and size > bound.max:
                kind, limit = "max", bound.max
            elif bound.min is not None and size < bound.min:
                kind, limit = "min", bound.min
            else:
                continue
            word = "exceeds" if kind == "max" else "is below"
            issues.append(_ann_issue(
                IssueType.DIMENSION_INVALID, frame.index, ann,
                f"{class_name} cuboid {axis} = {size:g} m {word} the {kind} of {limit:g} m",
                axis=axis, size=f"{size:g}", limit=f"{limit:g}", bound=kind,
            ))
    return issues


class _HorizonCache:
    def __init__(self, scene: Scene, config: RuleConfig, warnings: list[str] | None):
        self.scene = scene
        self.config = config
        self.warnings = warnings
        self.lines: dict[str, ImageLine | None] = {}

    def get(self, sensor_name: str) -> ImageLine | None:
        if sensor_name not in self.lines:
            sensor = self.scene.sensors[sensor_name]
            line = None
            if sensor.intrinsics is None or sensor.pose is None:
                self._warn(f"camera {sensor_name!r} has no calibration; horizon check skipped")
            else:
                try:
                    line = horizon_line(sensor.intrinsics, sensor.pose, self.config.horizon)
                except GeometryError as exc:
                    self._warn(f"camera {sensor_name!r}: {exc}; horizon check skipped")
            self.lines[sensor_name] = line
        return self.lines[sensor_name]

    def _warn(self, message: str) -> None:
        if self.warnings is not None:
            self.warnings.append(message)


def check_annotation_above_horizon(scene: Scene, config: RuleConfig,
                                   warnings: list[str] | None = None) -> list[Issue]:
    issues = []
    cache = _HorizonCache(scene, config, warnings)
    checked = config.horizon.checked_classes
    tolerance = config.horizon.tolerance_px
    for frame, ann in scene.annotations():
        if ann.kind is not Kind.POLY2D or _modality(scene, ann) is not Modality.CAMERA:
            continue
        if scene.class_of(ann) not in checked:
            continue
        line = cache.get(ann.sensor)
        if line is None:
            continue
        height, point = max((line.evaluate(p[0], p[1]), p) for p in ann.geometry.points)
        if height > tolerance:
            issues.append(_ann_issue(
                IssueType.ANNOTATION_ABOVE_HORIZON, frame.index, ann,
                f"{scene.class_of(ann)} polyline reaches {height:.1f} px above the horizon",
                point=f"({point[0]:.2f}, {point[1]:.2f})", distance_px=f"{height:.3f}",
            ))
    return issues


def check_missing_ego_track(scene: Scene, config: RuleConfig, warnings: list[str] | None = None) -> list[Issue]:
    ego = config.ego
    sensors = []
    for name in ego.required_sensors:
        if name in scene.sensors:
            sensors.append(name)
        elif warnings is not None:
            warnings.append(f"ego-track sensor {name!r} is not declared in the scene; check skipped for it")
    issues = []
    for frame in scene.frames.values():
        present = set()
        for ann in frame.annotations:
            if (ann.sensor in sensors and scene.class_of(ann) == ego.track_class
                    and _numeric_equal(ann.attributes.get(ego.track_id_attribute), ego.ego_value)):
                present.add(ann.sensor)
        for name in sensors:
            if name not in present:
                issues.append(Issue(
                    IssueType.MISSING_EGO_TRACK,
                    f"no {ego.track_class} with {ego.track_id_attribute}={_fmt(ego.ego_value)} in sensor {name}",
                    frame.index, name, None, None,
                    {"sensor": name, ego.track_id_attribute: _fmt(ego.ego_value)},
                ))
    return issues


def _rail_groups(scene: Scene, config: RuleConfig) -> dict[tuple, dict[str, list[Annotation]]]:
    rail = config.rail
    groups: dict[tuple, dict[str, list[Annotation]]] = defaultdict(lambda: {"left": [], "right": []})
    for frame, ann in scene.annotations():
        if ann.kind is not Kind.POLY2D or _modality(scene, ann) is not Modality.CAMERA:
            continue
        if scene.class_of(ann) != rail.track_class:
            continue
        side = ann.attributes.get(rail.rail_side_attribute)
        if side == rail.left_value:
            groups[(ann.object_uid, frame.index, ann.sensor)]["left"].append(ann)
        elif side == rail.right_value:
            groups[(ann.object_uid, frame.index, ann.sensor)]["right"].append(ann)
    return groups


def check_rail_side_count(scene: Scene, config: RuleConfig, warnings: list[str] | None = None) -> list[Issue]:
    issues = []
    for (object_uid, frame_index, sensor), sides in _rail_groups(scene, config).items():
        for side, anns in sides.items():
            if len(anns) > 1:
                issues.append(Issue(
                    IssueType.RAIL_SIDE_COUNT,
                    f"track {object_uid} has {len(anns)} {side} rails in {sensor}",
                    frame_index, sensor, object_uid, None,
                    {"side": side, "count": str(len(anns)), "annotations": ",".join(a.uid for a in anns)},
                ))
    return issues


def check_rail_side_order(scene: Scene, config: RuleConfig, warnings: list[str] | None = None) -> list[Issue]:
    issues = []
    for (object_uid, frame_index, sensor), sides in _rail_groups(scene, config).items():
        if len(sides["left"]) != 1 or len(sides["right"]) != 1:
            continue
        left, right = sides["left"][0], sides["right"][0]
        overlap = vertical_overlap(left.geometry.points, right.geometry.points)
        if overlap is None:
            continue
        row = overlap[1]  # bottom-most shared row, nearest the vehicle
        us_left = x_at_row(left.geometry.points, row, left.geometry.closed)
        us_right = x_at_row(right.geometry.points, row, right.geometry.closed)
        if not us_left or not us_right:
            continue
        u_left = sum(us_left) / len(us_left)
        u_right = sum(us_right) / len(us_right)
        if u_left >= u_right:
            issues.append(Issue(
                IssueType.RAIL_SIDE_ORDER,
                f"left rail of track {object_uid} is not left of its right rail at row {row:.1f} in {sensor}",
                frame_index, sensor, object_uid, None,
                {"left_annotation": left.uid, "right_annotation": right.uid, "row": f"{row:.2f}",
                 "u_left": f"{u_left:.2f}", "u_right": f"{u_right:.2f}"},
            ))
    return issues


def check_transition_identical_start_and_end(scene: Scene, config: RuleConfig,
                                             warnings: list[str] | None = None) -> list[Issue]:
    cfg = config.transition
    issues = []
    for frame, ann in scene.annotations():
        if scene.class_of(ann) != cfg.transition_class:
            continue
        if cfg.from_attribute not in ann.attributes or cfg.to_attribute not in ann.attributes:
            continue
        start, end = ann.attributes[cfg.from_attribute], ann.attributes[cfg.to_attribute]
        if _same_value(start, end):
            issues.append(_ann_issue(
                IssueType.TRANSITION_IDENTICAL_START_AND_END, frame.index, ann,
                f"transition starts and ends on track {_fmt(start)}",
                **{cfg.from_attribute: _fmt(start), cfg.to_attribute: _fmt(end)},
            ))
    return issues


CHECKS: dict[IssueType, Callable[..., list[Issue]]] = {
    IssueType.ANNOTATION_ABOVE_HORIZON: check_annotation_above_horizon,
    IssueType.DIMENSION_INVALID: check_dimension_invalid,
    IssueType.INCONSISTENT_ATTRIBUTE_SCOPE: check_inconsistent_attribute_scope,
    IssueType.MISSING_ATTRIBUTE: check_missing_attribute,
    IssueType.MISSING_EGO_TRACK: check_missing_ego_track,
    IssueType.RAIL_SIDE_COUNT: check_rail_side_count,
    IssueType.RAIL_SIDE_ORDER: check_rail_side_order,
    IssueType.TRANSITION_IDENTICAL_START_AND_END: check_transition_identical_start_and_end,
    IssueType.UNEXPECTED_ATTRIBUTE: check_unexpected_attribute,
}


def run_checks(scene: Scene, config: RuleConfig, scene_id: str = "") -> Report:
    issues: list[Issue] = []
    warnings: list[str] = []
    for issue_type in ALL_ISSUE_TYPES:
        if config.enabled(issue_type):
            issues.extend(CHECKS[issue_type](scene, config, warnings))
    disabled = [t.value for t in ALL_ISSUE_TYPES if not config.enabled(t)]
    if disabled:
        warnings.append("disabled checks: " + ", ".join(disabled))
    return build_report(scene, sort_issues(issues), warnings, scene_id=scene_id)
