"""Rule configuration: attribute schemas, size limits, scope rules and tolerances.

The shipped defaults are an approximation of the OSDaR23 labeling guide;
class names, attribute names and limits are guesses that every user with
access to the real guide is expected to override. ``docs/config.md``
documents the JSON layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any

from .issues import ALL_ISSUE_TYPES, IssueType
from .model import Kind, Modality

WILDCARD = "*"
AXES = ("sx", "sy", "sz")
VALUE_TYPES = ("Text", "Num", "Bool", "Vec")


class ConfigError(ValueError):
    pass


class Scope(str, Enum):
    OBJECT_CONSTANT = "ObjectConstant"
    FRAME_CONSTANT = "FrameConstant"


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    value_type: str
    allowed_values: frozenset | None = None
    kinds: frozenset[Kind] | None = None
    modalities: frozenset[Modality] | None = None

    def applies(self, kind: Kind, modality: Modality) -> bool:
        if self.kinds is not None and kind not in self.kinds:
            return False
        if self.modalities is not None and modality not in self.modalities:
            return False
        return True


@dataclass(frozen=True)
class ClassSchema:
    required: tuple[AttributeSpec, ...] = ()
    optional: tuple[AttributeSpec, ...] = ()

    def specs_for(self, name: str, kind: Kind, modality: Modality) -> list[AttributeSpec]:
        return [s for s in (*self.required, *self.optional) if s.name == name and s.applies(kind, modality)]


@dataclass(frozen=True)
class Bound:
    min: float | None = None
    max: float | None = None


@dataclass(frozen=True)
class DimLimits:
    sx: Bound = Bound()
    sy: Bound = Bound()
    sz: Bound = Bound()


@dataclass(frozen=True)
class ScopeRule:
    class_name: str
    attribute_name: str
    scope: Scope


@dataclass(frozen=True)
class EgoConfig:
    track_class: str = "track"
    track_id_attribute: str = "trackID"
    ego_value: float = 0.0
    required_sensors: tuple[str, ...] = ("rgb_center", "lidar")


@dataclass(frozen=True)
class HorizonConfig:
    ground_normal_vehicle: tuple[float, float, float] = (0.0, 0.0, 1.0)
    ground_height: float = 0.0
    tolerance_px: float = 0.0
    checked_classes: frozenset[str] = frozenset({"track"})


@dataclass(frozen=True)
class RailConfig:
    rail_side_attribute: str = "railSide"
    left_value: str = "leftRail"
    right_value: str = "rightRail"
    track_class: str = "track"


@dataclass(frozen=True)
class TransitionConfig:
    transition_class: str = "transition"
    from_attribute: str = "fromTrackID"
    to_attribute: str = "toTrackID"


@dataclass(frozen=True)
class RuleConfig:
    class_schemas: dict[str, ClassSchema] = field(default_factory=dict)
    dimension_limits: dict[str, DimLimits] = field(default_factory=dict)
    scoped_attributes: tuple[ScopeRule, ...] = ()
    ego: EgoConfig = EgoConfig()
    horizon: HorizonConfig = HorizonConfig()
    rail: RailConfig = RailConfig()
    transition: TransitionConfig = TransitionConfig()
    merged_point_cloud_sensor: str = "lidar"
    check_selection: frozenset[IssueType] = frozenset(ALL_ISSUE_TYPES)

    def enabled(self, issue_type: IssueType) -> bool:
        return issue_type in self.check_selection

    def with_checks(self, checks) -> RuleConfig:
        return replace(self, check_selection=frozenset(IssueType.parse(str(c)) for c in checks))


# --------------------------------------------------------------------------
# defaults

_OCCLUSION = frozenset({"0-25 %", "25-50 %", "50-75 %", "75-99 %", "100 %"})
_CAMERA = frozenset({Modality.CAMERA})
_RAIL_KINDS = frozenset({Kind.POLY2D, Kind.POLY3D})


def _common_optional() -> tuple[AttributeSpec, ...]:
    return (
        AttributeSpec("occlusion", "Text", _OCCLUSION, modalities=_CAMERA),
        AttributeSpec("truncation", "Text", _OCCLUSION, modalities=_CAMERA),
    )


def _schema(required=(), optional=()) -> ClassSchema:
    return ClassSchema(tuple(required), tuple(optional) + _common_optional())


def default_config() -> RuleConfig:
    text, num, boolean = "Text", "Num", "Bool"
    schemas = {
        "person": _schema(optional=[
            AttributeSpec("pose", text, frozenset({"upright", "sitting", "lying", "other"})),
            AttributeSpec("age", text, frozenset({"adult", "child"})),
            AttributeSpec("isDummy", boolean),
        ]),
        "crowd": _schema(),
        "animal": _schema(optional=[
            AttributeSpec("Species", text),
            AttributeSpec("isDummy", boolean),
        ]),
        "group_of_animals": _schema(optional=[AttributeSpec("Species", text)]),
        "train": _schema(optional=[AttributeSpec("trainType", text)]),
        "wagons": _schema(),
        "road_vehicle": _schema(),
        "bicycle": _schema(),
        "track": _schema(required=[
            AttributeSpec("trackID", num),
            AttributeSpec("railSide", text, frozenset({"leftRail", "rightRail"}), kinds=_RAIL_KINDS),
        ]),
        "transition": _schema(
            required=[AttributeSpec("fromTrackID", num), AttributeSpec("toTrackID", num)],
            optional=[AttributeSpec("railSide", text, frozenset({"leftRail", "rightRail"}), kinds=_RAIL_KINDS)],
        ),
        "switch": _schema(),
        "catenary_pole": _schema(required=[AttributeSpec("type", text, frozenset({"structured", "solid"}))]),
        "signal_pole": _schema(),
        "signal": _schema(optional=[AttributeSpec("signalType", text)]),
        "signal_bridge": _schema(),
        "buffer_stop": _schema(),
    }
    limits = {
        "person": DimLimits(Bound(0.1, 2.5), Bound(0.1, 2.5), Bound(0.3, 3.0)),
        "animal": DimLimits(Bound(0.05, 4.0), Bound(0.05, 4.0), Bound(0.05, 3.0)),
        "road_vehicle": DimLimits(Bound(None, 20.0), Bound(None, 4.0), Bound(None, 5.0)),
        "bicycle": DimLimits(Bound(None, 2.5), Bound(None, 1.5), Bound(None, 2.5)),
        "train": DimLimits(Bound(None, 500.0), Bound(None, 4.5), Bound(None, 6.0)),
        "catenary_pole": DimLimits(Bound(None, 3.0), Bound(None, 3.0), Bound(2.0, 20.0)),
        "signal": DimLimits(Bound(None, 3.0), Bound(None, 3.0), Bound(None, 10.0)),
    }
    scoped = (
        ScopeRule("catenary_pole", "type", Scope.OBJECT_CONSTANT),
        ScopeRule("person", "age", Scope.OBJECT_CONSTANT),
        ScopeRule("person", "pose", Scope.FRAME_CONSTANT),
        ScopeRule("animal", "Species", Scope.OBJECT_CONSTANT),
        ScopeRule("track", "trackID", Scope.FRAME_CONSTANT),
    )
    return RuleConfig(class_schemas=schemas, dimension_limits=limits, scoped_attributes=scoped)


# --------------------------------------------------------------------------
# loading / dumping

def _err(path: str, message: str) -> ConfigError:
    return ConfigError(f"{path}: {message}")


def _obj(node: Any, path: str) -> dict:
    if not isinstance(node, dict):
        raise _err(path, "expected an object")
    return node


def _positive_or_none(node: Any, path: str) -> float | None:
    if node is None:
        return None
    if isinstance(node, bool) or not isinstance(node, (int, float)) or not math.isfinite(node) or node <= 0:
        raise _err(path, "expected a positive number")
    return float(node)


def _load_spec(node: Any, path: str) -> AttributeSpec:
    node = _obj(node, path)
    name = node.get("name")
    if not isinstance(name, str) or not name:
        raise _err(f"{path}/name", "expected a non-empty string")
    vtype = node.get("value_type", "Text")
    if vtype not in VALUE_TYPES:
        raise _err(f"{path}/value_type", f"must be one of {VALUE_TYPES}")
    allowed = node.get("allowed_values")
    if allowed is not None:
        if not isinstance(allowed, list) or not allowed:
            raise _err(f"{path}/allowed_values", "expected a non-empty array")
        allowed = frozenset(float(v) if isinstance(v, int) and not isinstance(v, bool) else v for v in allowed)
    applies = _obj(node.get("applies_to", {}), f"{path}/applies_to")
    kinds = modalities = None
    try:
        if applies.get("kinds") is not None:
            kinds = frozenset(Kind(k) for k in applies["kinds"])
        if applies.get("modalities") is not None:
            modalities = frozenset(Modality(m) for m in applies["modalities"])
    except (ValueError, TypeError) as exc:
        raise _err(f"{path}/applies_to", str(exc)) from None
    return AttributeSpec(name, vtype, allowed, kinds, modalities)


def _load_schema(node: Any, path: str) -> ClassSchema:
    node = _obj(node, path)
    parts = {}
    for part in ("required", "optional"):
        items = node.get(part, [])
        if not isinstance(items, list):
            raise _err(f"{path}/{part}", "expected an array")
        parts[part] = tuple(_load_spec(s, f"{path}/{part}/{i}") for i, s in enumerate(items))
    overlap = {s.name for s in parts["required"]} & {s.name for s in parts["optional"]}
    if overlap:
        raise _err(path, f"attributes both required and optional: {sorted(overlap)}")
    return ClassSchema(parts["required"], parts["optional"])


def _load_limits(node: Any, base: DimLimits, path: str) -> DimLimits:
    node = _obj(node, path)
    axes = {}
    for axis in AXES:
        bound = getattr(base, axis)
        if axis in node:
            b = _obj(node[axis], f"{path}/{axis}")
            bound = Bound(
                _positive_or_none(b.get("min", bound.min), f"{path}/{axis}/min"),
                _positive_or_none(b.get("max", bound.max), f"{path}/{axis}/max"),
            )
        if bound.min is not None and bound.max is not None and bound.min > bound.max:
            raise _err(f"{path}/{axis}", f"min {bound.min} exceeds max {bound.max}")
        axes[axis] = bound
    return DimLimits(**axes)


def _merge_section(cls, base, node: Any, path: str):
    """Field-level merge of a flat config section over its defaults."""
    node = _obj(node, path)
    known = {f.name for f in fields(cls)}
    unknown = set(node) - known
    if unknown:
        raise _err(path, f"unknown keys {sorted(unknown)}")
    values = {}
    for f in fields(cls):
        if f.name not in node:
            values[f.name] = getattr(base, f.name)
            continue
        raw = node[f.name]
        default = getattr(base, f.name)
        fpath = f"{path}/{f.name}"
        if isinstance(default, str):
            if not isinstance(raw, str):
                raise _err(fpath, "expected a string")
            values[f.name] = raw
        elif isinstance(default, float):
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise _err(fpath, "expected a number")
            values[f.name] = float(raw)
        elif isinstance(default, frozenset):
            if not isinstance(raw, list) or not all(isinstance(v, str) for v in raw):
                raise _err(fpath, "expected an array of strings")
            values[f.name] = frozenset(raw)
        else:
            if not isinstance(raw, list):
                raise _err(fpath, "expected an array")
            if f.name == "ground_normal_vehicle":
                if len(raw) != 3 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
                    raise _err(fpath, "expected 3 numbers")
                values[f.name] = tuple(float(v) for v in raw)
            else:
                if not all(isinstance(v, str) for v in raw):
                    raise _err(fpath, "expected an array of strings")
                values[f.name] = tuple(raw)
    return cls(**values)


_TOP_KEYS = {f.name for f in fields(RuleConfig)}


def config_from_dict(doc: Any) -> RuleConfig:
    doc = _obj(doc, "config")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise _err("config", f"unknown keys {sorted(unknown)}")
    base = default_config()

    schemas = dict(base.class_schemas)
    for name, node in _obj(doc.get("class_schemas", {}), "class_schemas").items():
        schemas[name] = _load_schema(node, f"class_schemas/{name}")

    limits = dict(base.dimension_limits)
    for name, node in _obj(doc.get("dimension_limits", {}), "dimension_limits").items():
        limits[name] = _load_limits(node, limits.get(name, DimLimits()), f"dimension_limits/{name}")

    scoped = base.scoped_attributes
    if "scoped_attributes" in doc:
        items = doc["scoped_attributes"]
        if not isinstance(items, list):
            raise _err("scoped_attributes", "expected an array")
        rules = []
        for i, node in enumerate(items):
            path = f"scoped_attributes/{i}"
            node = _obj(node, path)
            try:
                rules.append(ScopeRule(str(node["class_name"]), str(node["attribute_name"]), Scope(node["scope"])))
            except (KeyError, ValueError) as exc:
                raise _err(path, f"invalid scope rule ({exc})") from None
        scoped = tuple(rules)

    sections = {}
    for key, cls in (("ego", EgoConfig), ("horizon", HorizonConfig), ("rail", RailConfig),
                     ("transition", TransitionConfig)):
        sections[key] = _merge_section(cls, getattr(base, key), doc.get(key, {}), key)

    merged_sensor = doc.get("merged_point_cloud_sensor", base.merged_point_cloud_sensor)
    if not isinstance(merged_sensor, str):
        raise _err("merged_point_cloud_sensor", "expected a string")

    selection = base.check_selection
    if "check_selection" in doc:
        names = doc["check_selection"]
        if not isinstance(names, list):
            raise _err("check_selection", "expected an array")
        try:
            selection = frozenset(IssueType.parse(str(n)) for n in names)
        except ValueError as exc:
            raise _err("check_selection", str(exc)) from None

    cfg = RuleConfig(schemas, limits, scoped, sections["ego"], sections["horizon"], sections["rail"],
                     sections["transition"], merged_sensor, selection)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RuleConfig) -> None:
    for name in list(cfg.dimension_limits) + [r.class_name for r in cfg.scoped_attributes]:
        if name != WILDCARD and name not in cfg.class_schemas:
            raise ConfigError(f"class {name!r} has limits or scope rules but no class schema")
    if not cfg.ego.required_sensors:
        raise ConfigError("ego/required_sensors must not be empty")
    n = cfg.horizon.ground_normal_vehicle
    if abs(math.sqrt(sum(v * v for v in n)) - 1.0) > 1e-6:
        raise ConfigError("horizon/ground_normal_vehicle must be a unit vector")
    if cfg.horizon.tolerance_px < 0:
        raise ConfigError("horizon/tolerance_px must be >= 0")
    if cfg.rail.left_value == cfg.rail.right_value:
        raise ConfigError("rail/left_value and rail/right_value must differ")
    if cfg.transition.from_attribute == cfg.transition.to_attribute:
        raise ConfigError("transition/from_attribute and transition/to_attribute must differ")


def load_config(document: str | bytes) -> RuleConfig:
    try:
        doc = json.loads(document)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    return config_from_dict(doc)


def load_config_file(path) -> RuleConfig:
    try:
        with open(path, "rb") as fh:
            return load_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def _sorted_values(values) -> list:
    return sorted(values, key=lambda v: (type(v).__name__, v))


def _spec_to_dict(spec: AttributeSpec) -> dict:
    out: dict[str, Any] = {"name": spec.name, "value_type": spec.value_type}
    if spec.allowed_values is not None:
        out["allowed_values"] = _sorted_values(spec.allowed_values)
    applies = {}
    if spec.kinds is not None:
        applies["kinds"] = sorted(k.value for k in spec.kinds)
    if spec.modalities is not None:
        applies["modalities"] = sorted(m.value for m in spec.modalities)
    if applies:
        out["applies_to"] = applies
    return out


def config_to_dict(cfg: RuleConfig) -> dict:
    """Fully resolved config; ``config_from_dict`` of the result equals ``cfg``."""
    def section(obj) -> dict:
        out = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, frozenset):
                v = sorted(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def bound(b: Bound) -> dict:
        return {"min": b.min, "max": b.max}

    return {
        "class_schemas": {
            name: {"required": [_spec_to_dict(s) for s in sch.required],
                   "optional": [_spec_to_dict(s) for s in sch.optional]}
            for name, sch in sorted(cfg.class_schemas.items())
        },
        "dimension_limits": {
            name: {axis: bound(getattr(lim, axis)) for axis in AXES}
            for name, lim in sorted(cfg.dimension_limits.items())
        },
        "scoped_attributes": [
            {"class_name": r.class_name, "attribute_name": r.attribute_name, "scope": r.scope.value}
            for r in cfg.scoped_attributes
        ],
        "ego": section(cfg.ego),
        "horizon": section(cfg.horizon),
        "rail": section(cfg.rail),
        "transition": section(cfg.transition),
        "merged_point_cloud_sensor": cfg.merged_point_cloud_sensor,
        "check_selection": sorted(t.value for t in cfg.check_selection),
    }


def dump_config(cfg: RuleConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2)
