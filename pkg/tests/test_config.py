import json

import pytest

from railcheck.config import (
    ConfigError,
    Scope,
    config_from_dict,
    config_to_dict,
    default_config,
    dump_config,
    load_config,
)
from railcheck.issues import ALL_ISSUE_TYPES, IssueType


def test_empty_document_gives_defaults():
    assert load_config("{}") == default_config()


def test_defaults_are_deterministic():
    assert default_config() == default_config()
    assert dump_config(default_config()) == dump_config(default_config())


def test_default_classes():
    schemas = default_config().class_schemas
    for name in ("person", "track", "transition", "catenary_pole", "animal", "train", "signal"):
        assert name in schemas


def test_track_requires_track_id():
    assert "trackID" in [s.name for s in default_config().class_schemas["track"].required]


def test_species_only_for_animals():
    schemas = default_config().class_schemas
    person = schemas["person"]
    assert "Species" not in [s.name for s in (*person.required, *person.optional)]
    assert "Species" in [s.name for s in schemas["animal"].optional]


def test_person_height_limit():
    assert default_config().dimension_limits["person"].sz.max == 3.0


def test_all_checks_enabled_by_default():
    assert default_config().check_selection == frozenset(ALL_ISSUE_TYPES)


def test_override_person_height():
    cfg = load_config(json.dumps({"dimension_limits": {"person": {"sz": {"max": 3.0}}}}))
    assert cfg.dimension_limits["person"].sz.max == 3.0
    cfg = load_config(json.dumps({"dimension_limits": {"person": {"sz": {"max": 2.2}}}}))
    assert cfg.dimension_limits["person"].sz.max == 2.2
    # other axes keep their defaults
    assert cfg.dimension_limits["person"].sx == default_config().dimension_limits["person"].sx


def test_contradictory_limits():
    with pytest.raises(ConfigError, match="exceeds"):
        load_config(json.dumps({"dimension_limits": {"person": {"sz": {"min": 5.0, "max": 3.0}}}}))


def test_non_positive_limit():
    with pytest.raises(ConfigError, match="positive"):
        load_config(json.dumps({"dimension_limits": {"person": {"sz": {"max": 0}}}}))


def test_unknown_issue_type():
    with pytest.raises(ConfigError, match="unknown issue type"):
        load_config(json.dumps({"check_selection": ["MissingAttribute", "Bogus"]}))


def test_non_unit_ground_normal():
    with pytest.raises(ConfigError, match="unit"):
        load_config(json.dumps({"horizon": {"ground_normal_vehicle": [0, 0, 2]}}))


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(json.dumps({"dimensions": {}}))


def test_malformed_json():
    with pytest.raises(ConfigError, match="malformed"):
        load_config("{")


def test_limits_need_a_schema():
    with pytest.raises(ConfigError, match="no class schema"):
        load_config(json.dumps({"dimension_limits": {"unicorn": {"sz": {"max": 2}}}}))
    cfg = load_config(json.dumps({"dimension_limits": {"*": {"sz": {"max": 40}}}}))
    assert cfg.dimension_limits["*"].sz.max == 40


def test_required_and_optional_overlap():
    doc = {"class_schemas": {"person": {"required": [{"name": "age"}], "optional": [{"name": "age"}]}}}
    with pytest.raises(ConfigError, match="both required and optional"):
        load_config(json.dumps(doc))


def test_rail_values_must_differ():
    with pytest.raises(ConfigError):
        load_config(json.dumps({"rail": {"left_value": "x", "right_value": "x"}}))


def test_section_field_merge():
    cfg = load_config(json.dumps({"ego": {"required_sensors": ["rgb_highres_center"]}, "horizon": {"tolerance_px": 4}}))
    assert cfg.ego.required_sensors == ("rgb_highres_center",)
    assert cfg.ego.track_id_attribute == "trackID"
    assert cfg.horizon.tolerance_px == 4.0
    assert cfg.horizon.checked_classes == frozenset({"track"})


def test_scope_rules_replace_list():
    cfg = load_config(json.dumps({"scoped_attributes": [
        {"class_name": "*", "attribute_name": "isDummy", "scope": "ObjectConstant"}]}))
    assert len(cfg.scoped_attributes) == 1
    assert cfg.scoped_attributes[0].scope is Scope.OBJECT_CONSTANT


def test_class_schema_from_json():
    doc = {"class_schemas": {"signal": {"required": [{
        "name": "signalType", "value_type": "Text", "allowed_values": ["main", "distant"],
        "applies_to": {"kinds": ["Bbox2D"], "modalities": ["Camera"]}}]}}}
    spec = load_config(json.dumps(doc)).class_schemas["signal"].required[0]
    assert spec.allowed_values == frozenset({"main", "distant"})


@pytest.mark.parametrize("name", [t.value for t in ALL_ISSUE_TYPES])
def test_each_check_individually_switchable(name):
    cfg = load_config(json.dumps({"check_selection": [name]}))
    assert cfg.check_selection == frozenset({IssueType(name)})


def test_dump_load_idempotent():
    cfg = default_config()
    assert config_from_dict(json.loads(dump_config(cfg))) == cfg
    custom = load_config(json.dumps({
        "dimension_limits": {"person": {"sz": {"min": None, "max": 2.8}}},
        "check_selection": ["RailSideOrder"],
        "horizon": {"tolerance_px": 2.5, "checked_classes": ["track", "transition"]},
    }))
    assert custom.dimension_limits["person"].sz.min is None
    assert config_from_dict(config_to_dict(custom)) == custom
