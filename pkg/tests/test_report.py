import json
from pathlib import Path

from hypothesis import given, settings, strategies as st

from railcheck.detectors import run_checks
from railcheck.faultlab import inject_faults
from railcheck.issues import ALL_ISSUE_TYPES, Issue, IssueType
from railcheck.model import ElementCount, count_elements
from railcheck.report import (
    build_report,
    format_percent,
    from_json,
    make_report,
    merge_reports,
    report_to_dict,
    to_json,
    to_text,
)

FIXTURES = Path(__file__).parent / "fixtures"


def _issues(n, issue_type=IssueType.MISSING_ATTRIBUTE):
    return [Issue(issue_type, "m", i, "s", f"o{i}", f"a{i}") for i in range(n)]


def test_headline_rate():
    # 1,651,208 elements, 35,931 issues
    report = make_report(ElementCount(1_000_000, 651_208), _issues(35_931))
    assert format_percent(report.error_rate) == "2.18%"
    assert report_to_dict(report)["summary"]["error_rate_percent"] == "2.18%"


def test_rate_edge_cases():
    assert make_report(ElementCount(0, 0), []).error_rate == 0.0
    assert make_report(ElementCount(60, 40), _issues(5)).error_rate == 0.05
    assert format_percent(0.0) == "0.00%"


def test_denominator_counts_attributes():
    one = make_report(ElementCount(10, 0), _issues(1))
    two = make_report(ElementCount(10, 10), _issues(1))
    assert one.error_rate == 2 * two.error_rate


def test_empty_golden():
    report = make_report(ElementCount(0, 0), [], scene_id="empty")
    assert to_json(report) == (FIXTURES / "empty_report.json").read_text()


def test_single_issue_has_every_field():
    issue = Issue(IssueType.DIMENSION_INVALID, "too tall", 3, "lidar", "obj", "ann", {"axis": "sz"})
    data = report_to_dict(make_report(ElementCount(4, 6), [issue]))
    (entry,) = data["issues"]
    for key in ("issue_type", "frame_index", "sensor", "object_uid", "annotation_uid", "details", "message"):
        assert key in entry
    assert entry["details"] == {"axis": "sz"}
    assert set(data["summary"]["counts_by_type"]) == {t.value for t in ALL_ISSUE_TYPES}


def test_field_order_stable():
    data = json.loads(to_json(make_report(ElementCount(1, 1), _issues(2))))
    assert list(data) == ["schema", "scene_id", "summary", "issues", "warnings"]


def test_round_trip(cfg, rich_scene):
    scene, _ = inject_faults(rich_scene, ALL_ISSUE_TYPES, seed=4)
    report = run_checks(scene, cfg, scene_id="rich")
    assert from_json(to_json(report)) == report


@settings(max_examples=50)
@given(
    issues=st.lists(
        st.builds(
            Issue,
            st.sampled_from(ALL_ISSUE_TYPES),
            st.text(max_size=20),
            st.one_of(st.none(), st.integers(0, 50)),
            st.one_of(st.none(), st.sampled_from(["a", "b"])),
            st.one_of(st.none(), st.text(max_size=5)),
            st.one_of(st.none(), st.text(max_size=5)),
            st.dictionaries(st.text(max_size=5), st.text(max_size=5), max_size=3),
        ),
        max_size=10,
    ),
    annotations=st.integers(0, 10_000),
    attributes=st.integers(0, 10_000),
)
def test_round_trip_property(issues, annotations, attributes):
    report = make_report(ElementCount(annotations, attributes), issues, ["w"], "x")
    assert from_json(to_json(report)) == report


def test_summary_text():
    report = make_report(ElementCount(300, 100), _issues(3) + _issues(1, IssueType.RAIL_SIDE_ORDER))
    lines = to_text(report).splitlines()
    assert lines[0] == "4 issues / 400 elements (1.00%)"
    assert lines[1:] == ["  MissingAttribute: 3", "  RailSideOrder: 1"]


def test_empty_summary_text():
    assert to_text(make_report(ElementCount(7, 0), [])) == "0 issues / 7 elements (0.00%)\n"


def test_full_text_one_line_per_issue():
    report = make_report(ElementCount(3, 3), _issues(4), scene_id="s")
    summary = to_text(report).splitlines()
    full = to_text(report, "full").splitlines()
    assert len(full) == len(summary) + 4
    assert full[-1].startswith("[MissingAttribute] frame=3 sensor=s object=o3 annotation=a3")


def test_distinct_elements():
    a = Issue(IssueType.MISSING_ATTRIBUTE, "m", 0, "s", "o", "x", {"attribute": "p"})
    b = Issue(IssueType.MISSING_ATTRIBUTE, "m", 0, "s", "o", "x", {"attribute": "q"})
    report = make_report(ElementCount(1, 0), [a, b])
    assert report.issue_count == 2 and report.distinct_elements == 1


def test_merge_over_disjoint_frames(cfg, rich_scene):
    scene, _ = inject_faults(rich_scene, ALL_ISSUE_TYPES, seed=8)
    whole = run_checks(scene, cfg)
    parts = []
    for idx, frame in scene.frames.items():
        part = type(scene)(scene.sensors, scene.objects, {idx: frame}, scene.schema_version)
        sub = [i for i in whole.issues if i.frame_index == idx]
        parts.append(build_report(part, sub))
    # issues without a frame (object-wide scope conflicts) belong to no single part
    loose = [i for i in whole.issues if i.frame_index is None]
    parts.append(make_report(ElementCount(), loose))
    merged = merge_reports(parts)
    assert merged.issues == whole.issues
    assert merged.elements == count_elements(scene)
    assert merged.counts_by_type == whole.counts_by_type
    left = merge_reports([merge_reports(parts[:1]), merge_reports(parts[1:])])
    right = merge_reports([merge_reports(parts[:-1]), merge_reports(parts[-1:])])
    assert left.issues == right.issues == merged.issues
    assert left.elements == right.elements


def test_unknown_verbosity():
    import pytest

    with pytest.raises(ValueError):
        to_text(make_report(ElementCount(), []), "loud")
