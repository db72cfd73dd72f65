"""Issue aggregation, error-rate statistics and report serialization.

The error rate divides the number of issues by the number of annotation
elements, i.e. annotations *plus* their attributes. Tools that count
annotations only will report a higher rate for the same issues.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .issues import ALL_ISSUE_TYPES, Issue, IssueType, sort_issues
from .model import ElementCount, Scene, count_elements

REPORT_SCHEMA = "railcheck.report/1"


@dataclass(frozen=True)
class Report:
    scene_id: str
    issues: tuple[Issue, ...]
    counts_by_type: dict[IssueType, int]
    elements: ElementCount
    error_rate: float
    warnings: tuple[str, ...] = ()
    distinct_elements: int = 0

    @property
    def issue_count(self) -> int:
        return len(self.issues)


def format_percent(rate: float) -> str:
    return f"{rate * 100:.2f}%"


def make_report(elements: ElementCount, issues, warnings=(), scene_id: str = "") -> Report:
    issues = tuple(issues)
    counts = {t: 0 for t in ALL_ISSUE_TYPES}
    for issue in issues:
        counts[issue.issue_type] += 1
    rate = len(issues) / elements.total if elements.total else 0.0
    distinct = len({i.location() for i in issues})
    return Report(scene_id, issues, counts, elements, rate, tuple(warnings), distinct)


def build_report(scene: Scene, issues, warnings=(), scene_id: str = "") -> Report:
    return make_report(count_elements(scene), issues, warnings, scene_id)


def merge_reports(reports, scene_id: str = "") -> Report:
    """Combine reports of disjoint scene parts (or separate scenes)."""
    elements = ElementCount()
    issues: list[Issue] = []
    warnings: list[str] = []
    for r in reports:
        elements = elements + r.elements
        issues.extend(r.issues)
        warnings.extend(w for w in r.warnings if w not in warnings)
    return make_report(elements, sort_issues(issues), warnings, scene_id)


def report_to_dict(report: Report) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "scene_id": report.scene_id,
        "summary": {
            "issues": report.issue_count,
            "distinct_faulty_elements": report.distinct_elements,
            "elements": {
                "annotations": report.elements.annotations,
                "attributes": report.elements.attributes,
                "total": report.elements.total,
            },
            "error_rate": report.error_rate,
            "error_rate_percent": format_percent(report.error_rate),
            "counts_by_type": {t.value: report.counts_by_type.get(t, 0) for t in ALL_ISSUE_TYPES},
        },
        "issues": [i.to_dict() for i in report.issues],
        "warnings": list(report.warnings),
    }


def to_json(report: Report) -> str:
    return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n"


def report_from_dict(data: dict) -> Report:
    summary = data["summary"]
    elements = ElementCount(summary["elements"]["annotations"], summary["elements"]["attributes"])
    return Report(
        scene_id=data["scene_id"],
        issues=tuple(Issue.from_dict(i) for i in data["issues"]),
        counts_by_type={IssueType(k): v for k, v in summary["counts_by_type"].items()},
        elements=elements,
        error_rate=summary["error_rate"],
        warnings=tuple(data.get("warnings", ())),
        distinct_elements=summary["distinct_faulty_elements"],
    )


def from_json(text: str) -> Report:
    return report_from_dict(json.loads(text))


def _issue_line(issue: Issue) -> str:
    loc = []
    for label, value in (("frame", issue.frame_index), ("sensor", issue.sensor),
                         ("object", issue.object_uid), ("annotation", issue.annotation_uid)):
        if value is not None:
            loc.append(f"{label}={value}")
    return f"[{issue.issue_type.value}] {' '.join(loc)}: {issue.message}"


def to_text(report: Report, verbosity: str = "summary") -> str:
    if verbosity not in ("summary", "full"):
        raise ValueError(f"unknown verbosity {verbosity!r}")
    lines = []
    if report.scene_id:
        lines.append(f"scene: {report.scene_id}")
    lines.append(
        f"{report.issue_count} issues / {report.elements.total} elements "
        f"({format_percent(report.error_rate)})"
    )
    for t in ALL_ISSUE_TYPES:
        n = report.counts_by_type.get(t, 0)
        if n:
            lines.append(f"  {t.value}: {n}")
    lines.extend(f"warning: {w}" for w in report.warnings)
    if verbosity == "full":
        lines.extend(_issue_line(i) for i in report.issues)
    return "\n".join(lines) + "\n"
