"""Issue vocabulary shared by the detectors, the config loader and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class IssueType(str, Enum):
    ANNOTATION_ABOVE_HORIZON = "AnnotationAboveHorizon"
    DIMENSION_INVALID = "DimensionInvalid"
    INCONSISTENT_ATTRIBUTE_SCOPE = "InconsistentAttributeScope"
    MISSING_ATTRIBUTE = "MissingAttribute"
    MISSING_EGO_TRACK = "MissingEgoTrack"
    RAIL_SIDE_COUNT = "RailSideCount"
    RAIL_SIDE_ORDER = "RailSideOrder"
    TRANSITION_IDENTICAL_START_AND_END = "TransitionIdenticalStartAndEnd"
    UNEXPECTED_ATTRIBUTE = "UnexpectedAttribute"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> IssueType:
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown issue type {name!r} (valid: {valid})") from None


ALL_ISSUE_TYPES: tuple[IssueType, ...] = tuple(sorted(IssueType, key=lambda t: t.value))

DESCRIPTIONS: dict[IssueType, str] = {
    IssueType.ANNOTATION_ABOVE_HORIZON: "a track polyline reaches above the flat-ground horizon of its camera",
    IssueType.DIMENSION_INVALID: "a 3D cuboid in the merged point cloud is larger or smaller than its class allows",
    IssueType.INCONSISTENT_ATTRIBUTE_SCOPE: "an attribute that must stay constant across sensors or frames changes value",
    IssueType.MISSING_ATTRIBUTE: "an annotation lacks an attribute its class requires",
    IssueType.MISSING_EGO_TRACK: "a frame has no ego-track annotation in a required sensor",
    IssueType.RAIL_SIDE_COUNT: "a track has more than one left or more than one right rail in a camera frame",
    IssueType.RAIL_SIDE_ORDER: "the left rail of a track lies right of its right rail",
    IssueType.TRANSITION_IDENTICAL_START_AND_END: "a transition starts and ends on the same track",
    IssueType.UNEXPECTED_ATTRIBUTE: "an annotation carries an attribute (or value) its class does not allow",
}


@dataclass(frozen=True)
class Issue:
    """One detected problem.

    Location fields are optional because detectors work at different
    granularities: per annotation, per (object, frame, sensor) group, per
    frame and sensor, or per object.
    """

    issue_type: IssueType
    message: str
    frame_index: int | None = None
    sensor: str | None = None
    object_uid: str | None = None
    annotation_uid: str | None = None
    details: dict[str, str] = field(default_factory=dict)

    def location(self) -> tuple[int | None, str | None, str | None, str | None]:
        return (self.frame_index, self.sensor, self.object_uid, self.annotation_uid)

    def sort_key(self) -> tuple:
        def opt(value, empty):
            return (value is not None, value if value is not None else empty)

        return (
            self.issue_type.value,
            opt(self.frame_index, -1),
            opt(self.sensor, ""),
            opt(self.object_uid, ""),
            opt(self.annotation_uid, ""),
        )

    def to_dict(self) -> dict:
        return {
            "issue_type": self.issue_type.value,
            "frame_index": self.frame_index,
            "sensor": self.sensor,
            "object_uid": self.object_uid,
            "annotation_uid": self.annotation_uid,
            "message": self.message,
            "details": dict(sorted(self.details.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Issue:
        return cls(
            issue_type=IssueType(data["issue_type"]),
            message=data["message"],
            frame_index=data.get("frame_index"),
            sensor=data.get("sensor"),
            object_uid=data.get("object_uid"),
            annotation_uid=data.get("annotation_uid"),
            details={str(k): str(v) for k, v in (data.get("details") or {}).items()},
        )


def sort_issues(issues) -> list[Issue]:
    """Deterministic order: type, frame, sensor, object, annotation (stable within ties)."""
    return sorted(issues, key=Issue.sort_key)
