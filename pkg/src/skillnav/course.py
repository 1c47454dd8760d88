"""Course files: schema, validation, and loaded world specifications.

A course is one structured-text document (YAML subset) with bounds, a
start pose, a goal disc, class-tagged convex obstacles, and optional
per-pose command hints. Loading is strict: unknown fields are rejected
and the course must be solvable (goal reachable from start when only
Wall obstacles block) before a CourseSpec is returned.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from skillnav.catalog import (
    Magnitude,
    SkillCommand,
    canonical_name,
    magnitude_name,
    parse_magnitude_name,
    try_parse_skill_name,
)
from skillnav.geodesic import GeodesicField, build_field
from skillnav.geometry import BadPolygon, ConvexPolygon, wrap_angle

ROBOT_RADIUS = 0.35


class ObstacleClass(enum.Enum):
    WALL = "Wall"  # impassable
    LOW_OVERHANG = "LowOverhang"  # passable only while crawling
    STEP = "Step"  # passable only while climbing
    GOAL_MARKER = "GoalMarker"  # visual landmark, never blocks


class SchemaError(ValueError):
    """Course document violates the file schema or a load-time invariant."""


class UnsolvableCourse(ValueError):
    """No wall-free path from start to goal exists."""


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class GoalRegion:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class Bounds:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def contains_disc(self, x: float, y: float, r: float) -> bool:
        return (
            self.min_x + r - 1e-9 <= x <= self.max_x - r + 1e-9
            and self.min_y + r - 1e-9 <= y <= self.max_y - r + 1e-9
        )


@dataclass(frozen=True)
class Obstacle:
    polygon: ConvexPolygon
    oclass: ObstacleClass


@dataclass(frozen=True)
class IclExample:
    pose: Pose
    command: SkillCommand


# eq=False keeps identity hashing so loaded specs key caches directly.
@dataclass(frozen=True, eq=False)
class CourseSpec:
    name: str
    bounds: Bounds
    start: Pose
    goal: GoalRegion
    obstacles: tuple[Obstacle, ...]
    icl_annotations: tuple[IclExample, ...]

    def walls(self) -> list[ConvexPolygon]:
        return [o.polygon for o in self.obstacles if o.oclass is ObstacleClass.WALL]


# ----------------------------------------------------------------------
# Strict document parsing
# ----------------------------------------------------------------------


def _require_mapping(value, ctx: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"{ctx}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(d: dict, required: set[str], optional: set[str], ctx: str) -> None:
    keys = set(d)
    unknown = keys - required - optional
    if unknown:
        raise SchemaError(f"{ctx}: unknown field(s) {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise SchemaError(f"{ctx}: missing field(s) {sorted(missing)}")


def _num(d: dict, key: str, ctx: str) -> float:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{ctx}.{key}: expected a number, got {v!r}")
    return float(v)


def _parse_obstacle(entry, idx: int) -> Obstacle:
    ctx = f"obstacles[{idx}]"
    d = _require_mapping(entry, ctx)
    _check_keys(d, {"class"}, {"rect", "polygon"}, ctx)
    if ("rect" in d) == ("polygon" in d):
        raise SchemaError(f"{ctx}: exactly one of 'rect' or 'polygon' required")
    try:
        if "rect" in d:
            r = _require_mapping(d["rect"], f"{ctx}.rect")
            _check_keys(r, {"x", "y", "w", "h"}, set(), f"{ctx}.rect")
            poly = ConvexPolygon.from_rect(
                _num(r, "x", ctx), _num(r, "y", ctx), _num(r, "w", ctx), _num(r, "h", ctx)
            )
        else:
            pts = d["polygon"]
            if not isinstance(pts, list) or not all(
                isinstance(p, list) and len(p) == 2 for p in pts
            ):
                raise SchemaError(f"{ctx}.polygon: expected a list of [x, y] pairs")
            poly = ConvexPolygon.from_points(pts)
    except BadPolygon as e:
        raise SchemaError(f"{ctx}: {e}") from e
    cls_name = d["class"]
    try:
        oclass = ObstacleClass(cls_name)
    except ValueError:
        valid = [c.value for c in ObstacleClass]
        raise SchemaError(f"{ctx}.class: {cls_name!r} not one of {valid}") from None
    return Obstacle(polygon=poly, oclass=oclass)


def _parse_icl(entry, idx: int) -> IclExample:
    ctx = f"icl[{idx}]"
    d = _require_mapping(entry, ctx)
    _check_keys(d, {"pose", "skill", "magnitude"}, set(), ctx)
    p = _require_mapping(d["pose"], f"{ctx}.pose")
    _check_keys(p, {"x", "y", "heading"}, set(), f"{ctx}.pose")
    pose = Pose(
        x=_num(p, "x", ctx), y=_num(p, "y", ctx), heading=wrap_angle(_num(p, "heading", ctx))
    )
    skill = try_parse_skill_name(str(d["skill"]))
    if skill is None:
        raise SchemaError(f"{ctx}.skill: unknown skill {d['skill']!r}")
    magnitude = parse_magnitude_name(str(d["magnitude"]))
    if magnitude is None:
        raise SchemaError(f"{ctx}.magnitude: {d['magnitude']!r} not Small/Medium/Large")
    return IclExample(pose=pose, command=SkillCommand(skill, magnitude))


def parse_course(text: str) -> CourseSpec:
    """Parse and fully validate one course document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise SchemaError(f"unparseable course document: {e}") from e
    doc = _require_mapping(doc, "course")
    _check_keys(doc, {"name", "bounds", "start", "goal", "obstacles"}, {"icl"}, "course")

    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise SchemaError("course.name: expected a non-empty string")

    b = _require_mapping(doc["bounds"], "bounds")
    _check_keys(b, {"min_x", "min_y", "max_x", "max_y"}, set(), "bounds")
    bounds = Bounds(
        min_x=_num(b, "min_x", "bounds"),
        min_y=_num(b, "min_y", "bounds"),
        max_x=_num(b, "max_x", "bounds"),
        max_y=_num(b, "max_y", "bounds"),
    )
    if bounds.max_x <= bounds.min_x or bounds.max_y <= bounds.min_y:
        raise SchemaError("bounds: max must exceed min on both axes")

    s = _require_mapping(doc["start"], "start")
    _check_keys(s, {"x", "y", "heading"}, set(), "start")
    start = Pose(
        x=_num(s, "x", "start"),
        y=_num(s, "y", "start"),
        heading=wrap_angle(_num(s, "heading", "start")),
    )

    g = _require_mapping(doc["goal"], "goal")
    _check_keys(g, {"x", "y", "radius"}, set(), "goal")
    goal = GoalRegion(x=_num(g, "x", "goal"), y=_num(g, "y", "goal"), radius=_num(g, "radius", "goal"))
    if goal.radius <= 0:
        raise SchemaError("goal.radius: must be positive")

    if not isinstance(doc["obstacles"], list):
        raise SchemaError("obstacles: expected a list")
    obstacles = tuple(_parse_obstacle(e, i) for i, e in enumerate(doc["obstacles"]))

    icl: tuple[IclExample, ...] = ()
    if "icl" in doc:
        if not isinstance(doc["icl"], list) or not doc["icl"]:
            raise SchemaError("icl: expected a non-empty list")
        icl = tuple(_parse_icl(e, i) for i, e in enumerate(doc["icl"]))

    course = CourseSpec(
        name=name, bounds=bounds, start=start, goal=goal,
        obstacles=obstacles, icl_annotations=icl,
    )
    _validate(course)
    return course


def _validate(course: CourseSpec) -> None:
    b, s, g = course.bounds, course.start, course.goal
    if not b.contains_disc(s.x, s.y, ROBOT_RADIUS):
        raise SchemaError("start: robot disc does not fit inside bounds")
    for i, o in enumerate(course.obstacles):
        if o.oclass is ObstacleClass.WALL and o.polygon.distance((s.x, s.y)) < ROBOT_RADIUS:
            raise SchemaError(f"start: robot disc overlaps Wall obstacles[{i}]")
    if not (
        b.min_x <= g.x - g.radius
        and g.x + g.radius <= b.max_x
        and b.min_y <= g.y - g.radius
        and g.y + g.radius <= b.max_y
    ):
        raise SchemaError("goal: region extends outside bounds")
    for e in course.icl_annotations:
        if not (b.min_x <= e.pose.x <= b.max_x and b.min_y <= e.pose.y <= b.max_y):
            raise SchemaError("icl: pose outside bounds")
    field = geodesic_field(course)
    if not math.isfinite(field.distance(s.x, s.y)):
        raise UnsolvableCourse(
            f"course {course.name!r}: goal unreachable from start even with full capability"
        )


@functools.lru_cache(maxsize=64)
def geodesic_field(course: CourseSpec) -> GeodesicField:
    b = course.bounds
    return build_field(
        bounds=(b.min_x, b.min_y, b.max_x, b.max_y),
        walls=course.walls(),
        goal_center=(course.goal.x, course.goal.y),
        goal_radius=course.goal.radius,
        robot_radius=ROBOT_RADIUS,
    )


def load_course(path: str | Path) -> CourseSpec:
    return parse_course(Path(path).read_text())


# ----------------------------------------------------------------------
# Shipped course fixtures
# ----------------------------------------------------------------------


def builtin_course_names() -> list[str]:
    pkg = resources.files("skillnav") / "courses"
    return sorted(p.name[: -len(".yaml")] for p in pkg.iterdir() if p.name.endswith(".yaml"))


def load_builtin(name: str) -> CourseSpec:
    pkg = resources.files("skillnav") / "courses" / f"{name}.yaml"
    if not pkg.is_file():
        raise SchemaError(
            f"unknown course {name!r}; built-ins: {builtin_course_names()}"
        )
    return parse_course(pkg.read_text())


def resolve_course(ref: str) -> CourseSpec:
    """Accept either a builtin course name or a path to a course file."""
    p = Path(ref)
    if p.suffix in {".yaml", ".yml"} or p.exists():
        return load_course(p)
    return load_builtin(ref)


def course_to_dict(course: CourseSpec) -> dict:
    """JSON-friendly dump used by the service and the catalog listing."""
    out: dict = {
        "name": course.name,
        "bounds": {
            "min_x": course.bounds.min_x,
            "min_y": course.bounds.min_y,
            "max_x": course.bounds.max_x,
            "max_y": course.bounds.max_y,
        },
        "start": {"x": course.start.x, "y": course.start.y, "heading": course.start.heading},
        "goal": {"x": course.goal.x, "y": course.goal.y, "radius": course.goal.radius},
        "obstacles": [
            {
                "class": o.oclass.value,
                "polygon": [[float(x), float(y)] for x, y in o.polygon.vertices],
            }
            for o in course.obstacles
        ],
    }
    if course.icl_annotations:
        out["icl"] = [
            {
                "pose": {"x": e.pose.x, "y": e.pose.y, "heading": e.pose.heading},
                "skill": canonical_name(e.command.skill),
                "magnitude": magnitude_name(e.command.magnitude),
            }
            for e in course.icl_annotations
        ]
    return out
