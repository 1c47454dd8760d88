"""Course schema: strict parsing, invariants, built-in fixtures."""

import math

import pytest
import yaml

from skillnav.catalog import Magnitude, SkillKind
from skillnav.course import (
    ObstacleClass,
    SchemaError,
    UnsolvableCourse,
    builtin_course_names,
    course_to_dict,
    geodesic_field,
    load_builtin,
    parse_course,
    resolve_course,
)

MINIMAL = """
name: freeplane
bounds: {min_x: 0.0, min_y: 0.0, max_x: 8.0, max_y: 4.0}
start: {x: 1.0, y: 2.0, heading: 0.0}
goal: {x: 3.0, y: 2.0, radius: 0.4}
obstacles: []
"""


def test_minimal_course_valid():
    c = parse_course(MINIMAL)
    assert c.name == "freeplane"
    assert c.obstacles == ()
    assert c.icl_annotations == ()
    assert c.start.x == 1.0 and c.goal.radius == 0.4


def _mutate(extra: str) -> str:
    return MINIMAL + extra


def test_unknown_top_level_field_rejected():
    with pytest.raises(SchemaError, match="unknown field"):
        parse_course(_mutate("weather: sunny\n"))


def test_unknown_nested_field_rejected():
    bad = MINIMAL.replace("radius: 0.4", "radius: 0.4, color: red")
    with pytest.raises(SchemaError, match="unknown field"):
        parse_course(bad)


def test_missing_field_rejected():
    bad = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("goal"))
    with pytest.raises(SchemaError, match="missing"):
        parse_course(bad)


def test_non_numeric_rejected():
    with pytest.raises(SchemaError, match="expected a number"):
        parse_course(MINIMAL.replace("radius: 0.4", "radius: wide"))


def test_obstacle_needs_exactly_one_shape():
    doc = yaml.safe_load(MINIMAL)
    doc["obstacles"] = [
        {"rect": {"x": 1, "y": 1, "w": 1, "h": 1}, "polygon": [[0, 0], [1, 0], [0, 1]], "class": "Wall"}
    ]
    with pytest.raises(SchemaError, match="exactly one"):
        parse_course(yaml.safe_dump(doc))
    doc["obstacles"] = [{"class": "Wall"}]
    with pytest.raises(SchemaError, match="exactly one"):
        parse_course(yaml.safe_dump(doc))


def test_bad_obstacle_class_rejected():
    doc = yaml.safe_load(MINIMAL)
    doc["obstacles"] = [{"rect": {"x": 5, "y": 1, "w": 1, "h": 1}, "class": "Lava"}]
    with pytest.raises(SchemaError, match="Lava"):
        parse_course(yaml.safe_dump(doc))


def test_nonconvex_polygon_rejected():
    doc = yaml.safe_load(MINIMAL)
    doc["obstacles"] = [
        {"polygon": [[5, 1], [7, 1], [7, 3], [6, 1.5], [5, 3]], "class": "Wall"}
    ]
    with pytest.raises(SchemaError, match="convex"):
        parse_course(yaml.safe_dump(doc))


def test_start_inside_wall_rejected():
    doc = yaml.safe_load(MINIMAL)
    doc["obstacles"] = [{"rect": {"x": 0.5, "y": 1.5, "w": 1.0, "h": 1.0}, "class": "Wall"}]
    with pytest.raises((SchemaError, UnsolvableCourse)):
        parse_course(yaml.safe_dump(doc))


def test_goal_outside_bounds_rejected():
    with pytest.raises(SchemaError, match="goal"):
        parse_course(MINIMAL.replace("goal: {x: 3.0", "goal: {x: 7.9"))


def test_unsolvable_course_rejected():
    doc = yaml.safe_load(MINIMAL)
    # Wall box sealing the goal completely.
    doc["obstacles"] = [
        {"rect": {"x": 2.0, "y": 0.0, "w": 0.4, "h": 4.0}, "class": "Wall"},
        {"rect": {"x": 4.0, "y": 0.0, "w": 0.4, "h": 4.0}, "class": "Wall"},
    ]
    with pytest.raises(UnsolvableCourse):
        parse_course(yaml.safe_dump(doc))


def test_crawlable_barrier_is_solvable():
    doc = yaml.safe_load(MINIMAL)
    doc["obstacles"] = [
        {"rect": {"x": 2.0, "y": 0.0, "w": 0.4, "h": 4.0}, "class": "LowOverhang"}
    ]
    c = parse_course(yaml.safe_dump(doc))
    assert c.obstacles[0].oclass is ObstacleClass.LOW_OVERHANG


def test_icl_round_trip():
    c = load_builtin("indoor2")
    assert len(c.icl_annotations) == 3
    first = c.icl_annotations[0]
    assert first.command.skill is SkillKind.CRAWL
    assert first.command.magnitude is Magnitude.LARGE
    assert first.pose.x == pytest.approx(1.3)


def test_icl_rejects_bad_skill():
    bad = MINIMAL + "icl:\n  - pose: {x: 1.0, y: 2.0, heading: 0.0}\n    skill: Fly\n    magnitude: Small\n"
    with pytest.raises(SchemaError, match="skill"):
        parse_course(bad)


def test_builtin_fixture_set():
    names = builtin_course_names()
    assert names == ["indoor1", "indoor2", "outdoor1", "outdoor2", "outdoor3"]
    for name in names:
        c = load_builtin(name)
        assert c.name == name
        # Loading implies solvability; the field agrees.
        f = geodesic_field(c)
        assert math.isfinite(f.distance(c.start.x, c.start.y))


def test_unknown_builtin_listed():
    with pytest.raises(SchemaError, match="indoor1"):
        load_builtin("moonbase")


def test_resolve_course_accepts_path(tmp_path):
    p = tmp_path / "mini.yaml"
    p.write_text(MINIMAL)
    assert resolve_course(str(p)).name == "freeplane"
    assert resolve_course("outdoor3").name == "outdoor3"


def test_course_to_dict_round_trips():
    c = load_builtin("indoor2")
    d = course_to_dict(c)
    c2 = parse_course(yaml.safe_dump(d))
    assert course_to_dict(c2) == d


def test_heading_wrapped_on_load():
    c = parse_course(MINIMAL.replace("heading: 0.0", "heading: 7.0"))
    assert -math.pi < c.start.heading <= math.pi
