"""Deterministic 2D partially observed course simulator.

The robot is a disc moving over convex polygonal obstacles. Heights are
abstracted into clearance classes: Wall always blocks, LowOverhang
blocks unless the command is Crawl, Step blocks unless the command is
Climb, GoalMarker never blocks. A command turns first, then sweeps the
displacement in fixed substeps and stops at first contact with anything
blocking. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from skillnav.catalog import SkillCommand, SkillKind, lookup_params
from skillnav.course import ROBOT_RADIUS, CourseSpec, ObstacleClass
from skillnav.geometry import (
    ConvexPolygon,
    fan_directions,
    heading_vector,
    wrap_angle,
)

SUBSTEPS = 100
CONTACT_EPS = 1e-9
STUCK_EPS = 1e-6
# Climb may enter a Step only when the approach direction is within 60
# degrees of the face's inward normal; sideways climbs are rejected.
CLIMB_ENTRY_COS = math.cos(math.radians(60.0))


class BodyMode(enum.Enum):
    NOMINAL = "Nominal"
    LOW = "Low"


class RayClass(enum.Enum):
    FREE = "Free"
    WALL = "Wall"
    LOW_OVERHANG = "LowOverhang"
    STEP = "Step"
    GOAL = "Goal"


_OBSTACLE_RAY_CLASS = {
    ObstacleClass.WALL: RayClass.WALL,
    ObstacleClass.LOW_OVERHANG: RayClass.LOW_OVERHANG,
    ObstacleClass.STEP: RayClass.STEP,
    ObstacleClass.GOAL_MARKER: RayClass.GOAL,
}


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float  # radians, (-pi, pi]
    body_mode: BodyMode = BodyMode.NOMINAL
    sim_time: float = 0.0
    stuck_flag: bool = False


@dataclass(frozen=True)
class ViewConfig:
    fov: float = math.pi / 2.0
    ray_count: int = 64
    max_range: float = 5.0
    raster_size: int = 256


@dataclass(frozen=True)
class Ray:
    bearing: float  # relative to heading
    distance: float  # capped at max_range
    hit_class: RayClass


@dataclass(frozen=True)
class Observation:
    rays: tuple[Ray, ...]
    goal_visible: bool
    goal_bearing: float  # valid only when goal_visible
    raster: object | None = None  # PIL image when requested


def initial_state(course: CourseSpec) -> RobotState:
    s = course.start
    return RobotState(x=s.x, y=s.y, heading=s.heading)


def check_goal(state: RobotState, course: CourseSpec) -> bool:
    g = course.goal
    return math.hypot(state.x - g.x, state.y - g.y) <= g.radius + 1e-12


def _blocks(oclass: ObstacleClass, skill: SkillKind) -> bool:
    if oclass is ObstacleClass.WALL:
        return True
    if oclass is ObstacleClass.LOW_OVERHANG:
        return skill is not SkillKind.CRAWL
    if oclass is ObstacleClass.STEP:
        return skill is not SkillKind.CLIMB
    return False  # GoalMarker


def _climb_entry_allowed(poly: ConvexPolygon, contact: np.ndarray, direction: np.ndarray) -> bool:
    n = poly.closest_edge_normal(contact)
    return float(np.dot(direction, -n)) >= CLIMB_ENTRY_COS - 1e-9


def step_skill(
    state: RobotState,
    course: CourseSpec,
    cmd: SkillCommand,
    substeps: int = SUBSTEPS,
) -> RobotState:
    """Execute one skill command; blocked motion is an outcome, not an error."""
    p = lookup_params(cmd)
    heading = wrap_angle(state.heading + p.yaw_speed * p.duration)
    mode = BodyMode.LOW if p.body_height < 0.0 else BodyMode.NOMINAL
    disp = p.x_velocity * p.duration
    if disp == 0.0:
        return RobotState(
            x=state.x, y=state.y, heading=heading, body_mode=mode,
            sim_time=state.sim_time + p.duration, stuck_flag=False,
        )

    origin = np.array([state.x, state.y])
    direction = heading_vector(heading) * (1.0 if disp > 0 else -1.0)
    distance = abs(disp)
    frac = np.arange(1, substeps + 1) / substeps
    pts = origin[None, :] + direction[None, :] * (distance * frac)[:, None]

    b = course.bounds
    ok = (
        (pts[:, 0] >= b.min_x + ROBOT_RADIUS - CONTACT_EPS)
        & (pts[:, 0] <= b.max_x - ROBOT_RADIUS + CONTACT_EPS)
        & (pts[:, 1] >= b.min_y + ROBOT_RADIUS - CONTACT_EPS)
        & (pts[:, 1] <= b.max_y - ROBOT_RADIUS + CONTACT_EPS)
    )
    first_block = substeps if bool(ok.all()) else int(np.argmin(ok))

    for obstacle in course.obstacles:
        if first_block == 0:
            break
        if not _blocks(obstacle.oclass, cmd.skill):
            # Climbable Steps still gate on entry angle unless the robot
            # already overlaps them (mid-traversal is sticky).
            if obstacle.oclass is ObstacleClass.STEP and cmd.skill is SkillKind.CLIMB:
                if obstacle.polygon.distance(origin) < ROBOT_RADIUS - CONTACT_EPS:
                    continue
                d = obstacle.polygon.distances(pts[:first_block])
                overlap = d < ROBOT_RADIUS - CONTACT_EPS
                if overlap.any():
                    i = int(np.argmax(overlap))
                    if not _climb_entry_allowed(obstacle.polygon, pts[i], direction):
                        first_block = i
            continue
        # Already overlapping a blocking obstacle pins the robot in place.
        if obstacle.polygon.distance(origin) < ROBOT_RADIUS - CONTACT_EPS:
            first_block = 0
            break
        d = obstacle.polygon.distances(pts[:first_block])
        overlap = d < ROBOT_RADIUS - CONTACT_EPS
        if overlap.any():
            first_block = int(np.argmax(overlap))

    achieved = distance * first_block / substeps
    if first_block == substeps:
        pos = pts[-1]
    elif first_block == 0:
        pos = origin
    else:
        pos = pts[first_block - 1]
    return RobotState(
        x=float(pos[0]), y=float(pos[1]), heading=heading, body_mode=mode,
        sim_time=state.sim_time + p.duration,
        stuck_flag=achieved < distance - STUCK_EPS,
    )


# ----------------------------------------------------------------------
# Observation rendering
# ----------------------------------------------------------------------


def _ray_disc(origin: np.ndarray, dirs: np.ndarray, center, radius: float) -> np.ndarray:
    """Smallest non-negative hit parameter per unit-length ray; inf if missed."""
    oc = origin - np.asarray(center, dtype=float)
    b = dirs @ oc
    c = float(oc @ oc) - radius * radius
    disc = b * b - c
    t = np.full(len(dirs), np.inf)
    hit = disc >= 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = -b - sq
    t2 = -b + sq
    near = np.where(t1 >= 0.0, t1, np.where(t2 >= 0.0, np.maximum(t1, 0.0), np.inf))
    t[hit] = near[hit]
    return t


def render_observation(
    state: RobotState,
    course: CourseSpec,
    cfg: ViewConfig = ViewConfig(),
    with_raster: bool = False,
) -> Observation:
    origin = np.array([state.x, state.y])
    dirs = fan_directions(state.heading, cfg.fov, cfg.ray_count)
    best_t = np.full(cfg.ray_count, np.inf)
    best_cls = np.full(cfg.ray_count, RayClass.FREE, dtype=object)

    containing: list[ConvexPolygon] = []
    for obstacle in course.obstacles:
        # A polygon the robot is inside (crawling under, climbing over)
        # does not paint the view; rays render what lies beyond it.
        if obstacle.polygon.contains(origin):
            containing.append(obstacle.polygon)
            continue
        t = obstacle.polygon.raycast_many(origin, dirs)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_cls[closer] = _OBSTACLE_RAY_CLASS[obstacle.oclass]

    g = course.goal
    tg = _ray_disc(origin, dirs, (g.x, g.y), g.radius)
    closer = tg < best_t
    best_t[closer] = tg[closer]
    best_cls[closer] = RayClass.GOAL

    out_of_range = best_t > cfg.max_range
    best_t[out_of_range] = cfg.max_range
    best_cls[out_of_range] = RayClass.FREE

    bearings = np.linspace(-cfg.fov / 2.0, cfg.fov / 2.0, cfg.ray_count)
    rays = tuple(
        Ray(bearing=float(b), distance=float(t), hit_class=c)
        for b, t, c in zip(bearings, best_t, best_cls)
    )

    goal_vec = np.array([g.x, g.y]) - origin
    goal_dist = float(np.hypot(*goal_vec))
    goal_bearing = wrap_angle(math.atan2(goal_vec[1], goal_vec[0]) - state.heading)
    visible = abs(goal_bearing) <= cfg.fov / 2.0 and goal_dist <= cfg.max_range
    if visible and goal_dist > 1e-9:
        for obstacle in course.obstacles:
            if obstacle.oclass is ObstacleClass.GOAL_MARKER:
                continue
            if any(p is obstacle.polygon for p in containing):
                continue
            t = obstacle.polygon.raycast(origin, goal_vec)
            if t < 1.0 - 1e-9:
                visible = False
                break

    raster = _render_raster(rays, visible, goal_bearing, cfg) if with_raster else None
    return Observation(
        rays=rays, goal_visible=visible,
        goal_bearing=goal_bearing if visible else 0.0, raster=raster,
    )


_RAY_COLORS = {
    RayClass.FREE: (235, 235, 235),
    RayClass.WALL: (60, 60, 60),
    RayClass.LOW_OVERHANG: (200, 120, 40),
    RayClass.STEP: (70, 110, 200),
    RayClass.GOAL: (200, 40, 40),
}


def _render_raster(rays, goal_visible: bool, goal_bearing: float, cfg: ViewConfig):
    from PIL import Image, ImageDraw

    size = cfg.raster_size
    img = Image.new("RGB", (size, size), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    apex = (size / 2.0, size - 4.0)
    scale = (size - 16.0) / cfg.max_range
    for ray in rays:
        # Screen frame: forward is up, positive bearing is left.
        dx = -math.sin(ray.bearing)
        dy = -math.cos(ray.bearing)
        end = (apex[0] + dx * ray.distance * scale, apex[1] + dy * ray.distance * scale)
        draw.line([apex, end], fill=_RAY_COLORS[ray.hit_class], width=2)
    if goal_visible:
        dx = -math.sin(goal_bearing)
        dy = -math.cos(goal_bearing)
        cx = apex[0] + dx * 0.92 * (size / 2.0)
        cy = apex[1] + dy * 0.92 * (size / 2.0)
        draw.ellipse([cx - 5, cy - 5, cx + 5, cy + 5], fill=(200, 40, 40))
    return img


# ----------------------------------------------------------------------
# Privileged helpers (oracle policies, validation, metrics)
# ----------------------------------------------------------------------


def overlapped_classes(state: RobotState, course: CourseSpec) -> set[ObstacleClass]:
    """Classes of obstacles the robot disc currently overlaps."""
    origin = (state.x, state.y)
    out = set()
    for obstacle in course.obstacles:
        if obstacle.polygon.distance(origin) < ROBOT_RADIUS - CONTACT_EPS:
            out.add(obstacle.oclass)
    return out


def with_pose(
    state: RobotState, x: float, y: float, heading: float, stuck: bool | None = None
) -> RobotState:
    out = replace(state, x=x, y=y, heading=wrap_angle(heading))
    if stuck is not None:
        out = replace(out, stuck_flag=stuck)
    return out
