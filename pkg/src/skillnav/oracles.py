"""Privileged deterministic policies that answer prompt bundles.

Three flavors ablate how much the controller remembers and how far it
looks ahead:

- GreedyVisible reacts to the current view alone through a fixed
  decision table.
- MemorySingle scores every single next command by rolling it through
  the motion model, penalizing cells it has already visited.
- MemoryPlan runs the same scoring as a beam search several commands
  deep and replans every query, so it can pay for a detour that only
  looks good two or three commands out.

The memory flavors keep no process state: everything they remember
rides inside their own replies as one machine-readable memo line, read
back out of the history block of the next bundle. Their memory is
therefore exactly what the prompt carries, no more. None of the flavors
touch the distance-field oracle; their world access is the rendered
observation plus collision rollouts of the motion model.
"""

from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass

from skillnav.catalog import Magnitude, SkillCommand, SkillKind, lookup_params
from skillnav.course import CourseSpec
from skillnav.prompting import (
    DEFAULT_PLAN_HORIZON,
    MethodVariant,
    PromptBundle,
    expects_plan,
)
from skillnav.protocol import render_plan_line, render_terminal
from skillnav.simulator import (
    Observation,
    RayClass,
    RobotState,
    check_goal,
    render_observation,
    step_skill,
)


class OracleFlavor(enum.Enum):
    GREEDY_VISIBLE = "GreedyVisible"
    MEMORY_SINGLE = "MemorySingle"
    MEMORY_PLAN = "MemoryPlan"


def parse_flavor(name: str) -> OracleFlavor:
    for f in OracleFlavor:
        if f.value.lower() == name.strip().lower():
            return f
    raise ValueError(f"unknown oracle flavor {name!r}")


def flavor_for_variant(variant: MethodVariant) -> OracleFlavor | None:
    """Default pairing used by the harness; Random needs no backend."""
    return {
        MethodVariant.RANDOM: None,
        MethodVariant.NO_HISTORY: OracleFlavor.GREEDY_VISIBLE,
        MethodVariant.NO_MULTI_STEP: OracleFlavor.MEMORY_SINGLE,
        MethodVariant.VLM_PC: OracleFlavor.MEMORY_PLAN,
        MethodVariant.VLM_PC_IC: OracleFlavor.MEMORY_PLAN,
    }[variant]


# Reactive steering thresholds.
GOAL_TURN_BEARING = 0.4  # face the goal before walking at it
GOAL_FAR = 2.2  # beyond this, approach with Walk Medium
GOAL_NEAR = 0.9  # inside this, a Small crawl lands in the region
PROBE_RANGE = 1.2  # obstacles further than this do not drive reactions
FORWARD_CONE = 0.35  # half-angle of the "dead ahead" ray sector

# Rollout scoring.
ROLLOUT_SUBSTEPS = 20
PLAN_DEPTH = 3
PLAN_BEAM = 6
W_TIME = 0.12
W_STUCK = 1.0
W_VISITED = 0.8
W_SCAR = 2.0
SCAR_RADIUS = 0.8
SCAR_AFTER = 2  # no-progress streak that marks a dead end
VISITED_CAP = 40
CELL = 0.5

# A worked example fires when the robot stands close to its pose.
HINT_RADIUS = 0.75
HINT_HEADING = 0.6

_S, _M = Magnitude.SMALL, Magnitude.MEDIUM
# Large is deliberately absent: the search can always compose two
# smaller commands, while worked examples may hand out Large directly.
_CANDIDATES = (
    SkillCommand(SkillKind.WALK, _M),
    SkillCommand(SkillKind.WALK, _S),
    SkillCommand(SkillKind.CRAWL, _M),
    SkillCommand(SkillKind.CRAWL, _S),
    SkillCommand(SkillKind.CLIMB, _M),
    SkillCommand(SkillKind.CLIMB, _S),
    SkillCommand(SkillKind.TURN_LEFT, _M),
    SkillCommand(SkillKind.TURN_LEFT, _S),
    SkillCommand(SkillKind.TURN_RIGHT, _M),
    SkillCommand(SkillKind.TURN_RIGHT, _S),
    SkillCommand(SkillKind.BACKWARD, _S),
)


def _goal_dist(state: RobotState, course: CourseSpec) -> float:
    return math.hypot(state.x - course.goal.x, state.y - course.goal.y)


def _cell(x: float, y: float) -> tuple[float, float]:
    return (round(x / CELL) * CELL, round(y / CELL) * CELL)


# ----------------------------------------------------------------------
# Memo line: the whole memory, carried verbatim in the reply text
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Memo:
    gd: float | None = None
    nr: int = 0
    used: tuple[int, ...] = ()
    scars: tuple[tuple[float, float], ...] = ()
    visited: tuple[tuple[float, float], ...] = ()


_MEMO_RE = re.compile(
    r"Note: gd=([-\d.]+) nr=(\d+) used=\[([^\]\n]*)\] "
    r"scars=\[([^\]\n]*)\] visited=\[([^\]\n]*)\]"
)


def _pairs(field: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in field.split(";"):
        if not item:
            continue
        a, b = item.split(",")
        out.append((float(a), float(b)))
    return tuple(out)


def read_memo(text: str) -> Memo:
    """Most recent memo anywhere in the prompt text; empty default."""
    last = None
    for m in _MEMO_RE.finditer(text):
        last = m
    if last is None:
        return Memo()
    return Memo(
        gd=float(last.group(1)),
        nr=int(last.group(2)),
        used=tuple(int(t) for t in last.group(3).split(";") if t),
        scars=_pairs(last.group(4)),
        visited=_pairs(last.group(5)),
    )


def memo_line(memo: Memo) -> str:
    used = ";".join(str(i) for i in memo.used)
    scars = ";".join(f"{x:.1f},{y:.1f}" for x, y in memo.scars)
    visited = ";".join(f"{x:.1f},{y:.1f}" for x, y in memo.visited)
    return f"Note: gd={memo.gd:.2f} nr={memo.nr} used=[{used}] scars=[{scars}] visited=[{visited}]"


# ----------------------------------------------------------------------
# GreedyVisible: fixed decision table over the current view
# ----------------------------------------------------------------------


def _nearest_forward(obs: Observation) -> tuple[RayClass, float] | None:
    best: tuple[RayClass, float] | None = None
    for ray in obs.rays:
        if abs(ray.bearing) > FORWARD_CONE or ray.hit_class is RayClass.FREE:
            continue
        if ray.distance <= PROBE_RANGE and (best is None or ray.distance < best[1]):
            best = (ray.hit_class, ray.distance)
    return best


def _turn_toward(bearing: float) -> SkillCommand:
    # A visible goal is within the half-fov, so a Small turn always
    # brings it inside the walk-at-it cone.
    kind = SkillKind.TURN_LEFT if bearing > 0 else SkillKind.TURN_RIGHT
    return SkillCommand(kind, _S)


def greedy_action(state: RobotState, course: CourseSpec, obs: Observation) -> SkillCommand:
    if obs.goal_visible:
        if abs(obs.goal_bearing) > GOAL_TURN_BEARING:
            return _turn_toward(obs.goal_bearing)
        gd = _goal_dist(state, course)
        if gd >= GOAL_FAR:
            return SkillCommand(SkillKind.WALK, _M)
        if gd >= GOAL_NEAR:
            return SkillCommand(SkillKind.WALK, _S)
        return SkillCommand(SkillKind.CRAWL, _S)
    hit = _nearest_forward(obs)
    if hit is not None:
        cls = hit[0]
        if cls is RayClass.LOW_OVERHANG:
            return SkillCommand(SkillKind.CRAWL, _M)
        if cls is RayClass.STEP:
            return SkillCommand(SkillKind.CLIMB, _S)
        if cls is RayClass.WALL:
            return SkillCommand(SkillKind.TURN_RIGHT, _S)
        return SkillCommand(SkillKind.WALK, _M)  # goal marker: walkable
    if state.stuck_flag:
        # Open view yet no motion: assume an unseen lip and try to climb.
        return SkillCommand(SkillKind.CLIMB, _S)
    return SkillCommand(SkillKind.WALK, _M)


# ----------------------------------------------------------------------
# Scored rollouts shared by the memory flavors
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class _Node:
    state: RobotState
    path: tuple[SkillCommand, ...]
    elapsed: float
    stuck: int
    reached: bool


def _score(node: _Node, course: CourseSpec, counts, scars, here: tuple[float, float]) -> float:
    if node.reached:
        return -1000.0 + 0.01 * node.elapsed
    s = _goal_dist(node.state, course)
    s += W_TIME * node.elapsed
    s += W_STUCK * node.stuck
    cell = _cell(node.state.x, node.state.y)
    count = counts.get(cell, 0)
    # Standing ground (turning in place) costs a constant; moving back
    # into beaten ground costs in proportion to how beaten it is.
    s += W_VISITED * (min(count, 1) if cell == here else count)
    for sx, sy in scars:
        if math.hypot(node.state.x - sx, node.state.y - sy) < SCAR_RADIUS:
            s += W_SCAR
            break
    return s


def plan_search(
    state: RobotState,
    course: CourseSpec,
    counts,
    scars,
    depth: int = PLAN_DEPTH,
    beam: int = PLAN_BEAM,
) -> tuple[SkillCommand, ...]:
    """Best command sequence by beam search over motion-model rollouts."""
    frontier = [_Node(state, (), 0.0, 0, check_goal(state, course))]
    here = _cell(state.x, state.y)
    best: tuple[float, int, _Node] | None = None
    seq = 0
    for _ in range(depth):
        children: list[tuple[float, int, _Node]] = []
        for node in frontier:
            if node.reached:
                continue
            for cmd in _CANDIDATES:
                ns = step_skill(node.state, course, cmd, substeps=ROLLOUT_SUBSTEPS)
                child = _Node(
                    state=ns,
                    path=node.path + (cmd,),
                    elapsed=node.elapsed + lookup_params(cmd).duration,
                    stuck=node.stuck + (1 if ns.stuck_flag else 0),
                    reached=check_goal(ns, course),
                )
                seq += 1
                children.append((_score(child, course, counts, scars, here), seq, child))
        if not children:
            break
        children.sort(key=lambda c: (c[0], c[1]))
        if best is None or children[0][:2] < best[:2]:
            best = children[0]
        frontier = [c[2] for c in children[:beam]]
    if best is None or not best[2].path:
        return (SkillCommand(SkillKind.WALK, _S),)
    return best[2].path


def _active_hint(
    course: CourseSpec, state: RobotState, used: tuple[int, ...]
) -> tuple[int, SkillCommand] | None:
    from skillnav.geometry import wrap_angle

    for idx, ex in enumerate(course.icl_annotations):
        if idx in used:
            continue
        if math.hypot(state.x - ex.pose.x, state.y - ex.pose.y) > HINT_RADIUS:
            continue
        if abs(wrap_angle(state.heading - ex.pose.heading)) > HINT_HEADING:
            continue
        return idx, ex.command
    return None


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------


def oracle_policy(
    flavor: OracleFlavor, bundle: PromptBundle, state: RobotState, course: CourseSpec
) -> str:
    """Full response text; always parses back with quality Exact."""
    if flavor is OracleFlavor.GREEDY_VISIBLE:
        obs = render_observation(state, course)
        action = greedy_action(state, course, obs)
        lines = []
        if expects_plan(bundle.variant):
            lines.append(render_plan_line((action,)))
        lines.append(render_terminal(not state.stuck_flag, action))
        return "\n".join(lines)

    memo = read_memo(bundle.user_text())
    gd = _goal_dist(state, course)
    progress = (memo.gd - gd > 0.05) if memo.gd is not None else not state.stuck_flag
    nr = 0 if progress else memo.nr + 1

    scars = memo.scars
    if nr >= SCAR_AFTER and all(
        math.hypot(state.x - sx, state.y - sy) > CELL for sx, sy in scars
    ):
        scars = scars + (_cell(state.x, state.y),)

    here = _cell(state.x, state.y)
    counts = Counter(memo.visited)
    counts[here] += 1
    visited = (memo.visited + (here,))[-VISITED_CAP:]

    used = memo.used
    if flavor is OracleFlavor.MEMORY_SINGLE:
        path = plan_search(state, course, counts, scars, depth=1, beam=1)
    else:
        hint = _active_hint(course, state, used) if bundle.variant is MethodVariant.VLM_PC_IC else None
        if hint is not None:
            idx, cmd = hint
            used = used + (idx,)
            after = step_skill(state, course, cmd, substeps=ROLLOUT_SUBSTEPS)
            if check_goal(after, course):
                path = (cmd,)
            else:
                path = (cmd,) + plan_search(after, course, counts, scars, depth=2)[:2]
        else:
            path = plan_search(state, course, counts, scars)

    lines = [memo_line(Memo(gd=gd, nr=nr, used=used, scars=scars, visited=visited))]
    if flavor is OracleFlavor.MEMORY_PLAN and expects_plan(bundle.variant):
        lines.append(render_plan_line(path[:DEFAULT_PLAN_HORIZON]))
    lines.append(render_terminal(progress, path[0]))
    return "\n".join(lines)
