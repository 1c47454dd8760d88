"""The six locomotion skills and their magnitude-indexed parameter tables.

Each (skill, magnitude) pair maps to a fixed low-level controller
parameterization: body-frame velocities, gait code, body height offset,
yaw rate, and how long the skill runs. The table is a compiled-in
constant; nothing here mutates at runtime.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class SkillKind(enum.Enum):
    WALK = "walk"
    CLIMB = "climb"
    CRAWL = "crawl"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    BACKWARD = "backward"


class Magnitude(enum.IntEnum):
    """Extent of a skill; orders SMALL < MEDIUM < LARGE."""

    SMALL = 1
    MEDIUM = 2
    LARGE = 3


@dataclass(frozen=True)
class SkillParams:
    """One row of the behavior table.

    x_velocity m/s (robot frame, signed), y_velocity m/s, gait_type
    (opaque controller code), body_height m (0 = nominal stance),
    yaw_speed rad/s (+ = left), duration s.
    """

    x_velocity: float
    y_velocity: float
    gait_type: int
    body_height: float
    yaw_speed: float
    duration: float


@dataclass(frozen=True)
class SkillCommand:
    skill: SkillKind
    magnitude: Magnitude


# Canonical single-token names used on the wire (responses, plans, dumps).
CANONICAL_NAMES: dict[SkillKind, str] = {
    SkillKind.WALK: "Walk",
    SkillKind.CLIMB: "Climb",
    SkillKind.CRAWL: "Crawl",
    SkillKind.TURN_LEFT: "TurnLeft",
    SkillKind.TURN_RIGHT: "TurnRight",
    SkillKind.BACKWARD: "Backward",
}

# Fixed synonym set for parsing model output; matching is case- and
# punctuation-insensitive but never fuzzy. Keys are normalized
# (lowercase, single spaces).
_SYNONYMS: dict[str, SkillKind] = {
    "walk": SkillKind.WALK,
    "walk forward": SkillKind.WALK,
    "climb": SkillKind.CLIMB,
    "crawl": SkillKind.CRAWL,
    "turnleft": SkillKind.TURN_LEFT,
    "turn left": SkillKind.TURN_LEFT,
    "left turn": SkillKind.TURN_LEFT,
    "turnright": SkillKind.TURN_RIGHT,
    "turn right": SkillKind.TURN_RIGHT,
    "right turn": SkillKind.TURN_RIGHT,
    "backward": SkillKind.BACKWARD,
    "backwards": SkillKind.BACKWARD,
    "back up": SkillKind.BACKWARD,
}

_MAGNITUDE_NAMES: dict[Magnitude, str] = {
    Magnitude.SMALL: "Small",
    Magnitude.MEDIUM: "Medium",
    Magnitude.LARGE: "Large",
}

_MAGNITUDE_SYNONYMS: dict[str, Magnitude] = {
    "small": Magnitude.SMALL,
    "medium": Magnitude.MEDIUM,
    "large": Magnitude.LARGE,
}


class UnknownSkill(ValueError):
    """Raised when a token names no catalog skill."""

    def __init__(self, text: str):
        super().__init__(f"unknown skill name: {text!r}")
        self.text = text


def _row(xv: float, gait: int, height: float, yaw: float, dur: float) -> SkillParams:
    return SkillParams(
        x_velocity=xv,
        y_velocity=0.0,
        gait_type=gait,
        body_height=height,
        yaw_speed=yaw,
        duration=dur,
    )


# 18-entry behavior table. Walk speeds up from Small to Medium/Large;
# climbing uses gait code 3; crawling drops the body 0.3 m; turns are
# in place (zero forward velocity).
_TABLE: dict[tuple[SkillKind, Magnitude], SkillParams] = {
    (SkillKind.WALK, Magnitude.SMALL): _row(0.4, 1, 0.0, 0.0, 3.0),
    (SkillKind.WALK, Magnitude.MEDIUM): _row(0.6, 1, 0.0, 0.0, 5.0),
    (SkillKind.WALK, Magnitude.LARGE): _row(0.6, 1, 0.0, 0.0, 7.0),
    (SkillKind.CLIMB, Magnitude.SMALL): _row(0.6, 3, 0.0, 0.0, 6.0),
    (SkillKind.CLIMB, Magnitude.MEDIUM): _row(0.6, 3, 0.0, 0.0, 9.0),
    (SkillKind.CLIMB, Magnitude.LARGE): _row(0.6, 3, 0.0, 0.0, 12.0),
    (SkillKind.CRAWL, Magnitude.SMALL): _row(0.3, 1, -0.3, 0.0, 2.0),
    (SkillKind.CRAWL, Magnitude.MEDIUM): _row(0.3, 1, -0.3, 0.0, 3.0),
    (SkillKind.CRAWL, Magnitude.LARGE): _row(0.3, 1, -0.3, 0.0, 4.0),
    (SkillKind.TURN_LEFT, Magnitude.SMALL): _row(0.0, 1, 0.0, 0.3, 2.5),
    (SkillKind.TURN_LEFT, Magnitude.MEDIUM): _row(0.0, 1, 0.0, 0.3, 3.5),
    (SkillKind.TURN_LEFT, Magnitude.LARGE): _row(0.0, 1, 0.0, 0.3, 4.5),
    (SkillKind.TURN_RIGHT, Magnitude.SMALL): _row(0.0, 1, 0.0, -0.3, 2.5),
    (SkillKind.TURN_RIGHT, Magnitude.MEDIUM): _row(0.0, 1, 0.0, -0.3, 3.5),
    (SkillKind.TURN_RIGHT, Magnitude.LARGE): _row(0.0, 1, 0.0, -0.3, 4.5),
    (SkillKind.BACKWARD, Magnitude.SMALL): _row(-0.3, 1, 0.0, 0.0, 1.5),
    (SkillKind.BACKWARD, Magnitude.MEDIUM): _row(-0.3, 1, 0.0, 0.0, 2.5),
    (SkillKind.BACKWARD, Magnitude.LARGE): _row(-0.3, 1, 0.0, 0.0, 5.0),
}

ALL_COMMANDS: tuple[SkillCommand, ...] = tuple(
    SkillCommand(skill, magnitude)
    for skill in SkillKind
    for magnitude in Magnitude
)

MAX_DURATION: float = max(p.duration for p in _TABLE.values())


def lookup_params(cmd: SkillCommand) -> SkillParams:
    """Return the exact table row for the command. Total over the 6x3 grid."""
    return _TABLE[(cmd.skill, cmd.magnitude)]


def motion_summary(cmd: SkillCommand) -> tuple[float, float, float]:
    """Closed-form (displacement m, turn angle rad, duration s) of a command."""
    p = lookup_params(cmd)
    return p.x_velocity * p.duration, p.yaw_speed * p.duration, p.duration


def canonical_name(skill: SkillKind) -> str:
    return CANONICAL_NAMES[skill]


def magnitude_name(magnitude: Magnitude) -> str:
    return _MAGNITUDE_NAMES[magnitude]


def command_label(cmd: SkillCommand) -> str:
    return f"{canonical_name(cmd.skill)} {magnitude_name(cmd.magnitude)}"


def _normalize(text: str) -> str:
    return " ".join(text.strip().lower().split())


def parse_skill_name(text: str) -> SkillKind:
    """Match a skill token against canonical names and the fixed synonym set.

    Case-insensitive; raises UnknownSkill for anything outside the set.
    """
    key = _normalize(text)
    try:
        return _SYNONYMS[key]
    except KeyError:
        raise UnknownSkill(text) from None


def try_parse_skill_name(text: str) -> SkillKind | None:
    return _SYNONYMS.get(_normalize(text))


def parse_magnitude_name(text: str) -> Magnitude | None:
    return _MAGNITUDE_SYNONYMS.get(_normalize(text))


def catalog_rows() -> list[dict]:
    """Structured dump of the full table, one row per (skill, magnitude)."""
    rows = []
    for cmd in ALL_COMMANDS:
        p = lookup_params(cmd)
        rows.append(
            {
                "skill": canonical_name(cmd.skill),
                "magnitude": magnitude_name(cmd.magnitude),
                "x_velocity": p.x_velocity,
                "y_velocity": p.y_velocity,
                "gait_type": p.gait_type,
                "body_height": p.body_height,
                "yaw_speed": p.yaw_speed,
                "duration": p.duration,
            }
        )
    return rows


def format_catalog_table() -> str:
    """Fixed-width text dump of catalog_rows for the CLI."""
    header = (
        f"{'skill':<10} {'magnitude':<9} {'x_vel':>6} {'y_vel':>6} "
        f"{'gait':>4} {'height':>7} {'yaw':>5} {'dur_s':>5}"
    )
    lines = [header, "-" * len(header)]
    for r in catalog_rows():
        lines.append(
            f"{r['skill']:<10} {r['magnitude']:<9} {r['x_velocity']:>6.2f} "
            f"{r['y_velocity']:>6.2f} {r['gait_type']:>4d} {r['body_height']:>7.2f} "
            f"{r['yaw_speed']:>5.2f} {r['duration']:>5.2f}"
        )
    return "\n".join(lines)
