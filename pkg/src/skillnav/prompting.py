"""Query assembly: method variants, prompt cycle, history, worked examples.

Each query renders one template (addressed by variant and by whether the
query falls on the initial-prompt cycle) with five placeholders:
{SKILL_MENU}, {HISTORY_BLOCK}, {PRIOR_PLAN}, {ICL_BLOCK}, {FORMAT_SPEC}.
The full history rides along as text plus one attached observation per
step; backends choose between the raster and the semantic text form.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

from skillnav.catalog import SkillKind, Magnitude, SkillCommand, canonical_name, lookup_params
from skillnav.course import IclExample
from skillnav.protocol import ParsedDecision, Plan
from skillnav.simulator import Observation, RayClass, ViewConfig

DEFAULT_PLAN_HORIZON = 3
REPROMPT_PERIOD = 6  # initial prompt repeated after every six responses


class MethodVariant(enum.Enum):
    RANDOM = "Random"
    NO_HISTORY = "NoHistory"
    NO_MULTI_STEP = "NoMultiStep"
    VLM_PC = "VlmPc"
    VLM_PC_IC = "VlmPcIc"


class VariantMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ObservationAttachment:
    ref: str
    text: str
    observation: Observation


@dataclass(frozen=True)
class Message:
    role: str
    text: str
    attachments: tuple[ObservationAttachment, ...] = ()


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[Message, ...]
    query_index: int
    is_initial_cycle: bool
    variant: MethodVariant

    def observation_count(self) -> int:
        return sum(len(m.attachments) for m in self.messages)

    def user_text(self) -> str:
        return self.messages[-1].text


@dataclass(frozen=True)
class HistoryEntry:
    step_index: int
    observation_ref: str
    observation: Observation
    prompt_text: str
    response_text: str
    parsed: ParsedDecision


def parse_variant(name: str) -> MethodVariant:
    for v in MethodVariant:
        if v.value.lower() == name.strip().lower():
            return v
    raise VariantMismatch(f"unknown variant {name!r}; one of {[v.value for v in MethodVariant]}")


def expects_plan(variant: MethodVariant) -> bool:
    return variant in (MethodVariant.VLM_PC, MethodVariant.VLM_PC_IC, MethodVariant.NO_HISTORY)


def uses_initial_cycle(variant: MethodVariant) -> bool:
    return variant in (MethodVariant.VLM_PC, MethodVariant.VLM_PC_IC, MethodVariant.NO_MULTI_STEP)


def is_initial_query(variant: MethodVariant, query_index: int) -> bool:
    if variant is MethodVariant.NO_HISTORY:
        return True  # stateless queries always restate the full prompt
    return (query_index - 1) % REPROMPT_PERIOD == 0


# ----------------------------------------------------------------------
# Placeholder values
# ----------------------------------------------------------------------

_SKILL_BLURBS: dict[SkillKind, str] = {
    SkillKind.WALK: "walk forward at normal height",
    SkillKind.CLIMB: "forward in a climbing gait that can mount step-height obstacles",
    SkillKind.CRAWL: "forward pressed low to the ground, fits under low overhangs",
    SkillKind.TURN_LEFT: "rotate in place to the left",
    SkillKind.TURN_RIGHT: "rotate in place to the right",
    SkillKind.BACKWARD: "reverse straight back",
}


def _fmt(x: float) -> str:
    return f"{x:g}"


def skill_menu() -> str:
    lines = []
    for skill in SkillKind:
        rows = {m: lookup_params(SkillCommand(skill, m)) for m in Magnitude}
        speeds = {abs(r.x_velocity) for r in rows.values()}
        motion = rows[Magnitude.MEDIUM]
        if motion.x_velocity != 0.0:
            rate = (
                f"{_fmt(min(speeds))}-{_fmt(max(speeds))} m/s"
                if len(speeds) > 1
                else f"{_fmt(abs(motion.x_velocity))} m/s"
            )
        else:
            rate = f"{_fmt(abs(motion.yaw_speed))} rad/s"
        durs = ", ".join(
            f"{m.name.capitalize()} = {_fmt(rows[m].duration)} s" for m in Magnitude
        )
        lines.append(
            f"- {canonical_name(skill)}: {_SKILL_BLURBS[skill]} ({rate}). {durs}."
        )
    return "\n".join(lines)


def format_spec(with_plan: bool, plan_horizon: int = DEFAULT_PLAN_HORIZON) -> str:
    terminal = (
        'End your reply with exactly three words on the final line: "Yes" or "No" '
        "(whether the previous command made progress), then the skill to execute now, "
        'then its magnitude. Example final line: "Yes Walk Medium".'
    )
    if not with_plan:
        return terminal
    return (
        f"Write your plan for up to the next {plan_horizon} commands as one enumerated "
        'list on its own line, like "Plan: 1. Crawl 2. Walk Large 3. TurnLeft". '
        + terminal
    )


def icl_block(examples: tuple[IclExample, ...]) -> str:
    lines = [
        "Worked examples for this course. Each gives the best command a human "
        "pilot chose at a spot they reached:"
    ]
    for e in examples:
        deg = math.degrees(e.pose.heading)
        lines.append(
            f"- At ({e.pose.x:.2f}, {e.pose.y:.2f}) facing {deg:+.0f} degrees: "
            f"{canonical_name(e.command.skill)} {e.command.magnitude.name.capitalize()}"
        )
    return "\n".join(lines)


def serialize_observation(obs: Observation, ref: str, cfg: ViewConfig = ViewConfig()) -> str:
    """Stable text form of one observation (the non-image consumer view)."""
    sectors = 8
    per = max(1, len(obs.rays) // sectors)
    lines = [
        f"[{ref}] semantic forward view, fov {round(math.degrees(cfg.fov))} degrees, "
        f"max range {cfg.max_range:g} m:"
    ]
    for s in range(0, len(obs.rays), per):
        chunk = obs.rays[s : s + per]
        lo = math.degrees(chunk[0].bearing)
        hi = math.degrees(chunk[-1].bearing)
        hits = [r for r in chunk if r.hit_class is not RayClass.FREE]
        if hits:
            nearest = min(hits, key=lambda r: r.distance)
            desc = f"{nearest.hit_class.value} at {nearest.distance:.2f} m"
        else:
            desc = "open"
        lines.append(f"  {lo:+.0f}..{hi:+.0f} deg: {desc}")
    if obs.goal_visible:
        lines.append(
            f"  goal marker: visible at bearing {math.degrees(obs.goal_bearing):+.0f} degrees"
        )
    else:
        lines.append("  goal marker: not visible")
    return "\n".join(lines)


# ----------------------------------------------------------------------
# Template rendering
# ----------------------------------------------------------------------

PLACEHOLDERS = ("SKILL_MENU", "HISTORY_BLOCK", "PRIOR_PLAN", "ICL_BLOCK", "FORMAT_SPEC")


@functools.lru_cache(maxsize=None)
def _template(name: str) -> str:
    return (resources.files("skillnav") / "templates" / f"{name}.txt").read_text()


def _render(template: str, values: dict[str, str]) -> str:
    out = template
    for key in PLACEHOLDERS:
        token = "{" + key + "}"
        value = values.get(key, "")
        if value:
            out = out.replace(token, value)
        else:
            out = out.replace(token + "\n", "").replace(token, "")
    return out


def _template_name(variant: MethodVariant, initial: bool) -> str:
    if variant is MethodVariant.NO_HISTORY:
        return "nohistory_initial"
    base = "nomultistep" if variant is MethodVariant.NO_MULTI_STEP else "vlmpc"
    return f"{base}_{'initial' if initial else 'successive'}"


def _cap_history(history: list[HistoryEntry], cap: int | None) -> tuple[list[HistoryEntry], int]:
    """Keep entry 1 plus the most recent entries within a total budget of
    cap observations (current query included). Returns (kept, omitted)."""
    if cap is None:
        return list(history), 0
    keep_prior = max(0, cap - 1)
    if len(history) <= keep_prior:
        return list(history), 0
    if keep_prior == 0:
        return [], len(history)
    if keep_prior == 1:
        return [history[0]], len(history) - 1
    kept = [history[0]] + list(history[-(keep_prior - 1):])
    return kept, len(history) - len(kept)


def _history_block(kept: list[HistoryEntry], omitted: int) -> str:
    if not kept:
        return "(none yet - this is the first command of the attempt)"
    parts = []
    for pos, e in enumerate(kept):
        parts.append(
            f"Step {e.step_index} camera view: attached as {e.observation_ref}.\n"
            f"Step {e.step_index} reply:\n{e.response_text}"
        )
        if omitted and pos == 0:
            parts.append(f"(... {omitted} earlier steps omitted ...)")
    return "\n\n".join(parts)


def _prior_plan_block(plan_carry: Plan | None) -> str:
    if plan_carry is None:
        return ""
    return (
        "Your prior existing plan, quoted from your previous reply:\n"
        f"{plan_carry.source_text}\n"
        "After reasoning, compare the new plan to the prior existing plan and "
        "say whether you are keeping it or replacing it."
    )


def assemble_query(
    variant: MethodVariant,
    history: list[HistoryEntry],
    current: Observation,
    plan_carry: Plan | None = None,
    icl: tuple[IclExample, ...] | None = None,
    history_cap: int | None = None,
    plan_horizon: int = DEFAULT_PLAN_HORIZON,
    view_cfg: ViewConfig = ViewConfig(),
) -> PromptBundle:
    """Build the full query for one decision point. Pure in all inputs."""
    if variant is MethodVariant.RANDOM:
        raise VariantMismatch("Random selects commands without querying")
    if icl and variant is not MethodVariant.VLM_PC_IC:
        raise VariantMismatch(f"worked examples provided for variant {variant.value}")

    query_index = len(history) + 1
    initial = is_initial_query(variant, query_index)

    if variant is MethodVariant.NO_HISTORY:
        kept, omitted = [], 0
    else:
        kept, omitted = _cap_history(history, history_cap)

    def _para(block: str) -> str:
        # Non-empty blocks read as their own paragraph.
        return block + "\n" if block else ""

    prior_plan = _prior_plan_block(plan_carry) if expects_plan(variant) else ""
    icl_text = (
        icl_block(tuple(icl))
        if (variant is MethodVariant.VLM_PC_IC and icl and query_index == 1)
        else ""
    )
    values = {
        "SKILL_MENU": skill_menu(),
        "HISTORY_BLOCK": _para(_history_block(kept, omitted)),
        "PRIOR_PLAN": _para(prior_plan),
        "ICL_BLOCK": _para(icl_text),
        "FORMAT_SPEC": format_spec(expects_plan(variant), plan_horizon),
    }
    if variant is MethodVariant.NO_HISTORY:
        values["HISTORY_BLOCK"] = ""

    text = _render(_template(_template_name(variant, initial)), values)

    current_ref = f"obs-{query_index}"
    attachments = tuple(
        ObservationAttachment(
            ref=e.observation_ref,
            text=serialize_observation(e.observation, e.observation_ref, view_cfg),
            observation=e.observation,
        )
        for e in kept
    ) + (
        ObservationAttachment(
            ref=current_ref,
            text=serialize_observation(current, current_ref, view_cfg),
            observation=current,
        ),
    )

    messages = (
        Message(role="system", text=_template("system").rstrip("\n")),
        Message(role="user", text=text, attachments=attachments),
    )
    return PromptBundle(
        messages=messages,
        query_index=query_index,
        is_initial_cycle=initial,
        variant=variant,
    )


def record_entry(
    history: list[HistoryEntry],
    bundle: PromptBundle,
    response: str,
    parsed: ParsedDecision,
) -> list[HistoryEntry]:
    """Append-only history growth; prior entries are shared, not copied."""
    user = bundle.messages[-1]
    current = user.attachments[-1]
    entry = HistoryEntry(
        step_index=len(history) + 1,
        observation_ref=current.ref,
        observation=current.observation,
        prompt_text=user.text,
        response_text=response,
        parsed=parsed,
    )
    return list(history) + [entry]


def bundle_digest(bundle: PromptBundle) -> str:
    """Content hash used by scripted replay to detect drift."""
    doc = {
        "variant": bundle.variant.value,
        "query_index": bundle.query_index,
        "is_initial_cycle": bundle.is_initial_cycle,
        "messages": [
            {
                "role": m.role,
                "text": m.text,
                "observations": [{"ref": a.ref, "text": a.text} for a in m.attachments],
            }
            for m in bundle.messages
        ],
    }
    blob = json.dumps(doc, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
