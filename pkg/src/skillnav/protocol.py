"""Response protocol: structured decisions from free-form model text.

A well-formed response ends with a three-token terminal line — a yes/no
progress judgment, a skill, and a magnitude — optionally preceded by an
enumerated multi-step plan. Parsing is total: it scans from the end of
arbitrary text, tolerates case, punctuation, and markdown, and reports
how much repair was needed via parse_quality.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from skillnav.catalog import (
    Magnitude,
    SkillCommand,
    SkillKind,
    canonical_name,
    magnitude_name,
    parse_magnitude_name,
    try_parse_skill_name,
)

PLAN_MAX = 8


class ParseQuality(enum.Enum):
    EXACT = "Exact"
    RECOVERED = "Recovered"
    FALLBACK = "Fallback"


@dataclass(frozen=True)
class Plan:
    steps: tuple[SkillCommand, ...]
    source_text: str


@dataclass(frozen=True)
class ParsedDecision:
    progress: bool
    action: SkillCommand
    plan: Plan | None
    raw: str
    parse_quality: ParseQuality


@dataclass(frozen=True)
class MalformedResponse:
    """Error value: no terminal triple anywhere in the text."""

    raw: str
    reason: str


@dataclass(frozen=True)
class ProtocolConfig:
    fallback_command: SkillCommand = field(
        default_factory=lambda: SkillCommand(SkillKind.WALK, Magnitude.SMALL)
    )


def fallback_decision(cfg: ProtocolConfig | None = None) -> ParsedDecision:
    """Decision used once the retry budget is spent; never inspects text."""
    cfg = cfg or ProtocolConfig()
    return ParsedDecision(
        progress=False,
        action=cfg.fallback_command,
        plan=None,
        raw="",
        parse_quality=ParseQuality.FALLBACK,
    )


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------

_WORD_RE = re.compile(r"[A-Za-z]+")
_YESNO = {"yes": True, "no": False}
# Strict terminal line: triple only, canonical spacing aside, no prose.
_EXACT_LINE_RE = re.compile(
    r"^(yes|no)\s+([A-Za-z]+(?:\s+[A-Za-z]+)?)\s+(small|medium|large)$",
    re.IGNORECASE,
)
_ITEM_MARKER_RE = re.compile(r"(\d{1,3})[.)]\s*")


def _words(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0).lower(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def _find_triple(toks) -> tuple[bool, SkillCommand, int, bool] | None:
    """Last (progress, action, start offset, magnitude_explicit) in the text."""
    n = len(toks)
    # Pass 1: magnitude-anchored, scanning backwards. The skill may be
    # one word (Walk, TurnLeft) or two (turn left, back up).
    for i in range(n - 1, -1, -1):
        mag = parse_magnitude_name(toks[i][0])
        if mag is None:
            continue
        for span in (2, 1):
            j = i - span - 1  # candidate yes/no index
            if j < 0:
                continue
            if toks[j][0] not in _YESNO:
                continue
            skill = try_parse_skill_name(" ".join(t[0] for t in toks[i - span : i]))
            if skill is not None:
                return _YESNO[toks[j][0]], SkillCommand(skill, mag), toks[j][1], True
    # Pass 2: yes/no + skill with the magnitude missing; Medium default.
    for i in range(n - 1, 0, -1):
        for span in (2, 1):
            j = i - span + 1  # first skill word index
            if j < 1:
                continue
            if toks[j - 1][0] not in _YESNO:
                continue
            skill = try_parse_skill_name(" ".join(t[0] for t in toks[j : i + 1]))
            if skill is not None:
                cmd = SkillCommand(skill, Magnitude.MEDIUM)
                return _YESNO[toks[j - 1][0]], cmd, toks[j - 1][1], False
    return None


def _parse_plan_item(text: str) -> SkillCommand | None:
    words = [w for w, _, _ in _words(text)]
    if not words:
        return None
    mag = Magnitude.MEDIUM
    tail = parse_magnitude_name(words[-1])
    if tail is not None:
        mag = tail
        words = words[:-1]
    if not words:
        return None
    if len(words) >= 2:
        skill = try_parse_skill_name(" ".join(words[:2]))
        if skill is not None:
            return SkillCommand(skill, mag)
    skill = try_parse_skill_name(words[0])
    if skill is not None:
        return SkillCommand(skill, mag)
    return None


def _extract_plan(pre_text: str) -> Plan | None:
    """Most recent enumerated list (1. ... 2. ...) before the triple."""
    markers = list(_ITEM_MARKER_RE.finditer(pre_text))
    if not markers:
        return None
    runs: list[list[re.Match]] = []
    current: list[re.Match] = []
    for m in markers:
        if int(m.group(1)) == 1 and current:
            runs.append(current)
            current = []
        current.append(m)
    runs.append(current)
    run = runs[-1]
    steps: list[SkillCommand] = []
    first_start = run[0].start()
    last_end = run[0].end()
    for idx, m in enumerate(run):
        end = run[idx + 1].start() if idx + 1 < len(run) else len(pre_text)
        nl = pre_text.find("\n", m.end())
        if nl != -1:
            end = min(end, nl)
        cmd = _parse_plan_item(pre_text[m.end() : end])
        last_end = max(last_end, end)
        if cmd is not None and len(steps) < PLAN_MAX:
            steps.append(cmd)
    if not steps:
        return None
    return Plan(steps=tuple(steps), source_text=pre_text[first_start:last_end].strip())


def _last_nonblank_line(text: str) -> str:
    for line in reversed(text.splitlines()):
        if line.strip():
            return line.strip()
    return ""


def parse_response(raw: str, expects_plan: bool) -> ParsedDecision | MalformedResponse:
    """Total parse of arbitrary text; never raises on content."""
    toks = _words(raw)
    found = _find_triple(toks)
    if found is None:
        return MalformedResponse(raw=raw, reason="no terminal yes/no skill magnitude triple")
    progress, action, triple_start, mag_explicit = found

    repaired = not mag_explicit
    plan: Plan | None = None
    if expects_plan:
        plan = _extract_plan(raw[:triple_start])
        if plan is not None and plan.steps[0] != action:
            # Terminal triple wins; replace the plan head and flag repair.
            plan = Plan(steps=(action,) + plan.steps[1:], source_text=plan.source_text)
            repaired = True

    exact_line = bool(_EXACT_LINE_RE.fullmatch(_last_nonblank_line(raw)))
    quality = (
        ParseQuality.EXACT if exact_line and not repaired else ParseQuality.RECOVERED
    )
    return ParsedDecision(
        progress=progress, action=action, plan=plan, raw=raw, parse_quality=quality
    )


# ----------------------------------------------------------------------
# Rendering
# ----------------------------------------------------------------------


def render_command(cmd: SkillCommand, *, always_magnitude: bool = False) -> str:
    """Plan-item form: magnitude shown only when it is not the default."""
    if always_magnitude or cmd.magnitude is not Magnitude.MEDIUM:
        return f"{canonical_name(cmd.skill)} {magnitude_name(cmd.magnitude)}"
    return canonical_name(cmd.skill)


def render_plan_line(steps) -> str:
    items = " ".join(f"{i + 1}. {render_command(s)}" for i, s in enumerate(steps))
    return f"Plan: {items}"


def render_terminal(progress: bool, action: SkillCommand) -> str:
    word = "Yes" if progress else "No"
    return f"{word} {canonical_name(action.skill)} {magnitude_name(action.magnitude)}"


def render_canonical(decision: ParsedDecision) -> str:
    """Canonical wire text; parse_response inverts it exactly."""
    lines = []
    if decision.plan is not None:
        lines.append(render_plan_line(decision.plan.steps))
    lines.append(render_terminal(decision.progress, decision.action))
    return "\n".join(lines)


def make_decision(
    progress: bool,
    action: SkillCommand,
    plan_steps=None,
    raw: str = "",
    quality: ParseQuality = ParseQuality.EXACT,
) -> ParsedDecision:
    plan = None
    if plan_steps:
        steps = tuple(plan_steps)
        if steps[0] != action:
            raise ValueError("plan head must equal the action")
        plan = Plan(steps=steps, source_text=render_plan_line(steps))
    return ParsedDecision(
        progress=progress, action=action, plan=plan, raw=raw, parse_quality=quality
    )
