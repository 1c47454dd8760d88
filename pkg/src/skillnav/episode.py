"""Receding-horizon episode driver.

One episode runs a single attempt at a course: observe, assemble the
query, obtain a response, parse it, execute only the terminal action,
repeat until the goal region is reached or the time budget runs out.
Commands are issued while cumulative simulated time is below the
budget; a started command always completes. A failed attempt is charged
exactly the full budget.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from skillnav import __version__
from skillnav.backends import (
    BackendKind,
    LiveBackend,
    OracleBackend,
    ScriptedBackend,
    TransportError,
)
from skillnav.catalog import ALL_COMMANDS, command_label
from skillnav.course import CourseSpec
from skillnav.prompting import (
    DEFAULT_PLAN_HORIZON,
    HistoryEntry,
    MethodVariant,
    VariantMismatch,
    assemble_query,
    bundle_digest,
    expects_plan,
    record_entry,
)
from skillnav.protocol import (
    MalformedResponse,
    ParsedDecision,
    ProtocolConfig,
    fallback_decision,
    parse_response,
)
from skillnav.simulator import (
    RobotState,
    ViewConfig,
    check_goal,
    initial_state,
    render_observation,
    step_skill,
)

DEFAULT_BUDGET_S = 100.0
DEFAULT_HISTORY_CAP = 8
DEFAULT_RETRY_BUDGET = 2


class Termination(enum.Enum):
    GOAL_REACHED = "GoalReached"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    BACKEND_FAILURE = "BackendFailure"


@dataclass(frozen=True)
class EpisodeConfig:
    budget_s: float = DEFAULT_BUDGET_S
    plan_horizon: int = DEFAULT_PLAN_HORIZON
    history_cap: int | None = DEFAULT_HISTORY_CAP
    retry_budget: int = DEFAULT_RETRY_BUDGET
    view: ViewConfig = field(default_factory=ViewConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def __post_init__(self):
        if self.budget_s <= 0:
            raise ValueError("budget_s must be positive")
        # The memo-bearing latest reply must survive history capping.
        if self.history_cap is not None and self.history_cap < 3:
            raise ValueError("history_cap must be None or >= 3")


@dataclass(frozen=True)
class QueryRow:
    """One query/response exchange; the last attempt of a step is final."""

    query_index: int
    attempt: int
    bundle_digest: str
    response_text: str
    final: bool
    action_label: str | None = None
    progress: bool | None = None
    parse_quality: str | None = None
    pose_after: tuple[float, float, float] | None = None
    sim_time_after: float | None = None
    stuck_after: bool | None = None


@dataclass(frozen=True)
class EpisodeResult:
    course: str
    variant: MethodVariant
    seed: int
    budget_s: float
    plan_horizon: int
    history_cap: int | None
    backend_label: str
    success: bool
    time_s: float
    steps: int
    termination: Termination
    rows: tuple[QueryRow, ...]
    final_state: RobotState


def backend_label(backend) -> str:
    if backend is None:
        return "none"
    if isinstance(backend, OracleBackend):
        return f"oracle:{backend.cfg.flavor.value}"
    if isinstance(backend, LiveBackend):
        return "live"
    if isinstance(backend, ScriptedBackend):
        return "scripted"
    return type(backend).__name__


def _finish(state, course, budget_s):
    """(success, time_s, termination) once the loop ends at `state`."""
    if check_goal(state, course):
        ok = state.sim_time <= budget_s + 1e-9
        return ok, (state.sim_time if ok else budget_s), Termination.GOAL_REACHED
    return False, budget_s, Termination.BUDGET_EXHAUSTED


def run_episode(
    course: CourseSpec,
    variant: MethodVariant,
    backend,
    seed: int,
    cfg: EpisodeConfig | None = None,
) -> EpisodeResult:
    cfg = cfg or EpisodeConfig()
    if variant is MethodVariant.VLM_PC_IC and not course.icl_annotations:
        raise VariantMismatch(f"course {course.name} carries no worked examples")
    if variant is not MethodVariant.RANDOM and backend is None:
        raise ValueError(f"variant {variant.value} needs a backend")

    state = initial_state(course)
    rows: list[QueryRow] = []
    history: list[HistoryEntry] = []
    plan_carry = None
    rng = random.Random(seed)
    steps = 0
    icl = course.icl_annotations if variant is MethodVariant.VLM_PC_IC else None

    while not check_goal(state, course) and state.sim_time < cfg.budget_s:
        query_index = steps + 1
        if variant is MethodVariant.RANDOM:
            decision = ParsedDecision(
                progress=not state.stuck_flag,
                action=ALL_COMMANDS[rng.randrange(len(ALL_COMMANDS))],
                plan=None,
                raw="",
                parse_quality=None,
            )
            attempt_rows = [
                QueryRow(query_index=query_index, attempt=1, bundle_digest="", response_text="", final=True)
            ]
        else:
            obs = render_observation(state, course, cfg.view)
            bundle = assemble_query(
                variant,
                history,
                obs,
                plan_carry=plan_carry,
                icl=icl,
                history_cap=cfg.history_cap,
                plan_horizon=cfg.plan_horizon,
                view_cfg=cfg.view,
            )
            digest = bundle_digest(bundle)
            privileged = (state, course) if isinstance(backend, OracleBackend) else None

            decision = None
            attempt_rows = []
            last_text = ""
            for attempt in range(1, cfg.retry_budget + 2):
                try:
                    reply = backend.query(bundle, privileged=privileged)
                except TransportError:
                    return _backend_failure(
                        course, variant, seed, cfg, backend, steps, rows + attempt_rows, state
                    )
                last_text = reply.text
                parsed = parse_response(reply.text, expects_plan(variant))
                final = not isinstance(parsed, MalformedResponse)
                attempt_rows.append(
                    QueryRow(
                        query_index=query_index,
                        attempt=attempt,
                        bundle_digest=digest,
                        response_text=reply.text,
                        final=final,
                    )
                )
                if final:
                    decision = parsed
                    break
            if decision is None:
                decision = fallback_decision(cfg.protocol)
                attempt_rows[-1] = _mark_final(attempt_rows[-1])
            history = record_entry(history, bundle, last_text, decision)
            plan_carry = decision.plan

        state = step_skill(state, course, decision.action)
        steps += 1
        attempt_rows[-1] = _with_outcome(attempt_rows[-1], decision, state)
        rows.extend(attempt_rows)

    success, time_s, termination = _finish(state, course, cfg.budget_s)
    return EpisodeResult(
        course=course.name,
        variant=variant,
        seed=seed,
        budget_s=cfg.budget_s,
        plan_horizon=cfg.plan_horizon,
        history_cap=cfg.history_cap,
        backend_label=backend_label(backend),
        success=success,
        time_s=time_s,
        steps=steps,
        termination=termination,
        rows=tuple(rows),
        final_state=state,
    )


def _mark_final(row: QueryRow) -> QueryRow:
    return QueryRow(
        query_index=row.query_index,
        attempt=row.attempt,
        bundle_digest=row.bundle_digest,
        response_text=row.response_text,
        final=True,
    )


def _with_outcome(row: QueryRow, decision: ParsedDecision, state: RobotState) -> QueryRow:
    return QueryRow(
        query_index=row.query_index,
        attempt=row.attempt,
        bundle_digest=row.bundle_digest,
        response_text=row.response_text,
        final=True,
        action_label=command_label(decision.action),
        progress=decision.progress,
        parse_quality=decision.parse_quality.value if decision.parse_quality else None,
        pose_after=(state.x, state.y, state.heading),
        sim_time_after=state.sim_time,
        stuck_after=state.stuck_flag,
    )


def _backend_failure(course, variant, seed, cfg, backend, steps, rows, state) -> EpisodeResult:
    return EpisodeResult(
        course=course.name,
        variant=variant,
        seed=seed,
        budget_s=cfg.budget_s,
        plan_horizon=cfg.plan_horizon,
        history_cap=cfg.history_cap,
        backend_label=backend_label(backend),
        success=False,
        time_s=cfg.budget_s,
        steps=steps,
        termination=Termination.BACKEND_FAILURE,
        rows=tuple(rows),
        final_state=state,
    )
