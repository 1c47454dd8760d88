"""Acceptance gate: ten end-to-end checks, one test per criterion.

Each test is self-contained about what it verifies and at what
tolerance; where a runtime limit applies, a monotonic timer around the
covered work asserts it. The 20-trial ablation matrix is built once and
shared by the two tests that read it.
"""

import base64
import json
import math
import random
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from skillnav.backends import (
    BackendConfig,
    QueryRecord,
    ScriptedBackend,
    build_live_request,
)
from skillnav.catalog import (
    ALL_COMMANDS,
    Magnitude,
    SkillCommand,
    SkillKind,
    catalog_rows,
    lookup_params,
    motion_summary,
)
from skillnav.cli import main as cli_main
from skillnav.course import load_builtin, parse_course
from skillnav.episode import EpisodeConfig, Termination, run_episode
from skillnav.geometry import wrap_angle
from skillnav.harness import MatrixSpec, aggregate, results_csv, run_matrix
from skillnav.prompting import (
    MethodVariant,
    assemble_query,
    expects_plan,
    record_entry,
)
from skillnav.protocol import (
    MalformedResponse,
    ParsedDecision,
    ParseQuality,
    make_decision,
    parse_response,
    render_canonical,
)
from skillnav.simulator import ViewConfig, initial_state, render_observation, step_skill, with_pose
from skillnav.transcripts import (
    IntegrityError,
    parse_transcript,
    replay,
    serialize,
    transcript_filename,
)

GOLDEN = Path(__file__).parent / "goldens"

ALL_COURSES = ("indoor1", "indoor2", "outdoor1", "outdoor2", "outdoor3")
DEAD_END_COURSES = ("indoor1", "indoor2")
FOUR_VARIANTS = (
    MethodVariant.RANDOM,
    MethodVariant.NO_HISTORY,
    MethodVariant.NO_MULTI_STEP,
    MethodVariant.VLM_PC,
)

# ----------------------------------------------------------------------
# Criterion 1: the 18-command behavior-parameter table, exact.
# ----------------------------------------------------------------------

_CATALOG_KEYS = (
    "skill", "magnitude", "x_velocity", "y_velocity",
    "gait_type", "body_height", "yaw_speed", "duration",
)
EXPECTED_CATALOG = [
    ("Walk", "Small", 0.4, 0.0, 1, 0.0, 0.0, 3.0),
    ("Walk", "Medium", 0.6, 0.0, 1, 0.0, 0.0, 5.0),
    ("Walk", "Large", 0.6, 0.0, 1, 0.0, 0.0, 7.0),
    ("Climb", "Small", 0.6, 0.0, 3, 0.0, 0.0, 6.0),
    ("Climb", "Medium", 0.6, 0.0, 3, 0.0, 0.0, 9.0),
    ("Climb", "Large", 0.6, 0.0, 3, 0.0, 0.0, 12.0),
    ("Crawl", "Small", 0.3, 0.0, 1, -0.3, 0.0, 2.0),
    ("Crawl", "Medium", 0.3, 0.0, 1, -0.3, 0.0, 3.0),
    ("Crawl", "Large", 0.3, 0.0, 1, -0.3, 0.0, 4.0),
    ("TurnLeft", "Small", 0.0, 0.0, 1, 0.0, 0.3, 2.5),
    ("TurnLeft", "Medium", 0.0, 0.0, 1, 0.0, 0.3, 3.5),
    ("TurnLeft", "Large", 0.0, 0.0, 1, 0.0, 0.3, 4.5),
    ("TurnRight", "Small", 0.0, 0.0, 1, 0.0, -0.3, 2.5),
    ("TurnRight", "Medium", 0.0, 0.0, 1, 0.0, -0.3, 3.5),
    ("TurnRight", "Large", 0.0, 0.0, 1, 0.0, -0.3, 4.5),
    ("Backward", "Small", -0.3, 0.0, 1, 0.0, 0.0, 1.5),
    ("Backward", "Medium", -0.3, 0.0, 1, 0.0, 0.0, 2.5),
    ("Backward", "Large", -0.3, 0.0, 1, 0.0, 0.0, 5.0),
]


def test_criterion_01_catalog_exact():
    start = time.monotonic()
    expected = [dict(zip(_CATALOG_KEYS, row)) for row in EXPECTED_CATALOG]
    assert catalog_rows() == expected  # zero tolerance, 18/18
    result = CliRunner().invoke(cli_main, ["catalog"])
    assert result.exit_code == 0
    assert len(result.output.strip().splitlines()) == 2 + 18
    assert time.monotonic() - start < 1.0


# ----------------------------------------------------------------------
# Criterion 2: closed-form kinematics for every command, 1e-9.
# ----------------------------------------------------------------------

FREE_PLANE = """
name: freeplane
bounds: {min_x: 0.0, min_y: 0.0, max_x: 24.0, max_y: 24.0}
start: {x: 12.0, y: 12.0, heading: 0.0}
goal: {x: 22.0, y: 22.0, radius: 0.5}
obstacles: []
"""


def test_criterion_02_kinematics_closed_form():
    start = time.monotonic()
    course = parse_course(FREE_PLANE)
    base = with_pose(initial_state(course), 12.0, 12.0, 0.7)
    for cmd in ALL_COMMANDS:
        p = lookup_params(cmd)
        forward, turn, dur = motion_summary(cmd)
        assert abs(forward - p.x_velocity * p.duration) < 1e-9
        assert abs(turn - p.yaw_speed * p.duration) < 1e-9
        assert dur == p.duration

        after = step_skill(base, course, cmd)
        heading = wrap_angle(0.7 + turn)  # turn first, then translate
        assert abs(wrap_angle(after.heading - heading)) < 1e-9
        assert abs(after.x - (12.0 + forward * math.cos(heading))) < 1e-9
        assert abs(after.y - (12.0 + forward * math.sin(heading))) < 1e-9
        assert abs(after.sim_time - base.sim_time - dur) < 1e-9
    for mag in Magnitude:  # a left turn then an equal right turn closes
        left = step_skill(base, course, SkillCommand(SkillKind.TURN_LEFT, mag))
        back = step_skill(left, course, SkillCommand(SkillKind.TURN_RIGHT, mag))
        assert abs(wrap_angle(back.heading - base.heading)) < 1e-9
    assert time.monotonic() - start < 1.0


# ----------------------------------------------------------------------
# Criterion 3: response protocol round-trips; parser never faults.
# ----------------------------------------------------------------------

_FUZZ_TOKENS = (
    "Yes", "No", "yes ", "Walk", "Climb", "Crawl", "TurnLeft", "Turn Left",
    "Backward", "Small", "Medium", "Large", "Plan:", "1.", "2)", "12.",
    "\n", " ", "\t", ".", ",", "-", "gd=3.1", "é", "☃", "0x00", '"', "'",
    "the robot should", "I think", "{", "}", "[", "]", "None", "medium",
)


def test_criterion_03_protocol_round_trip_and_fuzz():
    start = time.monotonic()
    for progress in (True, False):  # all 36 terminal triples
        for cmd in ALL_COMMANDS:
            d = make_decision(progress, cmd)
            out = parse_response(render_canonical(d), expects_plan=False)
            assert isinstance(out, ParsedDecision)
            assert (out.progress, out.action) == (progress, cmd)
            assert out.parse_quality is ParseQuality.EXACT

    rng = random.Random(2024)
    for _ in range(200):  # sampled plans
        steps = [rng.choice(ALL_COMMANDS) for _ in range(rng.randint(1, 5))]
        d = make_decision(rng.random() < 0.5, steps[0], plan_steps=steps)
        out = parse_response(render_canonical(d), expects_plan=True)
        assert isinstance(out, ParsedDecision)
        assert (out.progress, out.action) == (d.progress, d.action)
        assert out.plan is not None
        got = [(s.skill, s.magnitude) for s in out.plan.steps]
        want = [(s.skill, s.magnitude) for s in d.plan.steps]
        assert got == want

    for i in range(10_000):  # fuzz: structured soup, no fault allowed
        text = "".join(rng.choice(_FUZZ_TOKENS) for _ in range(rng.randint(0, 12)))
        out = parse_response(text, expects_plan=bool(i % 2))
        assert isinstance(out, (ParsedDecision, MalformedResponse))
    assert time.monotonic() - start < 30.0


# ----------------------------------------------------------------------
# Criterion 4: prompt cadence and per-variant bundle laws.
# ----------------------------------------------------------------------


class _CapturingBackend:
    """Scripted backend that also keeps every bundle it was asked."""

    def __init__(self, replies):
        records = [QueryRecord("", text, None, "scripted") for text in replies]
        self.inner = ScriptedBackend(BackendConfig.scripted(records, strict_digest=False))
        self.bundles = []

    def query(self, bundle, privileged=None):
        self.bundles.append(bundle)
        return self.inner.query(bundle)


def _twenty_query_episode(variant: MethodVariant, course_name: str):
    # Twenty in-place turns at 2.5 s each exactly fill a 50 s budget.
    replies = [f"cue-{i:02d}\nPlan: 1. TurnLeft\nNo TurnLeft Small" for i in range(1, 21)]
    backend = _CapturingBackend(replies)
    course = load_builtin(course_name)
    result = run_episode(course, variant, backend, seed=0, cfg=EpisodeConfig(budget_s=50.0))
    assert result.steps == 20 and result.termination is Termination.BUDGET_EXHAUSTED
    return backend.bundles


def test_criterion_04_prompt_cadence_and_variant_laws():
    for variant in (MethodVariant.VLM_PC, MethodVariant.NO_MULTI_STEP):
        bundles = _twenty_query_episode(variant, "indoor1")
        opener = {b.query_index: b.user_text().splitlines()[0] for b in bundles}
        restated = {q for q, line in opener.items() if line == opener[1]}
        assert restated == {1, 7, 13, 19}
        assert {b.query_index for b in bundles if b.is_initial_cycle} == {1, 7, 13, 19}

    bundles = _twenty_query_episode(MethodVariant.NO_HISTORY, "indoor1")
    for b in bundles:
        assert b.observation_count() == 1
        for q in range(1, b.query_index):  # zero prior-response substrings
            assert f"cue-{q:02d}" not in b.user_text()

    vlm = _twenty_query_episode(MethodVariant.VLM_PC, "indoor1")
    assert "cue-01" in vlm[2].user_text()  # history does carry elsewhere

    bundles = _twenty_query_episode(MethodVariant.VLM_PC_IC, "indoor2")
    marked = [b.query_index for b in bundles if "Worked examples for this course" in b.user_text()]
    assert marked == [1]

    _assert_golden_bundles()


def _assert_golden_bundles():
    """Byte equality of assembled prompts on fixed fixtures."""
    hallway = parse_course(
        """
name: hallway
bounds: {min_x: 0.0, min_y: 0.0, max_x: 12.0, max_y: 4.0}
start: {x: 1.0, y: 2.0, heading: 0.0}
goal: {x: 10.0, y: 2.0, radius: 0.5}
obstacles:
  - rect: {x: 4.0, y: 0.0, w: 0.5, h: 2.6}
    class: Wall
"""
    )
    responses = [
        "The hall looks clear.\nPlan: 1. Walk 2. Walk Large 3. TurnLeft\nYes Walk Medium",
        "Wall ahead on the right.\nPlan: 1. TurnLeft 2. Walk 3. TurnRight\nNo TurnLeft Small",
    ]
    state, history, plan = initial_state(hallway), [], None
    for raw in responses:
        obs = render_observation(state, hallway)
        bundle = assemble_query(MethodVariant.VLM_PC, history, obs, plan_carry=plan)
        parsed = parse_response(raw, expects_plan(MethodVariant.VLM_PC))
        history = record_entry(history, bundle, raw, parsed)
        plan = parsed.plan
        state = step_skill(state, hallway, parsed.action)

    third = assemble_query(
        MethodVariant.VLM_PC, history, render_observation(state, hallway), plan_carry=plan
    )
    assert third.user_text() == (GOLDEN / "bundle_vlmpc_q3.txt").read_text()

    first = assemble_query(
        MethodVariant.VLM_PC, [], render_observation(initial_state(hallway), hallway)
    )
    assert first.user_text() == (GOLDEN / "bundle_vlmpc_q1.txt").read_text()

    indoor2 = load_builtin("indoor2")
    icl_first = assemble_query(
        MethodVariant.VLM_PC_IC,
        [],
        render_observation(initial_state(indoor2), indoor2),
        icl=indoor2.icl_annotations,
    )
    assert icl_first.user_text() == (GOLDEN / "bundle_vlmpcic_q1.txt").read_text()


# ----------------------------------------------------------------------
# Criterion 5: failures charge exactly the budget; reference aggregate.
# ----------------------------------------------------------------------


def test_criterion_05_budget_failure_convention():
    course = load_builtin("indoor1")
    records = [QueryRecord("", "No TurnLeft Small", None, "scripted") for _ in range(40)]
    backend = ScriptedBackend(BackendConfig.scripted(records, strict_digest=False))
    r = run_episode(course, MethodVariant.NO_MULTI_STEP, backend, seed=0)
    assert r.success is False
    assert r.time_s == 100.0  # exactly the budget
    assert r.termination is Termination.BUDGET_EXHAUSTED

    r2 = run_episode(course, MethodVariant.RANDOM, None, seed=0)
    assert (r2.success, r2.time_s) == (False, 100.0)

    agg = aggregate([(True, 10.0), (True, 17.0), (True, 20.0), (False, 100.0), (False, 100.0)])
    assert agg.avg_time_s == 49.4
    assert agg.median_success_time_s == 17.0
    assert agg.success_rate == 0.6


# ----------------------------------------------------------------------
# Criterion 6: byte-identical reruns; replay verifies and detects drift.
# ----------------------------------------------------------------------


def test_criterion_06_determinism_and_replay():
    start = time.monotonic()
    spec = MatrixSpec(courses=ALL_COURSES, variants=FOUR_VARIANTS, trials=5, base_seed=0)
    first = run_matrix(spec)
    second = run_matrix(spec)

    texts = {
        transcript_filename(r.course, r.variant, r.seed): serialize(r) for r in first.results
    }
    texts_again = {
        transcript_filename(r.course, r.variant, r.seed): serialize(r) for r in second.results
    }
    assert len(texts) == 5 * 4 * 5
    assert texts == texts_again  # byte-identical transcripts
    assert results_csv(first.results) == results_csv(second.results)

    for text in texts.values():  # every stored transcript replays cleanly
        report = replay(parse_transcript(text))
        assert report.matches, report.mismatches

    victim = texts["indoor2_VlmPc_0.transcript"]
    assert "Note: gd=" in victim
    with pytest.raises(IntegrityError):
        parse_transcript(victim.replace("Note: gd=", "Note: gd~", 1))
    assert time.monotonic() - start < 60.0


# ----------------------------------------------------------------------
# Criteria 7 and 8 share one 5-course x 4-variant x 20-trial matrix.
# ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def ablation_matrix():
    start = time.monotonic()
    mr = run_matrix(
        MatrixSpec(courses=ALL_COURSES, variants=FOUR_VARIANTS, trials=20, base_seed=0)
    )
    return mr, time.monotonic() - start


def test_criterion_07_ablation_ordering(ablation_matrix):
    start = time.monotonic()
    mr, build_seconds = ablation_matrix
    rate = {(c.course, c.variant): c.stats.success_rate for c in mr.cells}

    for course in ALL_COURSES:  # plan-and-remember succeeds everywhere
        assert rate[(course, MethodVariant.VLM_PC)] >= 0.6

    mean = {
        v: sum(rate[(c, v)] for c in ALL_COURSES) / len(ALL_COURSES) for v in FOUR_VARIANTS
    }
    assert mean[MethodVariant.VLM_PC] >= mean[MethodVariant.NO_MULTI_STEP]
    assert mean[MethodVariant.NO_MULTI_STEP] >= mean[MethodVariant.NO_HISTORY]
    assert mean[MethodVariant.NO_HISTORY] > mean[MethodVariant.RANDOM]

    for course in DEAD_END_COURSES:
        assert rate[(course, MethodVariant.RANDOM)] <= 0.2

    assert build_seconds + (time.monotonic() - start) < 300.0


def _pose_revisits(result, grid: float = 0.2) -> int:
    seen, revisits = set(), 0
    for row in result.rows:
        if not row.final or row.pose_after is None:
            continue
        key = (round(row.pose_after[0] / grid), round(row.pose_after[1] / grid))
        if key in seen:
            revisits += 1
        else:
            seen.add(key)
    return revisits


def test_criterion_08_dead_end_escape(ablation_matrix):
    mr, _ = ablation_matrix
    plan = [r for r in mr.results if r.course == "indoor1" and r.variant is MethodVariant.VLM_PC]
    assert len(plan) == 20
    assert sum(r.success for r in plan) >= 18

    greedy = [
        r for r in mr.results if r.course == "indoor1" and r.variant is MethodVariant.NO_HISTORY
    ]
    assert len(greedy) == 20
    pinned = sum(
        1
        for r in greedy
        if r.termination is Termination.BUDGET_EXHAUSTED and _pose_revisits(r) >= 3
    )
    assert pinned >= 18


# ----------------------------------------------------------------------
# Criterion 9: worked examples help, never hurt, on annotated courses.
# ----------------------------------------------------------------------


def test_criterion_09_worked_examples_improve_times():
    mr = run_matrix(
        MatrixSpec(
            courses=("indoor2", "outdoor1"),
            variants=(MethodVariant.VLM_PC, MethodVariant.VLM_PC_IC),
            trials=5,
            base_seed=0,
        )
    )
    stats = {(c.course, c.variant): c.stats for c in mr.cells}
    for course in ("indoor2", "outdoor1"):
        plain = stats[(course, MethodVariant.VLM_PC)]
        hinted = stats[(course, MethodVariant.VLM_PC_IC)]
        assert hinted.success_rate >= plain.success_rate
        assert plain.median_success_time_s is not None
        assert hinted.median_success_time_s < plain.median_success_time_s  # strictly faster


# ----------------------------------------------------------------------
# Criterion 10: live request body, golden, with no network call.
# ----------------------------------------------------------------------


def test_criterion_10_live_request_construction(monkeypatch):
    import httpx

    def _no_network(*args, **kwargs):  # pragma: no cover - must not be hit
        raise AssertionError("acceptance check must not touch the network")

    monkeypatch.setattr(httpx, "post", _no_network)

    course = parse_course(
        """
name: freeplane
bounds: {min_x: 0.0, min_y: 0.0, max_x: 6.0, max_y: 2.0}
start: {x: 1.0, y: 1.0, heading: 0.0}
goal: {x: 4.0, y: 1.0, radius: 0.5}
obstacles: []
"""
    )
    obs = render_observation(initial_state(course), course)
    bundle = assemble_query(MethodVariant.NO_HISTORY, [], obs)
    body = build_live_request(
        bundle, BackendConfig.live(model_name="vision-model"), ViewConfig(raster_size=32)
    )

    assert body["temperature"] == 0.7
    assert body["top_p"] == 0.95
    assert body["max_tokens"] == 800

    images = [
        part
        for msg in body["messages"]
        if isinstance(msg["content"], list)
        for part in msg["content"]
        if part["type"] == "image_url"
    ]
    assert len(images) == bundle.observation_count() == 1  # one image per observation
    for part in images:
        url = part["image_url"]["url"]
        assert url.startswith("data:image/png;base64,")
        payload = base64.b64decode(url.split(",", 1)[1])
        assert payload[:8] == b"\x89PNG\r\n\x1a\n"

    got = json.dumps(body, indent=2, sort_keys=True) + "\n"
    assert got == (GOLDEN / "live_request.json").read_text()
