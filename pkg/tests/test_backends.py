"""Backend behavior: live request construction, scripted replay, oracle
privilege checks. No test here touches the network."""

import base64
import json
from pathlib import Path

import pytest

from skillnav.backends import (
    BackendConfig,
    BackendKind,
    DigestMismatch,
    LiveBackend,
    MissingPrivilege,
    OracleBackend,
    QueryRecord,
    ScriptedBackend,
    TranscriptExhausted,
    TransportError,
    build_live_request,
    make_backend,
    observation_png_b64,
)
from skillnav.course import load_builtin, parse_course
from skillnav.oracles import OracleFlavor
from skillnav.prompting import (
    MethodVariant,
    assemble_query,
    bundle_digest,
    record_entry,
)
from skillnav.protocol import parse_response
from skillnav.simulator import ViewConfig, initial_state, render_observation, step_skill

GOLDEN = Path(__file__).parent / "goldens"

MINI = """\
name: freeplane
bounds: {min_x: 0.0, min_y: 0.0, max_x: 6.0, max_y: 2.0}
start: {x: 1.0, y: 1.0, heading: 0.0}
goal: {x: 4.0, y: 1.0, radius: 0.5}
obstacles: []
"""


def _bundle(variant=MethodVariant.NO_HISTORY, course_text=MINI):
    c = parse_course(course_text)
    obs = render_observation(initial_state(c), c)
    return assemble_query(variant, [], obs)


def _bundle_with_history(n=2):
    from skillnav.catalog import Magnitude, SkillCommand, SkillKind

    c = parse_course(MINI)
    state = initial_state(c)
    history = []
    walk = SkillCommand(SkillKind.WALK, Magnitude.SMALL)
    for _ in range(n):
        obs = render_observation(state, c)
        bundle = assemble_query(MethodVariant.VLM_PC, history, obs)
        text = "Plan: 1. Walk Small\nYes Walk Small"
        parsed = parse_response(text, expects_plan=True)
        history = record_entry(history, bundle, text, parsed)
        state = step_skill(state, c, walk)
    obs = render_observation(state, c)
    return assemble_query(MethodVariant.VLM_PC, history, obs)


# ----------------------------------------------------------------------
# Live request construction (pure)
# ----------------------------------------------------------------------


def test_live_request_sampling_params():
    body = build_live_request(_bundle(), BackendConfig.live(model_name="m"))
    assert body["temperature"] == 0.7
    assert body["top_p"] == 0.95
    assert body["max_tokens"] == 800
    assert body["model"] == "m"


def test_live_request_one_image_per_observation():
    bundle = _bundle_with_history(2)
    assert bundle.observation_count() == 3
    body = build_live_request(bundle, BackendConfig.live(model_name="m"))
    parts = [
        p
        for msg in body["messages"]
        if isinstance(msg["content"], list)
        for p in msg["content"]
        if p["type"] == "image_url"
    ]
    assert len(parts) == 3
    for p in parts:
        url = p["image_url"]["url"]
        assert url.startswith("data:image/png;base64,")
        raw = base64.b64decode(url.split(",", 1)[1])
        assert raw[:8] == b"\x89PNG\r\n\x1a\n"


def test_live_request_roles_and_text():
    bundle = _bundle()
    body = build_live_request(bundle, BackendConfig.live(model_name="m"))
    assert body["messages"][0]["role"] == "system"
    assert isinstance(body["messages"][0]["content"], str)
    user = body["messages"][-1]
    assert user["role"] == "user"
    assert user["content"][0] == {"type": "text", "text": bundle.user_text()}


def test_live_request_golden_body():
    bundle = _bundle()
    body = build_live_request(
        bundle, BackendConfig.live(model_name="vision-model"), ViewConfig(raster_size=32)
    )
    got = json.dumps(body, indent=2, sort_keys=True) + "\n"
    want = (GOLDEN / "live_request.json").read_text()
    assert got == want


def test_live_request_never_carries_credential(monkeypatch):
    monkeypatch.setenv("SKILLNAV_API_KEY", "hunter2-sentinel")
    body = build_live_request(_bundle(), BackendConfig.live(model_name="m"))
    assert "hunter2-sentinel" not in json.dumps(body)


def test_png_encoding_deterministic():
    c = parse_course(MINI)
    obs = render_observation(initial_state(c), c)
    assert observation_png_b64(obs) == observation_png_b64(obs)


# ----------------------------------------------------------------------
# Live transport (faked)
# ----------------------------------------------------------------------


def test_live_missing_credential_raises_before_any_request(monkeypatch):
    monkeypatch.delenv("SKILLNAV_API_KEY", raising=False)

    def boom(*a, **kw):  # pragma: no cover - must not be reached
        raise AssertionError("network call attempted without credential")

    import httpx

    monkeypatch.setattr(httpx, "post", boom)
    with pytest.raises(TransportError, match="SKILLNAV_API_KEY"):
        LiveBackend(BackendConfig.live(model_name="m")).query(_bundle())


def test_live_retries_then_succeeds(monkeypatch):
    monkeypatch.setenv("SKILLNAV_API_KEY", "k")
    calls = []

    class FakeResp:
        def raise_for_status(self):
            return None

        def json(self):
            return {"choices": [{"message": {"content": "Yes Walk Small"}}]}

    def post(url, json=None, headers=None, timeout=None):
        calls.append(url)
        if len(calls) < 3:
            raise ConnectionError("flaky")
        assert headers == {"Authorization": "Bearer k"}
        return FakeResp()

    import httpx

    monkeypatch.setattr(httpx, "post", post)
    reply = LiveBackend(BackendConfig.live(model_name="m", retry_budget=2)).query(_bundle())
    assert reply.text == "Yes Walk Small"
    assert len(calls) == 3
    assert reply.latency is not None and reply.latency >= 0


def test_live_exhausts_retry_budget(monkeypatch):
    monkeypatch.setenv("SKILLNAV_API_KEY", "k")
    calls = []

    def post(*a, **kw):
        calls.append(1)
        raise ConnectionError("down")

    import httpx

    monkeypatch.setattr(httpx, "post", post)
    with pytest.raises(TransportError, match="3 attempts"):
        LiveBackend(BackendConfig.live(model_name="m", retry_budget=2)).query(_bundle())
    assert len(calls) == 3


# ----------------------------------------------------------------------
# Scripted replay
# ----------------------------------------------------------------------


def _records(texts, digest=""):
    return tuple(
        QueryRecord(bundle_digest=digest, response_text=t, latency=None, backend_kind="scripted")
        for t in texts
    )


def test_scripted_replays_in_order():
    b = ScriptedBackend(BackendConfig.scripted(_records(["a", "b"])))
    bundle = _bundle()
    assert b.query(bundle).text == "a"
    assert b.query(bundle).text == "b"
    assert b.remaining == 0


def test_scripted_exhaustion():
    b = ScriptedBackend(BackendConfig.scripted(_records(["only"])))
    bundle = _bundle()
    b.query(bundle)
    with pytest.raises(TranscriptExhausted):
        b.query(bundle)


def test_scripted_digest_checked_when_recorded():
    bundle = _bundle()
    good = bundle_digest(bundle)
    b = ScriptedBackend(BackendConfig.scripted(_records(["ok"], digest=good)))
    assert b.query(bundle).text == "ok"
    b2 = ScriptedBackend(BackendConfig.scripted(_records(["ok"], digest="deadbeef" * 8)))
    with pytest.raises(DigestMismatch):
        b2.query(bundle)


def test_scripted_relaxed_mode_ignores_drift():
    bundle = _bundle()
    cfg = BackendConfig.scripted(_records(["ok"], digest="deadbeef" * 8), strict_digest=False)
    assert ScriptedBackend(cfg).query(bundle).text == "ok"


def test_scripted_empty_digest_skips_check():
    bundle = _bundle()
    b = ScriptedBackend(BackendConfig.scripted(_records(["ok"], digest="")))
    assert b.query(bundle).text == "ok"


# ----------------------------------------------------------------------
# Oracle dispatch
# ----------------------------------------------------------------------


def test_oracle_requires_privilege():
    b = OracleBackend(BackendConfig.oracle(OracleFlavor.GREEDY_VISIBLE))
    with pytest.raises(MissingPrivilege):
        b.query(_bundle())
    with pytest.raises(MissingPrivilege):
        b.query(_bundle(), privileged=("state", "course"))


def test_oracle_answers_with_privilege():
    c = load_builtin("outdoor3")
    state = initial_state(c)
    bundle = assemble_query(MethodVariant.NO_HISTORY, [], render_observation(state, c))
    b = make_backend(BackendConfig.oracle(OracleFlavor.GREEDY_VISIBLE))
    reply = b.query(bundle, privileged=(state, c))
    assert reply.text.splitlines()[-1].split()[0] in {"Yes", "No"}


def test_make_backend_kinds():
    assert isinstance(make_backend(BackendConfig.live()), LiveBackend)
    assert isinstance(make_backend(BackendConfig.scripted(())), ScriptedBackend)
    assert isinstance(
        make_backend(BackendConfig.oracle(OracleFlavor.MEMORY_PLAN)), OracleBackend
    )
    assert make_backend(BackendConfig.live()).cfg.kind is BackendKind.LIVE
    with pytest.raises(ValueError):
        OracleBackend(BackendConfig(kind=BackendKind.ORACLE))
