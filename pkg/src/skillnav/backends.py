"""Query backends: live chat-completions client, scripted replay, oracles.

All three speak the same interface: take a PromptBundle (plus privileged
world state for oracles) and return response text. The live backend is
the only one that touches the network; its request body construction is
a pure function so it can be tested without any call.
"""

from __future__ import annotations

import base64
import enum
import io
import os
import time
from dataclasses import dataclass, field

from skillnav.course import CourseSpec
from skillnav.oracles import OracleFlavor, oracle_policy
from skillnav.prompting import PromptBundle, bundle_digest
from skillnav.simulator import Observation, RobotState, ViewConfig, _render_raster

# Query hyperparameters for the live model.
LIVE_TEMPERATURE = 0.7
LIVE_TOP_P = 0.95
LIVE_MAX_TOKENS = 800

ENV_API_KEY = "SKILLNAV_API_KEY"
ENV_BASE_URL = "SKILLNAV_BASE_URL"
ENV_MODEL = "SKILLNAV_MODEL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o"


class BackendKind(enum.Enum):
    LIVE = "live"
    SCRIPTED = "scripted"
    ORACLE = "oracle"


class TransportError(RuntimeError):
    """Live request failed after exhausting the retry budget."""


class TranscriptExhausted(RuntimeError):
    """Scripted replay ran out of recorded responses."""


class DigestMismatch(RuntimeError):
    """Scripted replay fed a bundle that differs from the recording."""


class MissingPrivilege(RuntimeError):
    """Oracle invoked without world state."""


@dataclass(frozen=True)
class QueryRecord:
    bundle_digest: str
    response_text: str
    latency: float | None
    backend_kind: str


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind
    # live
    endpoint: str | None = None
    model_name: str | None = None
    temperature: float = LIVE_TEMPERATURE
    top_p: float = LIVE_TOP_P
    max_tokens: int = LIVE_MAX_TOKENS
    request_timeout: float = 60.0
    retry_budget: int = 2
    # scripted
    records: tuple[QueryRecord, ...] = ()
    strict_digest: bool = True
    # oracle
    flavor: OracleFlavor | None = None

    @classmethod
    def live(cls, **kw) -> "BackendConfig":
        return cls(kind=BackendKind.LIVE, **kw)

    @classmethod
    def scripted(cls, records, strict_digest: bool = True) -> "BackendConfig":
        return cls(kind=BackendKind.SCRIPTED, records=tuple(records), strict_digest=strict_digest)

    @classmethod
    def oracle(cls, flavor: OracleFlavor) -> "BackendConfig":
        return cls(kind=BackendKind.ORACLE, flavor=flavor)


@dataclass(frozen=True)
class BackendReply:
    text: str
    latency: float | None


# ----------------------------------------------------------------------
# Live request construction (pure; golden-tested)
# ----------------------------------------------------------------------


def observation_png_b64(obs: Observation, cfg: ViewConfig = ViewConfig()) -> str:
    """Deterministic PNG of the observation raster, base64-encoded."""
    raster = obs.raster
    if raster is None:
        raster = _render_raster(obs.rays, obs.goal_visible, obs.goal_bearing, cfg)
    buf = io.BytesIO()
    raster.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def build_live_request(
    bundle: PromptBundle, cfg: BackendConfig, view_cfg: ViewConfig = ViewConfig()
) -> dict:
    """Chat-completions body for one query. Carries no credential."""
    messages = []
    for m in bundle.messages:
        if not m.attachments:
            messages.append({"role": m.role, "content": m.text})
            continue
        content: list[dict] = [{"type": "text", "text": m.text}]
        for att in m.attachments:
            content.append(
                {
                    "type": "image_url",
                    "image_url": {
                        "url": "data:image/png;base64,"
                        + observation_png_b64(att.observation, view_cfg)
                    },
                }
            )
        messages.append({"role": m.role, "content": content})
    return {
        "model": cfg.model_name or os.environ.get(ENV_MODEL, DEFAULT_MODEL),
        "messages": messages,
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
        "max_tokens": cfg.max_tokens,
    }


class LiveBackend:
    def __init__(self, cfg: BackendConfig):
        self.cfg = cfg

    def query(self, bundle: PromptBundle, privileged=None) -> BackendReply:
        import httpx

        key = os.environ.get(ENV_API_KEY)
        if not key:
            raise TransportError(f"{ENV_API_KEY} is not set; live backend needs a credential")
        base = self.cfg.endpoint or os.environ.get(ENV_BASE_URL, DEFAULT_BASE_URL)
        url = base.rstrip("/") + "/chat/completions"
        body = build_live_request(bundle, self.cfg)
        headers = {"Authorization": f"Bearer {key}"}
        last_error: Exception | None = None
        for _ in range(self.cfg.retry_budget + 1):
            started = time.monotonic()
            try:
                resp = httpx.post(url, json=body, headers=headers, timeout=self.cfg.request_timeout)
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"]
                return BackendReply(text=text, latency=time.monotonic() - started)
            except Exception as e:  # transport or protocol error: retry
                last_error = e
        raise TransportError(f"live query failed after {self.cfg.retry_budget + 1} attempts: {last_error}")


class ScriptedBackend:
    def __init__(self, cfg: BackendConfig):
        self.cfg = cfg
        self._cursor = 0

    @property
    def remaining(self) -> int:
        return len(self.cfg.records) - self._cursor

    def query(self, bundle: PromptBundle, privileged=None) -> BackendReply:
        if self._cursor >= len(self.cfg.records):
            raise TranscriptExhausted(
                f"no recorded response for query {bundle.query_index} "
                f"(transcript has {len(self.cfg.records)})"
            )
        rec = self.cfg.records[self._cursor]
        if self.cfg.strict_digest and rec.bundle_digest:
            got = bundle_digest(bundle)
            if got != rec.bundle_digest:
                raise DigestMismatch(
                    f"query {bundle.query_index}: bundle digest {got[:12]} != "
                    f"recorded {rec.bundle_digest[:12]} (drift; rerun or pass relaxed mode)"
                )
        self._cursor += 1
        return BackendReply(text=rec.response_text, latency=None)


class OracleBackend:
    def __init__(self, cfg: BackendConfig):
        if cfg.flavor is None:
            raise ValueError("oracle backend needs a flavor")
        self.cfg = cfg

    def query(self, bundle: PromptBundle, privileged=None) -> BackendReply:
        if privileged is None:
            raise MissingPrivilege("oracle backend requires (state, course)")
        state, course = privileged
        if not isinstance(state, RobotState) or not isinstance(course, CourseSpec):
            raise MissingPrivilege("oracle privileged inputs must be (RobotState, CourseSpec)")
        return BackendReply(text=oracle_policy(self.cfg.flavor, bundle, state, course), latency=None)


def make_backend(cfg: BackendConfig):
    if cfg.kind is BackendKind.LIVE:
        return LiveBackend(cfg)
    if cfg.kind is BackendKind.SCRIPTED:
        return ScriptedBackend(cfg)
    return OracleBackend(cfg)
