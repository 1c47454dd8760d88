"""Episode transcripts: JSONL serialization, integrity, scripted replay.

A transcript is one header line, one line per query attempt, and a
footer whose sha256 covers every preceding byte. Serialization is
canonical (sorted keys, fixed separators), so rerunning the same
configuration yields byte-identical files and replay can be checked by
direct comparison of the row and footer lines.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from skillnav import __version__
from skillnav.backends import (
    BackendConfig,
    DigestMismatch,
    QueryRecord,
    ScriptedBackend,
    TranscriptExhausted,
)
from skillnav.course import CourseSpec, resolve_course
from skillnav.episode import EpisodeConfig, EpisodeResult, QueryRow, run_episode
from skillnav.prompting import MethodVariant, parse_variant
from skillnav.simulator import ViewConfig

TRANSCRIPT_FORMAT = 1


class TranscriptError(ValueError):
    """Structurally bad transcript text."""


class IntegrityError(TranscriptError):
    """Footer hash does not cover the preceding bytes."""


def _dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def transcript_filename(course: str, variant, seed: int) -> str:
    label = variant.value if isinstance(variant, MethodVariant) else variant
    return f"{course}_{label}_{seed}.transcript"


def _header_doc(r: EpisodeResult) -> dict:
    return {
        "kind": "header",
        "format": TRANSCRIPT_FORMAT,
        "version": __version__,
        "course": r.course,
        "variant": r.variant.value,
        "seed": r.seed,
        "budget_s": r.budget_s,
        "plan_horizon": r.plan_horizon,
        "history_cap": r.history_cap,
        "backend": r.backend_label,
        "view": {
            "fov": ViewConfig().fov,
            "ray_count": ViewConfig().ray_count,
            "max_range": ViewConfig().max_range,
            "raster_size": ViewConfig().raster_size,
        },
    }


def _row_doc(row: QueryRow) -> dict:
    return {
        "kind": "query",
        "query_index": row.query_index,
        "attempt": row.attempt,
        "bundle_digest": row.bundle_digest,
        "response_text": row.response_text,
        "final": row.final,
        "action": row.action_label,
        "progress": row.progress,
        "parse_quality": row.parse_quality,
        "pose_after": list(row.pose_after) if row.pose_after else None,
        "sim_time_after": row.sim_time_after,
        "stuck_after": row.stuck_after,
    }


def serialize(result: EpisodeResult) -> str:
    lines = [_dumps(_header_doc(result))]
    lines.extend(_dumps(_row_doc(row)) for row in result.rows)
    body = "\n".join(lines) + "\n"
    footer = {
        "kind": "footer",
        "success": result.success,
        "time_s": result.time_s,
        "steps": result.steps,
        "termination": result.termination.value,
    }
    # The hash seals the body plus the footer's own fields.
    footer["sha256"] = hashlib.sha256((body + _dumps(footer)).encode("utf-8")).hexdigest()
    return body + _dumps(footer) + "\n"


@dataclass(frozen=True)
class Transcript:
    header: dict
    queries: tuple[dict, ...]
    footer: dict
    text: str


def parse_transcript(text: str) -> Transcript:
    lines = text.splitlines()
    if len(lines) < 2:
        raise TranscriptError("transcript needs at least a header and a footer")
    try:
        docs = [json.loads(line) for line in lines]
    except json.JSONDecodeError as e:
        raise TranscriptError(f"line {e.lineno}: not valid JSON") from None
    header, *middle, footer = docs
    if header.get("kind") != "header":
        raise TranscriptError("first line is not a header")
    if footer.get("kind") != "footer":
        raise TranscriptError("last line is not a footer")
    if any(d.get("kind") != "query" for d in middle):
        raise TranscriptError("interior lines must be query records")
    if header.get("format") != TRANSCRIPT_FORMAT:
        raise TranscriptError(f"unsupported transcript format {header.get('format')!r}")
    body = "\n".join(lines[:-1]) + "\n"
    want = footer.get("sha256")
    sealed = {k: v for k, v in footer.items() if k != "sha256"}
    got = hashlib.sha256((body + _dumps(sealed)).encode("utf-8")).hexdigest()
    if want != got:
        raise IntegrityError(f"footer hash {str(want)[:12]} does not match body {got[:12]}")
    return Transcript(header=header, queries=tuple(middle), footer=footer, text=text)


def scripted_records(t: Transcript) -> tuple[QueryRecord, ...]:
    return tuple(
        QueryRecord(
            bundle_digest=q["bundle_digest"],
            response_text=q["response_text"],
            latency=None,
            backend_kind="scripted",
        )
        for q in t.queries
    )


@dataclass(frozen=True)
class ReplayReport:
    matches: bool
    mismatches: tuple[str, ...]
    result: EpisodeResult | None


def replay(
    t: Transcript, course: CourseSpec | None = None, strict_digest: bool = True
) -> ReplayReport:
    """Re-drive the episode from the recorded responses and diff it.

    The header's backend label is allowed to differ (the replay runs
    scripted); every query row and the outcome must match exactly.
    """
    h = t.header
    course = course if course is not None else resolve_course(h["course"])
    variant = parse_variant(h["variant"])
    cfg = EpisodeConfig(
        budget_s=h["budget_s"],
        plan_horizon=h["plan_horizon"],
        history_cap=h["history_cap"],
        view=ViewConfig(**h["view"]),
    )
    if h["variant"] == "Random":
        backend = None
    else:
        backend = ScriptedBackend(
            BackendConfig.scripted(scripted_records(t), strict_digest=strict_digest)
        )
    try:
        result = run_episode(course, variant, backend, seed=h["seed"], cfg=cfg)
    except (DigestMismatch, TranscriptExhausted) as e:
        return ReplayReport(matches=False, mismatches=(str(e),), result=None)

    mismatches: list[str] = []
    new_rows = [_row_doc(r) for r in result.rows]
    old_rows = [dict(q) for q in t.queries]
    if len(new_rows) != len(old_rows):
        mismatches.append(f"query count {len(old_rows)} -> {len(new_rows)}")
    for i, (a, b) in enumerate(zip(old_rows, new_rows)):
        if a != b:
            keys = [k for k in a if a.get(k) != b.get(k)]
            mismatches.append(f"query line {i + 1}: fields differ: {', '.join(sorted(keys))}")
    for key in ("success", "time_s", "steps", "termination"):
        old = t.footer.get(key)
        new = {
            "success": result.success,
            "time_s": result.time_s,
            "steps": result.steps,
            "termination": result.termination.value,
        }[key]
        if old != new:
            mismatches.append(f"footer {key}: {old!r} -> {new!r}")
    return ReplayReport(matches=not mismatches, mismatches=tuple(mismatches), result=result)
