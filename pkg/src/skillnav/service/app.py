"""HTTP service exposing episodes, matrices, replay, and rendering.

All course material and transcripts travel inline in request/response
bodies; the service reads and writes no client files. Live-model
credentials come from the server's environment, never from requests.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from skillnav import __version__
from skillnav.catalog import catalog_rows, format_catalog_table
from skillnav.course import (
    CourseSpec,
    builtin_course_names,
    course_to_dict,
    load_builtin,
    parse_course,
)
from skillnav.episode import run_episode
from skillnav.harness import (
    MatrixSpec,
    build_backend,
    parse_variants,
    results_csv,
    run_matrix,
    summary_text,
)
from skillnav.prompting import parse_variant
from skillnav.rendering import course_ascii, course_svg, trajectory_from_transcript
from skillnav.service.schemas import (
    CellMetrics,
    EpisodeSummary,
    MatrixRequest,
    MatrixResponse,
    RenderRequest,
    RenderResponse,
    ReplayRequest,
    ReplayResponse,
    RunRequest,
    RunResponse,
)
from skillnav.transcripts import (
    TranscriptError,
    parse_transcript,
    replay,
    serialize,
    transcript_filename,
)


def _course_from(req) -> CourseSpec:
    try:
        if req.course is not None:
            return load_builtin(req.course)
        return parse_course(req.course_doc)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e


def _summary(result) -> EpisodeSummary:
    return EpisodeSummary(
        course=result.course,
        variant=result.variant.value,
        seed=result.seed,
        backend=result.backend_label,
        success=result.success,
        time_s=result.time_s,
        steps=result.steps,
        termination=result.termination.value,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="skillnav", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/catalog")
    def catalog() -> dict:
        return {"commands": catalog_rows(), "table": format_catalog_table()}

    @app.get("/courses")
    def courses() -> dict:
        return {"courses": builtin_course_names()}

    @app.get("/courses/{name}")
    def course_detail(name: str) -> dict:
        try:
            return course_to_dict(load_builtin(name))
        except ValueError as e:
            raise HTTPException(status_code=404, detail=str(e)) from e

    @app.post("/episodes/run")
    def episodes_run(req: RunRequest) -> RunResponse:
        course = _course_from(req)
        try:
            variant = parse_variant(req.variant)
            backend = build_backend(req.backend, variant)
            result = run_episode(
                course, variant, backend, seed=req.seed, cfg=req.options.to_config()
            )
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return RunResponse(
            summary=_summary(result),
            transcript=serialize(result) if req.include_transcript else None,
            transcript_filename=transcript_filename(result.course, result.variant, result.seed),
        )

    @app.post("/episodes/matrix")
    def episodes_matrix(req: MatrixRequest) -> MatrixResponse:
        try:
            loaded = [load_builtin(n) for n in req.courses]
            loaded += [parse_course(doc) for doc in req.course_docs]
            spec = MatrixSpec(
                courses=tuple(c.name for c in loaded),
                variants=parse_variants(req.variants),
                trials=req.trials,
                base_seed=req.base_seed,
                backend=req.backend,
            )
            mr = run_matrix(spec, cfg=req.options.to_config(), workers=req.workers, courses=loaded)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        transcripts = None
        if req.include_transcripts:
            transcripts = {
                transcript_filename(r.course, r.variant, r.seed): serialize(r)
                for r in mr.results
            }
        return MatrixResponse(
            results=[_summary(r) for r in mr.results],
            cells=[
                CellMetrics(
                    course=c.course,
                    variant=c.variant.value,
                    avg_time_s=c.stats.avg_time_s,
                    median_success_time_s=c.stats.median_success_time_s,
                    success_rate=c.stats.success_rate,
                    trials=c.stats.trials,
                )
                for c in mr.cells
            ],
            results_csv=results_csv(mr.results),
            summary=summary_text(mr),
            transcripts=transcripts,
        )

    @app.post("/episodes/replay")
    def episodes_replay(req: ReplayRequest) -> ReplayResponse:
        try:
            t = parse_transcript(req.transcript)
            course = parse_course(req.course_doc) if req.course_doc else None
            report = replay(t, course=course, strict_digest=req.strict_digest)
        except (TranscriptError, ValueError) as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return ReplayResponse(
            matches=report.matches,
            mismatches=list(report.mismatches),
            summary=_summary(report.result) if report.result is not None else None,
        )

    @app.post("/render")
    def render(req: RenderRequest) -> RenderResponse:
        course = _course_from(req)
        trajectory = ()
        if req.transcript is not None:
            try:
                t = parse_transcript(req.transcript)
                trajectory = trajectory_from_transcript(t, course)
            except (TranscriptError, ValueError) as e:
                raise HTTPException(status_code=400, detail=str(e)) from e
        return RenderResponse(
            ascii_map=course_ascii(course, trajectory),
            svg=course_svg(course, trajectory),
        )

    return app


app = create_app()
