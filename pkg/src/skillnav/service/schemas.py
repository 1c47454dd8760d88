"""Request/response models for the HTTP service.

Courses arrive either as a builtin name (course) or as an inline YAML
document (course_doc); the service never reads client files. history_cap
follows the API convention 0 = unlimited, absent = library default.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from skillnav.episode import (
    DEFAULT_BUDGET_S,
    DEFAULT_HISTORY_CAP,
    DEFAULT_PLAN_HORIZON,
    DEFAULT_RETRY_BUDGET,
    EpisodeConfig,
)


class EpisodeOptions(BaseModel):
    budget_s: float = Field(default=DEFAULT_BUDGET_S, gt=0)
    plan_horizon: int = Field(default=DEFAULT_PLAN_HORIZON, ge=1)
    history_cap: int = Field(default=DEFAULT_HISTORY_CAP, ge=0, description="0 = unlimited")
    retry_budget: int = Field(default=DEFAULT_RETRY_BUDGET, ge=0)

    def to_config(self) -> EpisodeConfig:
        return EpisodeConfig(
            budget_s=self.budget_s,
            plan_horizon=self.plan_horizon,
            history_cap=None if self.history_cap == 0 else self.history_cap,
            retry_budget=self.retry_budget,
        )


class CourseField(BaseModel):
    """Mixin for endpoints that act on a single course."""

    course: str | None = Field(default=None, description="builtin course name")
    course_doc: str | None = Field(default=None, description="inline course YAML")

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.course is None) == (self.course_doc is None):
            raise ValueError("provide exactly one of course or course_doc")
        return self


class RunRequest(CourseField):
    variant: str
    backend: str = "oracle"
    seed: int = 0
    options: EpisodeOptions = Field(default_factory=EpisodeOptions)
    include_transcript: bool = True


class EpisodeSummary(BaseModel):
    course: str
    variant: str
    seed: int
    backend: str
    success: bool
    time_s: float
    steps: int
    termination: str


class RunResponse(BaseModel):
    summary: EpisodeSummary
    transcript: str | None = None
    transcript_filename: str | None = None


class MatrixRequest(BaseModel):
    courses: list[str] = Field(default_factory=list, description="builtin course names")
    course_docs: list[str] = Field(default_factory=list, description="inline course YAML")
    variants: list[str]
    trials: int = Field(default=5, ge=1)
    base_seed: int = 0
    backend: str = "oracle"
    options: EpisodeOptions = Field(default_factory=EpisodeOptions)
    include_transcripts: bool = True
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _some_courses(self):
        if not self.courses and not self.course_docs:
            raise ValueError("provide at least one course or course_doc")
        return self


class CellMetrics(BaseModel):
    course: str
    variant: str
    avg_time_s: float
    median_success_time_s: float | None
    success_rate: float
    trials: int


class MatrixResponse(BaseModel):
    results: list[EpisodeSummary]
    cells: list[CellMetrics]
    results_csv: str
    summary: str
    transcripts: dict[str, str] | None = None


class ReplayRequest(BaseModel):
    transcript: str
    course_doc: str | None = Field(
        default=None, description="required when the transcript's course is not builtin"
    )
    strict_digest: bool = True


class ReplayResponse(BaseModel):
    matches: bool
    mismatches: list[str]
    summary: EpisodeSummary | None = None


class RenderRequest(CourseField):
    transcript: str | None = None


class RenderResponse(BaseModel):
    ascii_map: str
    svg: str
