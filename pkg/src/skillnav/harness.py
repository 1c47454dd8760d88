"""Evaluation harness: run a course x variant matrix and aggregate it.

Trial seeds are base_seed + trial_index, so any single trial can be rerun
in isolation. Failed trials are charged the full time budget; the average
is over all trials while the median is over successful trials only, which
is how runs of this kind are conventionally reported.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import os
import statistics
from dataclasses import dataclass
from pathlib import Path

from skillnav.backends import BackendConfig, make_backend
from skillnav.course import CourseSpec, resolve_course
from skillnav.episode import EpisodeConfig, EpisodeResult, run_episode
from skillnav.oracles import flavor_for_variant, parse_flavor
from skillnav.prompting import MethodVariant, VariantMismatch, parse_variant
from skillnav.transcripts import serialize, transcript_filename

RESULT_COLUMNS = ("course", "variant", "trial", "seed", "success", "time_s", "steps", "termination")


@dataclass(frozen=True)
class MatrixSpec:
    courses: tuple[str, ...]
    variants: tuple[MethodVariant, ...]
    trials: int = 5
    base_seed: int = 0
    backend: str = "oracle"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.courses or not self.variants:
            raise ValueError("matrix needs at least one course and one variant")


@dataclass(frozen=True)
class Aggregate:
    avg_time_s: float
    median_success_time_s: float | None
    success_rate: float
    trials: int


@dataclass(frozen=True)
class CellStats:
    course: str
    variant: MethodVariant
    stats: Aggregate


@dataclass(frozen=True)
class MatrixResult:
    spec: MatrixSpec
    results: tuple[EpisodeResult, ...]
    cells: tuple[CellStats, ...]


def aggregate(outcomes) -> Aggregate:
    """outcomes: iterable of (success, time_s) pairs for one cell."""
    pairs = list(outcomes)
    if not pairs:
        raise ValueError("nothing to aggregate")
    times = [t for _, t in pairs]
    wins = sorted(t for ok, t in pairs if ok)
    return Aggregate(
        avg_time_s=sum(times) / len(times),
        median_success_time_s=statistics.median(wins) if wins else None,
        success_rate=len(wins) / len(pairs),
        trials=len(pairs),
    )


def build_backend(spec: str, variant: MethodVariant):
    """Backend factory from a short spec string.

    'oracle' pairs each variant with its default flavor; 'oracle:<Flavor>'
    forces one flavor; 'live' uses the remote model. Random never queries.
    """
    if variant is MethodVariant.RANDOM:
        return None
    if spec == "oracle":
        return make_backend(BackendConfig.oracle(flavor_for_variant(variant)))
    if spec.startswith("oracle:"):
        return make_backend(BackendConfig.oracle(parse_flavor(spec.split(":", 1)[1])))
    if spec == "live":
        return make_backend(BackendConfig.live())
    raise ValueError(f"unknown backend spec {spec!r}; use oracle, oracle:<flavor>, or live")


def _check_icl(courses, variants) -> None:
    if MethodVariant.VLM_PC_IC not in variants:
        return
    for c in courses:
        if not c.icl_annotations:
            raise VariantMismatch(
                f"course {c.name} has no worked examples but the matrix includes VlmPcIc"
            )


def load_matrix_courses(spec: MatrixSpec) -> list[CourseSpec]:
    """Load every course up front so a bad one fails before any episode."""
    courses = [resolve_course(ref) for ref in spec.courses]
    _check_icl(courses, spec.variants)
    return courses


def _run_trial(course: CourseSpec, variant: MethodVariant, seed: int, backend_spec: str,
               cfg: EpisodeConfig) -> EpisodeResult:
    return run_episode(course, variant, build_backend(backend_spec, variant), seed=seed, cfg=cfg)


def run_matrix(spec: MatrixSpec, cfg: EpisodeConfig | None = None,
               workers: int | None = None, courses=None) -> MatrixResult:
    """Run every (course, variant, trial) cell of the matrix.

    spec.courses are refs; pass already-parsed specs via courses to skip
    resolution (they must line up with spec.courses). Episodes are
    independent; workers > 1 fans trials out to a process pool, and
    results are ordered by (course, variant, trial) either way. Backend
    trouble inside an episode surfaces as a failed trial, never as a
    matrix abort.
    """
    cfg = cfg or EpisodeConfig()
    if courses is None:
        courses = load_matrix_courses(spec)
    else:
        courses = list(courses)
        if len(courses) != len(spec.courses):
            raise ValueError("courses must match spec.courses one-to-one")
        _check_icl(courses, spec.variants)
    tasks = [
        (course, variant, spec.base_seed + trial)
        for course in courses
        for variant in spec.variants
        for trial in range(spec.trials)
    ]
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_trial, c, v, s, spec.backend, cfg) for c, v, s in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_run_trial(c, variant, seed, spec.backend, cfg) for c, variant, seed in tasks]

    cells = []
    for i in range(0, len(results), spec.trials):
        cell = results[i : i + spec.trials]
        cells.append(
            CellStats(
                course=cell[0].course,
                variant=cell[0].variant,
                stats=aggregate((r.success, r.time_s) for r in cell),
            )
        )
    return MatrixResult(spec=spec, results=tuple(results), cells=tuple(cells))


def results_csv(results) -> str:
    """Per-trial rows; trial indices restart within each (course, variant)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    seen: dict[tuple[str, str], int] = {}
    for r in results:
        key = (r.course, r.variant.value)
        trial = seen.get(key, 0)
        seen[key] = trial + 1
        w.writerow(
            [
                r.course,
                r.variant.value,
                trial,
                r.seed,
                str(r.success).lower(),
                f"{r.time_s:.1f}",
                r.steps,
                r.termination.value,
            ]
        )
    return buf.getvalue()


def summary_text(matrix: MatrixResult) -> str:
    """Per-cell metrics table; lower times are better."""
    lines = [f"{'course':<12} {'variant':<12} {'avg_s':>7} {'median_s':>9} {'success':>8}"]
    for cell in matrix.cells:
        s = cell.stats
        median = f"{s.median_success_time_s:.1f}" if s.median_success_time_s is not None else "-"
        lines.append(
            f"{cell.course:<12} {cell.variant.value:<12} {s.avg_time_s:>7.1f} "
            f"{median:>9} {100 * s.success_rate:>7.0f}%"
        )
    return "\n".join(lines) + "\n"


def write_matrix_artifacts(matrix: MatrixResult, out_dir: str | Path) -> list[Path]:
    """Persist one transcript per episode plus results.csv and summary.txt.

    Transcripts are the source of truth; the CSV is derived from them.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in matrix.results:
        p = out / transcript_filename(r.course, r.variant, r.seed)
        p.write_text(serialize(r), encoding="utf-8")
        paths.append(p)
    csv_path = out / "results.csv"
    csv_path.write_text(results_csv(matrix.results), encoding="utf-8")
    paths.append(csv_path)
    summary_path = out / "summary.txt"
    summary_path.write_text(summary_text(matrix), encoding="utf-8")
    paths.append(summary_path)
    return paths


def parse_variants(names) -> tuple[MethodVariant, ...]:
    return tuple(parse_variant(n) for n in names)
