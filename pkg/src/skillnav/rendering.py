"""Overhead course renderings: an ASCII map and an SVG, both deterministic.

North is up in both. The ASCII grid samples cell centers, so thin
obstacles are guaranteed a mark only at the default resolution or finer.
"""

from __future__ import annotations

import math
from pathlib import Path

from skillnav.course import CourseSpec, ObstacleClass, resolve_course
from skillnav.transcripts import Transcript

GLYPHS = {
    ObstacleClass.WALL: "#",
    ObstacleClass.LOW_OVERHANG: "=",
    ObstacleClass.STEP: "^",
    ObstacleClass.GOAL_MARKER: "*",
}

SVG_FILLS = {
    ObstacleClass.WALL: "#4a4a4a",
    ObstacleClass.LOW_OVERHANG: "#8f6fd1",
    ObstacleClass.STEP: "#c99117",
    ObstacleClass.GOAL_MARKER: "#2bb673",
}

LEGEND = "S start  G goal  # Wall  = LowOverhang  ^ Step  * GoalMarker  . path"


def trajectory_from_transcript(
    transcript: Transcript, course: CourseSpec | None = None
) -> tuple[tuple[float, float, float], ...]:
    """Pose sequence (x, y, heading): the start pose, then one pose per
    executed command. Pass the course explicitly when it is not builtin."""
    course = course or resolve_course(transcript.header["course"])
    poses = [(course.start.x, course.start.y, course.start.heading)]
    for row in transcript.queries:
        if row.get("final") and row.get("pose_after") is not None:
            poses.append(tuple(row["pose_after"]))
    return tuple(poses)


def _cell(course: CourseSpec, x: float, y: float, cols: int, rows: int) -> tuple[int, int]:
    b = course.bounds
    col = int((x - b.min_x) / (b.max_x - b.min_x) * cols)
    row = int((b.max_y - y) / (b.max_y - b.min_y) * rows)
    return min(max(row, 0), rows - 1), min(max(col, 0), cols - 1)


def course_ascii(
    course: CourseSpec,
    trajectory: tuple[tuple[float, float, float], ...] = (),
    cols_per_m: int = 4,
    rows_per_m: int = 2,
) -> str:
    b = course.bounds
    cols = max(1, round((b.max_x - b.min_x) * cols_per_m))
    rows = max(1, round((b.max_y - b.min_y) * rows_per_m))
    grid = [[" "] * cols for _ in range(rows)]

    gx, gy, gr = course.goal.x, course.goal.y, course.goal.radius
    for r in range(rows):
        for c in range(cols):
            # Sample the cell center.
            x = b.min_x + (c + 0.5) * (b.max_x - b.min_x) / cols
            y = b.max_y - (r + 0.5) * (b.max_y - b.min_y) / rows
            if math.hypot(x - gx, y - gy) <= gr:
                grid[r][c] = "G"
            for ob in course.obstacles:
                if ob.polygon.contains((x, y)):
                    grid[r][c] = GLYPHS[ob.oclass]
                    break

    # Trace segments first so waypoint indices stamp over them.
    for (x0, y0, _), (x1, y1, _) in zip(trajectory, trajectory[1:]):
        span = math.hypot(x1 - x0, y1 - y0)
        for i in range(int(span * cols_per_m * 2) + 1):
            t = i / max(1, int(span * cols_per_m * 2))
            r, c = _cell(course, x0 + t * (x1 - x0), y0 + t * (y1 - y0), cols, rows)
            grid[r][c] = "."
    for i, (x, y, _) in enumerate(trajectory):
        r, c = _cell(course, x, y, cols, rows)
        grid[r][c] = str(i % 10)

    r, c = _cell(course, course.start.x, course.start.y, cols, rows)
    grid[r][c] = "S"

    frame = "+" + "-" * cols + "+"
    body = "\n".join("|" + "".join(row) + "|" for row in grid)
    return f"{course.name}\n{frame}\n{body}\n{frame}\n{LEGEND}\n"


def _svg_pts(points, b, scale: float, margin: float) -> str:
    return " ".join(
        f"{(x - b.min_x) * scale + margin:.1f},{(b.max_y - y) * scale + margin:.1f}"
        for x, y in points
    )


def course_svg(
    course: CourseSpec,
    trajectory: tuple[tuple[float, float, float], ...] = (),
    scale: float = 60.0,
    margin: float = 20.0,
) -> str:
    b = course.bounds
    width = (b.max_x - b.min_x) * scale + 2 * margin
    height = (b.max_y - b.min_y) * scale + 2 * margin

    def sx(x: float) -> float:
        return (x - b.min_x) * scale + margin

    def sy(y: float) -> float:
        return (b.max_y - y) * scale + margin

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
        f'<rect x="{margin:.1f}" y="{margin:.1f}" width="{(b.max_x - b.min_x) * scale:.1f}" '
        f'height="{(b.max_y - b.min_y) * scale:.1f}" fill="none" stroke="#000000" stroke-width="2"/>',
        f'<title>{course.name}</title>',
    ]
    for ob in course.obstacles:
        pts = _svg_pts(ob.polygon.vertices.tolist(), b, scale, margin)
        parts.append(
            f'<polygon points="{pts}" fill="{SVG_FILLS[ob.oclass]}" fill-opacity="0.8">'
            f"<title>{ob.oclass.value}</title></polygon>"
        )
    parts.append(
        f'<circle cx="{sx(course.goal.x):.1f}" cy="{sy(course.goal.y):.1f}" '
        f'r="{course.goal.radius * scale:.1f}" fill="#2bb673" fill-opacity="0.3" '
        f'stroke="#2bb673" stroke-width="2"><title>goal</title></circle>'
    )
    if len(trajectory) >= 2:
        pts = _svg_pts([(x, y) for x, y, _ in trajectory], b, scale, margin)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="#d1495b" stroke-width="2"/>'
        )
    for i, (x, y, _) in enumerate(trajectory):
        parts.append(
            f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="4" fill="#d1495b"/>'
            f'<text x="{sx(x) + 6:.1f}" y="{sy(y) - 6:.1f}" font-size="11" '
            f'fill="#d1495b">{i}</text>'
        )
    # Start marker drawn last so it stays visible under trajectories.
    parts.append(
        f'<circle cx="{sx(course.start.x):.1f}" cy="{sy(course.start.y):.1f}" r="6" '
        f'fill="none" stroke="#1f6feb" stroke-width="3"><title>start</title></circle>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_course(
    course: CourseSpec,
    transcript: Transcript | None = None,
    out_base: str | None = None,
) -> dict[str, str]:
    """Build both artifacts; write them when out_base is given.

    Returns {"ascii": text, "svg": text}; files land at out_base + ".txt"
    and out_base + ".svg".
    """
    trajectory = trajectory_from_transcript(transcript, course) if transcript else ()
    artifacts = {
        "ascii": course_ascii(course, trajectory),
        "svg": course_svg(course, trajectory),
    }
    if out_base is not None:
        base = Path(out_base)
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".txt").write_text(artifacts["ascii"], encoding="utf-8")
        base.with_suffix(".svg").write_text(artifacts["svg"], encoding="utf-8")
    return artifacts
