"""Grid shortest-path distance-to-goal field.

Ground-truth progress oracle: multi-source Dijkstra from the goal region
over a 0.1 m, 8-connected grid. Only Wall obstacles block, inflated by
the robot radius, so the field measures distance under full skill
capability (crawl and climb assumed available).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from skillnav.geometry import ConvexPolygon

CELL = 0.1
_SQRT2 = math.sqrt(2.0)
# 8-connected neighborhood with step costs in cells.
_NEIGHBORS = [
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, _SQRT2), (1, -1, _SQRT2), (-1, 1, _SQRT2), (-1, -1, _SQRT2),
]


@dataclass(frozen=True, eq=False)
class GeodesicField:
    """Distance-to-goal (meters) sampled at cell centers; inf = unreachable."""

    min_x: float
    min_y: float
    cell: float
    dist: np.ndarray  # (ny, nx) meters
    blocked: np.ndarray  # (ny, nx) bool

    def _cell_index(self, x: float, y: float) -> tuple[int, int]:
        ny, nx = self.dist.shape
        i = int(np.clip(round((x - self.min_x) / self.cell - 0.5), 0, nx - 1))
        j = int(np.clip(round((y - self.min_y) / self.cell - 0.5), 0, ny - 1))
        return i, j

    def _center(self, i: int, j: int) -> tuple[float, float]:
        return (
            self.min_x + (i + 0.5) * self.cell,
            self.min_y + (j + 0.5) * self.cell,
        )

    def distance(self, x: float, y: float) -> float:
        """Distance to goal from (x, y); snaps to the nearest finite cell."""
        i, j = self._cell_index(x, y)
        ny, nx = self.dist.shape
        if math.isfinite(self.dist[j, i]):
            return float(self.dist[j, i])
        # Reachable states can round into an inflated-wall margin cell;
        # bridge at most two rings so disconnected regions stay infinite.
        for ring in range(1, 3):
            best = math.inf
            for dj in range(-ring, ring + 1):
                for di in range(-ring, ring + 1):
                    if max(abs(di), abs(dj)) != ring:
                        continue
                    ii, jj = i + di, j + dj
                    if not (0 <= ii < nx and 0 <= jj < ny):
                        continue
                    d = self.dist[jj, ii]
                    if math.isfinite(d):
                        cx, cy = self._center(ii, jj)
                        best = min(best, d + math.hypot(x - cx, y - cy))
            if math.isfinite(best):
                return best
        return math.inf


def build_field(
    bounds: tuple[float, float, float, float],
    walls: list[ConvexPolygon],
    goal_center: tuple[float, float],
    goal_radius: float,
    robot_radius: float,
    cell: float = CELL,
) -> GeodesicField:
    min_x, min_y, max_x, max_y = bounds
    nx = max(1, int(round((max_x - min_x) / cell)))
    ny = max(1, int(round((max_y - min_y) / cell)))
    xs = min_x + (np.arange(nx) + 0.5) * cell
    ys = min_y + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)

    # Robot-center margin: the disc must stay fully inside bounds.
    blocked = (
        (centers[:, 0] < min_x + robot_radius - 1e-9)
        | (centers[:, 0] > max_x - robot_radius + 1e-9)
        | (centers[:, 1] < min_y + robot_radius - 1e-9)
        | (centers[:, 1] > max_y - robot_radius + 1e-9)
    )
    for wall in walls:
        blocked |= wall.distances(centers) < robot_radius - 1e-9
    blocked = blocked.reshape(ny, nx)

    dist = np.full((ny, nx), np.inf)
    cx, cy = goal_center
    in_goal = (gx - cx) ** 2 + (gy - cy) ** 2 <= goal_radius**2
    sources = np.argwhere(in_goal & ~blocked)
    if sources.size == 0:
        # Goal radius below cell pitch: seed the nearest open cell.
        d2 = np.where(blocked, np.inf, (gx - cx) ** 2 + (gy - cy) ** 2)
        j, i = np.unravel_index(int(np.argmin(d2)), d2.shape)
        sources = np.array([[j, i]])

    heap: list[tuple[float, int, int]] = []
    for j, i in sources:
        dist[j, i] = 0.0
        heapq.heappush(heap, (0.0, int(i), int(j)))
    step = cell
    while heap:
        d, i, j = heapq.heappop(heap)
        if d > dist[j, i]:
            continue
        for di, dj, w in _NEIGHBORS:
            ii, jj = i + di, j + dj
            if not (0 <= ii < nx and 0 <= jj < ny) or blocked[jj, ii]:
                continue
            nd = d + w * step
            if nd < dist[jj, ii] - 1e-12:
                dist[jj, ii] = nd
                heapq.heappush(heap, (nd, ii, jj))

    dist.setflags(write=False)
    blocked.setflags(write=False)
    return GeodesicField(min_x=min_x, min_y=min_y, cell=cell, dist=dist, blocked=blocked)
