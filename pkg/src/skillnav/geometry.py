"""Planar geometry for the course world: convex polygons, discs, rays.

All polygon queries come in scalar and numpy-batched forms; the batched
forms carry the simulator's inner loops (substep sweeps, ray fans).
Angles are radians, counterclockwise positive, wrapped to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-9


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def heading_vector(heading: float) -> np.ndarray:
    return np.array([math.cos(heading), math.sin(heading)], dtype=float)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


class BadPolygon(ValueError):
    """Vertex list that is not a simple convex polygon with area."""


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with CCW vertices and precomputed edge frames.

    vertices (n,2); edge i runs vertices[i] -> vertices[(i+1) % n];
    normals[i] is the unit outward normal of edge i.
    """

    vertices: np.ndarray
    edge_vecs: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)

    @classmethod
    def from_points(cls, points) -> "ConvexPolygon":
        v = np.asarray(points, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise BadPolygon(f"need >=3 planar points, got shape {v.shape}")
        # Shoelace; normalize to CCW.
        x, y = v[:, 0], v[:, 1]
        area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        if abs(area2) < 1e-12:
            raise BadPolygon("degenerate polygon (zero area)")
        if area2 < 0:
            v = v[::-1].copy()
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(edges[:, 0], edges[:, 1]) < 1e-12):
            raise BadPolygon("repeated vertex")
        # Convex iff every consecutive edge pair turns left (or straight).
        nxt = np.roll(edges, -1, axis=0)
        turns = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(turns < -1e-9):
            raise BadPolygon("polygon is not convex")
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1) / lengths[:, None]
        v.setflags(write=False)
        edges.setflags(write=False)
        normals.setflags(write=False)
        return cls(vertices=v, edge_vecs=edges, normals=normals)

    @classmethod
    def from_rect(cls, x: float, y: float, w: float, h: float) -> "ConvexPolygon":
        if w <= 0 or h <= 0:
            raise BadPolygon(f"rect needs positive size, got w={w} h={h}")
        return cls.from_points([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])

    # ------------------------------------------------------------------
    # Scalar queries
    # ------------------------------------------------------------------

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        rel = p[None, :] - self.vertices
        return bool(np.all(np.einsum("ij,ij->i", rel, self.normals) <= EPS))

    def distance(self, p) -> float:
        """Distance from point to the polygon; 0 inside."""
        return float(self.distances(np.asarray(p, dtype=float)[None, :])[0])

    def closest_edge_normal(self, p) -> np.ndarray:
        """Outward unit normal of the edge nearest to p."""
        p = np.asarray(p, dtype=float)
        w = p[None, :] - self.vertices
        seg_len2 = np.einsum("ij,ij->i", self.edge_vecs, self.edge_vecs)
        t = np.clip(np.einsum("ij,ij->i", w, self.edge_vecs) / seg_len2, 0.0, 1.0)
        closest = self.vertices + t[:, None] * self.edge_vecs
        d2 = np.einsum("ij,ij->i", p[None, :] - closest, p[None, :] - closest)
        return self.normals[int(np.argmin(d2))].copy()

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def aabb(self) -> tuple[float, float, float, float]:
        mn = self.vertices.min(axis=0)
        mx = self.vertices.max(axis=0)
        return float(mn[0]), float(mn[1]), float(mx[0]), float(mx[1])

    # ------------------------------------------------------------------
    # Batched queries
    # ------------------------------------------------------------------

    def distances(self, pts: np.ndarray) -> np.ndarray:
        """Distances from pts (N,2) to the polygon; 0 for interior points."""
        w = pts[:, None, :] - self.vertices[None, :, :]
        seg_len2 = np.einsum("ij,ij->i", self.edge_vecs, self.edge_vecs)
        t = np.einsum("nij,ij->ni", w, self.edge_vecs) / seg_len2[None, :]
        np.clip(t, 0.0, 1.0, out=t)
        closest = self.vertices[None, :, :] + t[:, :, None] * self.edge_vecs[None, :, :]
        diff = pts[:, None, :] - closest
        edge_d = np.sqrt(np.einsum("nij,nij->ni", diff, diff)).min(axis=1)
        inside = np.all(np.einsum("nij,ij->ni", w, self.normals) <= EPS, axis=1)
        edge_d[inside] = 0.0
        return edge_d

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        w = pts[:, None, :] - self.vertices[None, :, :]
        return np.all(np.einsum("nij,ij->ni", w, self.normals) <= EPS, axis=1)

    def raycast_many(self, origin, dirs: np.ndarray) -> np.ndarray:
        """First-hit parameter t per ray direction; inf where the ray misses.

        origin (2,), dirs (R,2) need not be unit length; t is in units of
        the direction vector's length.
        """
        o = np.asarray(origin, dtype=float)
        p1 = self.vertices
        e = self.edge_vecs
        rel = p1 - o[None, :]
        denom = _cross(dirs[:, 0:1], dirs[:, 1:2], e[None, :, 0], e[None, :, 1])
        t_num = _cross(rel[None, :, 0], rel[None, :, 1], e[None, :, 0], e[None, :, 1])
        u_num = _cross(rel[None, :, 0], rel[None, :, 1], dirs[:, 0:1], dirs[:, 1:2])
        with np.errstate(divide="ignore", invalid="ignore"):
            t = t_num / denom
            u = u_num / denom
        ok = (np.abs(denom) > EPS) & (t >= EPS) & (u >= -EPS) & (u <= 1.0 + EPS)
        t = np.where(ok, t, np.inf)
        return t.min(axis=1)

    def raycast(self, origin, direction) -> float:
        d = np.asarray(direction, dtype=float)[None, :]
        return float(self.raycast_many(origin, d)[0])


def segment_hits(a, b, polygon: ConvexPolygon) -> bool:
    """True if the open segment a->b crosses the polygon boundary."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    t = polygon.raycast(a, d)
    return t < 1.0 - EPS


def fan_directions(heading: float, fov: float, count: int) -> np.ndarray:
    """Unit ray directions spanning [heading - fov/2, heading + fov/2]."""
    angles = heading + np.linspace(-fov / 2.0, fov / 2.0, count)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)
