"""Planar geometry kernels: clipping, intersections, cell-to-line distances.

Predicates are tolerance based. Unless a tolerance is passed explicitly it is
taken as ``REL_TOL`` times the diagonal of the bounding box of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

REL_TOL = 1e-9


class GeometryError(ValueError):
    pass


def as_point(p) -> np.ndarray:
    q = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(q)):
        raise GeometryError(f"non-finite coordinates {q}")
    return q


@dataclass(frozen=True, eq=False)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_point(self.a))
        object.__setattr__(self, "b", as_point(self.b))
        if self.length <= 0.0:
            raise GeometryError("zero-length segment")

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.b - self.a)))

    @property
    def direction(self) -> np.ndarray:
        return self.b - self.a

    @property
    def tangent(self) -> np.ndarray:
        return self.direction / self.length

    @property
    def normal(self) -> np.ndarray:
        t = self.tangent
        return np.array([-t[1], t[0]])

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    def point_at(self, t: float) -> np.ndarray:
        return self.a + t * self.direction

    def __repr__(self):
        return f"Segment({self.a.tolist()}, {self.b.tolist()})"


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Counter-clockwise convex polygon."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("non-finite polygon vertex")
        if polygon_area(v) <= 0.0:
            raise GeometryError("polygon must have positive signed area (CCW)")
        object.__setattr__(self, "vertices", v)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.vertices)

    def edges(self):
        v = self.vertices
        return zip(v, np.roll(v, -1, axis=0))


def _default_tol(*arrays) -> float:
    pts = np.vstack([np.asarray(a, dtype=float).reshape(-1, 2) for a in arrays])
    diag = float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))
    return REL_TOL * max(diag, 1e-300)


def cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def polygon_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def polygon_centroid(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    # shift for conditioning at large coordinates
    o = v[0]
    v = v - o
    w = np.roll(v, -1, axis=0)
    c = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
    a = 0.5 * c.sum()
    if a == 0.0:
        raise GeometryError("degenerate polygon")
    cx = np.sum((v[:, 0] + w[:, 0]) * c) / (6.0 * a)
    cy = np.sum((v[:, 1] + w[:, 1]) * c) / (6.0 * a)
    return np.array([cx, cy]) + o


def clip_segment_to_polygon(seg: Segment, poly: ConvexPolygon, tol: Optional[float] = None) -> Optional[Segment]:
    """Cyrus-Beck clipping of a segment against a closed convex polygon.

    Returns None when the intersection is empty or shorter than ``tol``.
    """
    if tol is None:
        tol = _default_tol(poly.vertices, [seg.a, seg.b])
    t0, t1 = 0.0, 1.0
    d = seg.direction
    for p, q in poly.edges():
        e = q - p
        # inward normal of a CCW edge
        n = np.array([-e[1], e[0]])
        n /= np.hypot(*n)
        num = float(np.dot(n, seg.a - p))
        den = float(np.dot(n, d))
        if abs(den) <= 1e-12 * seg.length:
            if num < -tol:
                return None
            continue
        t = -num / den
        if den > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if (t1 - t0) * seg.length <= tol:
            return None
    a, b = seg.point_at(t0), seg.point_at(t1)
    if np.hypot(*(b - a)) <= tol:
        return None
    return Segment(a, b)


class Intersection(NamedTuple):
    kind: str  # "point" or "overlap"
    point: Optional[np.ndarray]
    t1: object
    t2: object


def segment_intersection(s1: Segment, s2: Segment, tol: Optional[float] = None) -> Optional[Intersection]:
    """Intersection of two closed segments.

    A transversal crossing gives ``kind="point"`` with parameters ``t1, t2``
    in [0, 1]. Collinear overlap gives ``kind="overlap"`` with the overlap
    parameter intervals on each segment; it is never collapsed to a point.
    """
    if tol is None:
        tol = _default_tol([s1.a, s1.b, s2.a, s2.b])
    r, s = s1.direction, s2.direction
    qp = s2.a - s1.a
    denom = float(cross2(r, s))
    l1, l2 = s1.length, s2.length
    if abs(denom) / (l1 * l2) < 1e-12:
        # parallel: check collinearity via distance of s2.a to line of s1
        if abs(float(cross2(r, qp))) / l1 > tol:
            return None
        rr = float(np.dot(r, r))
        ta = float(np.dot(qp, r)) / rr
        tb = float(np.dot(s2.b - s1.a, r)) / rr
        lo, hi = max(0.0, min(ta, tb)), min(1.0, max(ta, tb))
        if (hi - lo) * l1 < -tol:
            return None
        if (hi - lo) * l1 <= tol:
            # touching end to end
            t = 0.5 * (lo + hi)
            p = s1.point_at(t)
            u = float(np.dot(p - s2.a, s)) / float(np.dot(s, s))
            return Intersection("point", p, t, min(max(u, 0.0), 1.0))
        ss = float(np.dot(s, s))
        u_lo = float(np.dot(s1.point_at(lo) - s2.a, s)) / ss
        u_hi = float(np.dot(s1.point_at(hi) - s2.a, s)) / ss
        return Intersection("overlap", None, (lo, hi), (min(u_lo, u_hi), max(u_lo, u_hi)))
    t = float(cross2(qp, s)) / denom
    u = float(cross2(qp, r)) / denom
    et, eu = tol / l1, tol / l2
    if t < -et or t > 1 + et or u < -eu or u > 1 + eu:
        return None
    t = min(max(t, 0.0), 1.0)
    u = min(max(u, 0.0), 1.0)
    return Intersection("point", s1.point_at(t), t, u)


def clip_polygon_halfplane(vertices, point, normal) -> np.ndarray:
    """Keep the part of a convex polygon where ``normal . (x - point) >= 0``."""
    v = np.asarray(vertices, dtype=float)
    if len(v) == 0:
        return v
    s = (v - point) @ normal
    out = []
    n = len(v)
    for k in range(n):
        cur, nxt = v[k], v[(k + 1) % n]
        sc, sn = s[k], s[(k + 1) % n]
        if sc >= 0:
            out.append(cur)
        if (sc >= 0) != (sn >= 0) and sc != sn:
            out.append(cur + (sc / (sc - sn)) * (nxt - cur))
    return np.array(out).reshape(-1, 2)


def clip_convex_polygons(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman intersection of two convex CCW polygons."""
    v = np.asarray(subject, dtype=float)
    c = np.asarray(clip, dtype=float)
    for p, q in zip(c, np.roll(c, -1, axis=0)):
        e = q - p
        v = clip_polygon_halfplane(v, p, np.array([-e[1], e[0]]))
        if len(v) < 3:
            return np.empty((0, 2))
    return v


def convex_overlap_area(subject, clip) -> float:
    v = clip_convex_polygons(subject, clip)
    return polygon_area(v) if len(v) >= 3 else 0.0


def mean_distance_cell_to_segment(poly: ConvexPolygon, seg: Segment) -> float:
    """Area average over the cell of the distance to the segment's supporting line.

    The cell is split by the line; on each side the distance is a linear
    function, whose average over a polygon is its value at the centroid.
    """
    area = poly.area
    if area <= _default_tol(poly.vertices) ** 2:
        raise GeometryError("degenerate cell area")
    n = seg.normal
    total = 0.0
    for sign in (1.0, -1.0):
        piece = clip_polygon_halfplane(poly.vertices, seg.a, sign * n)
        if len(piece) < 3:
            continue
        a = polygon_area(piece)
        if a <= 0.0:
            continue
        c = polygon_centroid(piece)
        total += a * abs(float(np.dot(c - seg.a, n)))
    return total / area


def mean_distance_along_segment(length: float, s: float) -> float:
    """Average of |x - x0| over a segment [0, length] for a point at s in [0, length]."""
    s = min(max(s, 0.0), length)
    return (s * s + (length - s) ** 2) / (2.0 * length)


def point_segment_distance(points, a, b) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    a = as_point(a)
    d = as_point(b) - a
    t = np.clip((p - a) @ d / float(d @ d), 0.0, 1.0)
    return np.hypot(*(p - a - t[:, None] * d).T)


def points_in_polygon(points, vertices) -> np.ndarray:
    """Even-odd test; points on the boundary may go either way."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    v = np.asarray(vertices, dtype=float)
    x, y = p[:, 0], p[:, 1]
    inside = np.zeros(len(p), dtype=bool)
    for (x0, y0), (x1, y1) in zip(v, np.roll(v, -1, axis=0)):
        cond = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= cond & (x < xc)
    return inside


def bounding_diagonal(points: Sequence) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))
