"""Planar primitives for triangle cells.

Points are ``(x, y)`` pairs of floats (any length-2 sequence works, numpy rows
included).  Triangles are triples of points, convex polygons are lists of points
in counter-clockwise order.  Everything here is a pure function.
"""

from __future__ import annotations

import math
from typing import Sequence

Point2 = tuple[float, float]
Triangle = tuple[Point2, Point2, Point2]
ConvexPolygon = list[Point2]

EPSILON = 1e-9


def signed_area(t: Sequence[Sequence[float]]) -> float:
    """Signed area; positive for counter-clockwise vertex order."""
    (x1, y1), (x2, y2), (x3, y3) = t
    return 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))


def triangle_area(t: Sequence[Sequence[float]]) -> float:
    (x1, y1), (x2, y2), (x3, y3) = t
    return 0.5 * abs((x1 - x3) * (y2 - y1) - (x1 - x2) * (y3 - y1))


def centroid(t: Sequence[Sequence[float]]) -> Point2:
    (x1, y1), (x2, y2), (x3, y3) = t
    return ((x1 + x2 + x3) / 3.0, (y1 + y2 + y3) / 3.0)


def polygon_area(p: Sequence[Sequence[float]]) -> float:
    """Shoelace area of a simple polygon (orientation ignored)."""
    n = len(p)
    if n < 3:
        return 0.0
    s = 0.0
    x0, y0 = p[-1]
    for x1, y1 in p:
        s += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return 0.5 * abs(s)


def point_in_triangle(pt: Sequence[float], t: Sequence[Sequence[float]], eps: float = EPSILON) -> bool:
    """Inclusive containment test, edges widened by ``eps``."""
    a, b, c = t
    if signed_area(t) < 0:
        b, c = c, b
    x, y = pt
    for (x1, y1), (x2, y2) in ((a, b), (b, c), (c, a)):
        ex, ey = x2 - x1, y2 - y1
        length = math.hypot(ex, ey)
        if length == 0.0:
            return False
        if (ex * (y - y1) - ey * (x - x1)) / length < -eps:
            return False
    return True


def _ccw(t: Sequence[Sequence[float]]) -> list[Point2]:
    pts = [(float(p[0]), float(p[1])) for p in t]
    if signed_area(pts) < 0:
        pts.reverse()
    return pts


def _clip_halfplane(poly: list[Point2], a: Point2, b: Point2, eps: float) -> list[Point2]:
    # keep the left side of the directed line a->b
    ax, ay = a
    ex, ey = b[0] - ax, b[1] - ay
    length = math.hypot(ex, ey)
    dist = [(ex * (y - ay) - ey * (x - ax)) / length for x, y in poly]
    out: list[Point2] = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k - 1], poly[k]
        dp, dq = dist[k - 1], dist[k]
        p_in, q_in = dp >= -eps, dq >= -eps
        if q_in:
            if not p_in:
                out.append(_cut(p, q, dp, dq))
            out.append(q)
        elif p_in:
            out.append(_cut(p, q, dp, dq))
    return out


def _cut(p: Point2, q: Point2, dp: float, dq: float) -> Point2:
    s = dp / (dp - dq)
    return (p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]))


def _dedupe(poly: list[Point2], eps: float) -> list[Point2]:
    out: list[Point2] = []
    for p in poly:
        if out and abs(p[0] - out[-1][0]) <= eps and abs(p[1] - out[-1][1]) <= eps:
            continue
        out.append(p)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= eps and abs(out[0][1] - out[-1][1]) <= eps:
        out.pop()
    return out


def clip_polygon_triangle(subject: Sequence[Sequence[float]], clip: Sequence[Sequence[float]],
                          eps: float = EPSILON) -> ConvexPolygon:
    """Intersect a convex polygon with a triangle by half-plane clipping.

    Both inputs may have either orientation; the result is counter-clockwise.
    Results with area below ``eps**2`` are returned as the empty list.
    """
    c = _ccw(clip)
    if signed_area(c) <= eps * eps:
        return []
    poly = [(float(p[0]), float(p[1])) for p in subject]
    if len(poly) < 3:
        return []
    s = 0.0
    for k in range(len(poly)):
        s += poly[k - 1][0] * poly[k][1] - poly[k][0] * poly[k - 1][1]
    if s < 0:
        poly.reverse()
    for k in range(3):
        poly = _clip_halfplane(poly, c[k], c[(k + 1) % 3], eps)
        if len(poly) < 3:
            return []
    poly = _dedupe(poly, eps)
    if len(poly) < 3 or polygon_area(poly) < eps * eps:
        return []
    return poly


def clip_triangle_triangle(subject: Sequence[Sequence[float]], clip: Sequence[Sequence[float]],
                           eps: float = EPSILON) -> ConvexPolygon:
    """Intersection polygon of two triangles (possibly empty)."""
    return clip_polygon_triangle(subject, clip, eps)


def intersection_area(a: Sequence[Sequence[float]], b: Sequence[Sequence[float]],
                      eps: float = EPSILON) -> float:
    return polygon_area(clip_triangle_triangle(a, b, eps))
