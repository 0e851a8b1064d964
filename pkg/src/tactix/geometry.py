"""Planar geometry primitives: vectors and simple-polygon predicates.

Coordinates are millimetres in a y-down frame (origin at the top-left of the
sheet).  Polygon vertex order must give a positive shoelace area; validation
and containment below rely on that convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

# Absolute tolerance (mm) for boundary / collinearity decisions.
EDGE_EPS_MM = 1e-9


@dataclass(frozen=True)
class Vec2:
    x_mm: float
    y_mm: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_mm) and math.isfinite(self.y_mm)):
            raise ValueError(f"non-finite coordinates: ({self.x_mm}, {self.y_mm})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x_mm + other.x_mm, self.y_mm + other.y_mm)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x_mm - other.x_mm, self.y_mm - other.y_mm)

    def scaled(self, s: float) -> "Vec2":
        return Vec2(self.x_mm * s, self.y_mm * s)

    def norm(self) -> float:
        return math.hypot(self.x_mm, self.y_mm)


ZERO = Vec2(0.0, 0.0)

Polygon = Sequence[Vec2]


def clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def clamp_norm(v: Vec2, max_norm: float) -> Vec2:
    """Scale v down to max_norm if longer, keeping its direction."""
    n = v.norm()
    if n <= max_norm or n == 0.0:
        return v
    return v.scaled(max_norm / n)


def signed_area(poly: Polygon) -> float:
    """Shoelace area; positive for the winding this package stores."""
    total = 0.0
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        total += a.x_mm * b.y_mm - b.x_mm * a.y_mm
    return total / 2.0


def polygon_centroid(poly: Polygon) -> Vec2:
    """Area centroid of a simple polygon."""
    area = signed_area(poly)
    if area == 0.0:
        raise ValueError("degenerate polygon has no centroid")
    cx = 0.0
    cy = 0.0
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        cross = a.x_mm * b.y_mm - b.x_mm * a.y_mm
        cx += (a.x_mm + b.x_mm) * cross
        cy += (a.y_mm + b.y_mm) * cross
    return Vec2(cx / (6.0 * area), cy / (6.0 * area))


def _orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> float:
    """Twice the signed area of triangle abc."""
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def point_on_segment(p: Vec2, a: Vec2, b: Vec2, eps: float = EDGE_EPS_MM) -> bool:
    """True if p lies on segment ab within eps (perpendicular distance)."""
    abx = b.x_mm - a.x_mm
    aby = b.y_mm - a.y_mm
    seg_len = math.hypot(abx, aby)
    if seg_len == 0.0:
        return math.hypot(p.x_mm - a.x_mm, p.y_mm - a.y_mm) <= eps
    cross = abs(_orient(a.x_mm, a.y_mm, b.x_mm, b.y_mm, p.x_mm, p.y_mm))
    if cross / seg_len > eps:
        return False
    dot = (p.x_mm - a.x_mm) * abx + (p.y_mm - a.y_mm) * aby
    return -eps * seg_len <= dot <= seg_len * seg_len + eps * seg_len


def point_in_polygon(p: Vec2, poly: Polygon) -> bool:
    """Boundary-inclusive containment (even-odd rule off the boundary)."""
    n = len(poly)
    for i in range(n):
        if point_on_segment(p, poly[i], poly[(i + 1) % n]):
            return True
    return _crossing_number_odd(p, poly)


def point_strictly_inside(p: Vec2, poly: Polygon) -> bool:
    """Containment excluding the boundary."""
    n = len(poly)
    for i in range(n):
        if point_on_segment(p, poly[i], poly[(i + 1) % n]):
            return False
    return _crossing_number_odd(p, poly)


def _crossing_number_odd(p: Vec2, poly: Polygon) -> bool:
    # Standard ray cast along +x with the half-open rule, so vertices on the
    # ray are not double counted.
    inside = False
    n = len(poly)
    px, py = p.x_mm, p.y_mm
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        ay, by = a.y_mm, b.y_mm
        if (ay > py) != (by > py):
            x_at = a.x_mm + (py - ay) * (b.x_mm - a.x_mm) / (by - ay)
            if px < x_at:
                inside = not inside
    return inside


def segments_properly_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool:
    """True if the open segments cross at a single interior point."""
    d1 = _orient(b1.x_mm, b1.y_mm, b2.x_mm, b2.y_mm, a1.x_mm, a1.y_mm)
    d2 = _orient(b1.x_mm, b1.y_mm, b2.x_mm, b2.y_mm, a2.x_mm, a2.y_mm)
    d3 = _orient(a1.x_mm, a1.y_mm, a2.x_mm, a2.y_mm, b1.x_mm, b1.y_mm)
    d4 = _orient(a1.x_mm, a1.y_mm, a2.x_mm, a2.y_mm, b2.x_mm, b2.y_mm)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def is_simple_polygon(poly: Polygon) -> bool:
    """No self-intersection: non-adjacent edges never touch or cross."""
    n = len(poly)
    if n < 3:
        return False
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a1, a2 = edges[i]
        if a1 == a2:
            return False
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent edges share a vertex by construction
            b1, b2 = edges[j]
            if segments_properly_intersect(a1, a2, b1, b2):
                return False
            # Touching at a non-shared point also breaks simplicity.
            if (
                point_on_segment(a1, b1, b2)
                or point_on_segment(a2, b1, b2)
                or point_on_segment(b1, a1, a2)
                or point_on_segment(b2, a1, a2)
            ):
                return False
    return True


def polygons_interiors_overlap(pa: Polygon, pb: Polygon) -> bool:
    """True if the two simple polygons share interior area (touching is fine)."""
    na, nb = len(pa), len(pb)
    for i in range(na):
        a1, a2 = pa[i], pa[(i + 1) % na]
        for j in range(nb):
            if segments_properly_intersect(a1, a2, pb[j], pb[(j + 1) % nb]):
                return True
    for v in pa:
        if point_strictly_inside(v, pb):
            return True
    for v in pb:
        if point_strictly_inside(v, pa):
            return True
    # One polygon could swallow the other without vertex containment only if
    # edges crossed, which was checked above; centroids settle the nested case.
    if point_strictly_inside(polygon_centroid(pa), pb):
        return True
    if point_strictly_inside(polygon_centroid(pb), pa):
        return True
    return False
