"""Atoms, directions and tubes in the unit cube, and the predicates between them.

Vectors are plain tuples of floats.  Every distance used by a predicate is
computed in one fixed order of floating point operations; the compiled
kernels and the numpy fallback repeat that order exactly so that all code
paths agree bit-for-bit on incidence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

Vec = Tuple[float, ...]

MIN_DIM = 2
MAX_DIM = 4
NORM_TOL = 1e-12
ORTHO_TOL = 1e-10


def check_dim(d: int) -> int:
    if not isinstance(d, (int,)) or isinstance(d, bool) or not MIN_DIM <= d <= MAX_DIM:
        raise ValueError(f"dimension must be an integer in [{MIN_DIM}, {MAX_DIM}], got {d!r}")
    return d


def cube_center(d: int) -> Vec:
    return (0.5,) * d


def dot(x: Sequence[float], y: Sequence[float]) -> float:
    s = 0.0
    for a, b in zip(x, y):
        s += a * b
    return s


def norm(x: Sequence[float]) -> float:
    return math.sqrt(dot(x, x))


def canonical(vec: Sequence[float]) -> Vec:
    """Unit vector with its last nonzero component made positive."""
    n = norm(vec)
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    v = [c / n for c in vec]
    for c in reversed(v):
        if c != 0.0:
            if c < 0.0:
                v = [-x for x in v]
            break
    return tuple(v)


@dataclass(frozen=True)
class Direction:
    vec: Vec

    def __post_init__(self):
        check_dim(len(self.vec))
        if abs(norm(self.vec) - 1.0) > NORM_TOL:
            raise ValueError("direction must be a unit vector")
        for c in reversed(self.vec):
            if c != 0.0:
                if c < 0.0:
                    raise ValueError("direction is not canonical (last nonzero component < 0)")
                break

    @classmethod
    def of(cls, vec: Sequence[float]) -> "Direction":
        return cls(canonical(vec))

    @property
    def d(self) -> int:
        return len(self.vec)


@dataclass(frozen=True)
class Atom:
    """Closed ball of diameter ``diameter`` centred at ``center``."""

    center: Vec
    diameter: float
    weight: int = 1

    def __post_init__(self):
        check_dim(len(self.center))
        if not 0.0 < self.diameter < 1.0:
            raise ValueError(f"atom diameter must lie in (0,1), got {self.diameter}")
        if int(self.weight) != self.weight or self.weight < 1:
            raise ValueError(f"atom weight must be a positive integer, got {self.weight}")
        for c in self.center:
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"atom center {self.center} lies outside the unit cube")

    @property
    def d(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class Tube:
    """Neighbourhood of radius ``width/2`` of a line, clipped to the cube.

    ``anchor`` is the point of the axis closest to the cube centre.
    """

    direction: Vec
    anchor: Vec
    width: float
    weight: int = 1

    def __post_init__(self):
        Direction(self.direction)
        if len(self.anchor) != len(self.direction):
            raise ValueError("anchor and direction dimensions differ")
        if not 0.0 < self.width < 1.0:
            raise ValueError(f"tube width must lie in (0,1), got {self.width}")
        if int(self.weight) != self.weight or self.weight < 1:
            raise ValueError(f"tube weight must be a positive integer, got {self.weight}")
        off = [a - 0.5 for a in self.anchor]
        if abs(dot(off, self.direction)) > ORTHO_TOL:
            raise ValueError("anchor is not the closest axis point to the cube center")
        if self.segment() is None:
            raise ValueError("tube axis misses the expanded unit cube")

    @property
    def d(self) -> int:
        return len(self.direction)

    def segment(self) -> Optional[Tuple[float, float]]:
        return segment_params(self.anchor, self.direction, 0.5 * self.width)

    @classmethod
    def through(cls, point: Sequence[float], direction: Sequence[float], width: float,
                weight: int = 1) -> "Tube":
        """Tube whose axis passes through ``point`` with the given direction."""
        u = canonical(direction)
        c = cube_center(len(u))
        t = dot([ci - pi for ci, pi in zip(c, point)], u)
        anchor = tuple(pi + t * ui for pi, ui in zip(point, u))
        # one correction step keeps the orthogonality residual near machine precision
        r = dot([a - 0.5 for a in anchor], u)
        anchor = tuple(a - r * ui for a, ui in zip(anchor, u))
        return cls(u, anchor, width, weight)


def segment_params(p: Sequence[float], u: Sequence[float], h: float) -> Optional[Tuple[float, float]]:
    """Parameter interval of ``p + s*u`` inside the cube ``[-h, 1+h]^d``."""
    lo = -math.inf
    hi = math.inf
    for pi, ui in zip(p, u):
        if ui == 0.0:
            if pi < -h or pi > 1.0 + h:
                return None
            continue
        t0 = (-h - pi) / ui
        t1 = (1.0 + h - pi) / ui
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > lo:
            lo = t0
        if t1 < hi:
            hi = t1
    if lo > hi:
        return None
    return lo, hi


def point_segment_dist2(x: Sequence[float], p: Sequence[float], u: Sequence[float],
                        lo: float, hi: float) -> float:
    s = 0.0
    for xi, pi, ui in zip(x, p, u):
        s += (xi - pi) * ui
    if s < lo:
        s = lo
    elif s > hi:
        s = hi
    acc = 0.0
    for xi, pi, ui in zip(x, p, u):
        e = (xi - pi) - s * ui
        acc += e * e
    return acc


def angle_between(d1, d2) -> float:
    """Angle in [0, pi/2] between two lines with the given directions."""
    v1 = d1.vec if isinstance(d1, Direction) else d1
    v2 = d2.vec if isinstance(d2, Direction) else d2
    if dot(v1, v2) < 0.0:
        v2 = [-x for x in v2]
    # half-angle form stays accurate near 0, where arccos of the dot product does not
    return 2.0 * math.atan2(norm([a - b for a, b in zip(v1, v2)]), norm([a + b for a, b in zip(v1, v2)]))


def atom_tube_incident(a: Atom, t: Tube) -> bool:
    seg = t.segment()
    if seg is None:
        return False
    r = 0.5 * (a.diameter + t.width)
    return point_segment_dist2(a.center, t.anchor, t.direction, seg[0], seg[1]) <= r * r


def atoms_distinct(a1: Atom, a2: Atom) -> bool:
    diff = [x - y for x, y in zip(a1.center, a2.center)]
    return dot(diff, diff) > a1.diameter * a1.diameter


def segment_segment_distance(p1, u1, s_range, p2, u2, t_range) -> float:
    """Minimum distance between two segments ``p + s*u``; ``u`` unit vectors."""
    a0, a1 = s_range
    b0, b1 = t_range
    r = [x - y for x, y in zip(p1, p2)]
    b = dot(u1, u2)

    def dist(s, t):
        e = [ri + s * x - t * y for ri, x, y in zip(r, u1, u2)]
        return math.sqrt(dot(e, e))

    def clamp(v, lo, hi):
        return lo if v < lo else hi if v > hi else v

    best = math.inf
    # minimum of a convex quadratic over a rectangle: interior stationary point or an edge
    for s in (a0, a1):
        t = clamp(dot(u2, r) + s * b, b0, b1)
        best = min(best, dist(s, t))
    for t in (b0, b1):
        s = clamp(t * b - dot(u1, r), a0, a1)
        best = min(best, dist(s, t))
    den = 1.0 - b * b
    if den > 1e-15:
        c = dot(u1, r)
        f = dot(u2, r)
        s = (b * f - c) / den
        t = (f - b * c) / den
        if a0 <= s <= a1 and b0 <= t <= b1:
            best = min(best, dist(s, t))
    return best


def tubes_distinct(t1: Tube, t2: Tube) -> bool:
    if angle_between(t1.direction, t2.direction) > t1.width:
        return True
    s1 = t1.segment()
    s2 = t2.segment()
    if s1 is None or s2 is None:
        return True
    gap = segment_segment_distance(t1.anchor, t1.direction, s1, t2.anchor, t2.direction, s2)
    return gap > 0.5 * (t1.width + t2.width)
