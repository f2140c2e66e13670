"""Planar primitives: convex cores, their offsets by a disk, containment and
boundary intersections.

An :class:`OffsetShape` is ``core ⊕ D(radius)``.  For a polygon core its
boundary alternates straight edges (core edges pushed out by ``radius``) and
circular arcs centred at the core vertices; a segment core gives a racetrack
(two edges, two semicircles) and a point core a single circle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, NamedTuple, Sequence

import numpy as np

from . import _kernel
from ._kernel import ARC, EDGE, CoreTable, DegenerateInputError, ShapeTable
from .config import eps_or_default

__all__ = [
    "GeometryError",
    "DegenerateInputError",
    "Point",
    "Segment",
    "ConvexCore",
    "BoundaryCurve",
    "OffsetShape",
    "CurveIntersection",
    "offset",
    "contains",
    "dist_point_core",
    "boundary_intersections",
    "shape_table",
    "segments_intersect",
    "shapes_from_cores",
]


class GeometryError(ValueError):
    """Invalid geometric input (non-convex core, negative radius, ...)."""


class Point(NamedTuple):
    x: float
    y: float


class Segment(NamedTuple):
    a: Point
    b: Point

    def core(self) -> "ConvexCore":
        return ConvexCore.segment(self.a, self.b)


def _pt(p) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite coordinate {p!r}")
    return Point(x, y)


@dataclass(frozen=True)
class ConvexCore:
    """A point, a segment or a strictly convex counter-clockwise polygon."""

    vertices: tuple[Point, ...]

    def __post_init__(self):
        verts = tuple(_pt(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        k = len(verts)
        if k == 0:
            raise GeometryError("core needs at least one vertex")
        if k == 2 and verts[0] == verts[1]:
            raise GeometryError("segment endpoints coincide; use a point core")
        if k >= 3:
            _check_convex_ccw(verts)

    @classmethod
    def point(cls, p) -> "ConvexCore":
        return cls((p,))

    @classmethod
    def segment(cls, a, b) -> "ConvexCore":
        """Segment core, normalised so the first endpoint is the left one (ties broken on y)."""
        a, b = _pt(a), _pt(b)
        if (b.x, b.y) < (a.x, a.y):
            a, b = b, a
        return cls((a, b))

    @classmethod
    def polygon(cls, pts) -> "ConvexCore":
        return cls(tuple(pts))

    @property
    def arity(self) -> int:
        return len(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float).reshape(-1, 2)

    def to_json(self) -> dict:
        return {"vertices": [[v.x, v.y] for v in self.vertices]}

    @classmethod
    def from_json(cls, obj) -> "ConvexCore":
        verts = obj["vertices"] if isinstance(obj, dict) else obj
        if len(verts) == 2:
            return cls.segment(*verts)
        return cls(tuple(verts))


def _check_convex_ccw(verts: Sequence[Point]) -> None:
    k = len(verts)
    total = 0.0
    for i in range(k):
        p, q, r = verts[i], verts[(i + 1) % k], verts[(i + 2) % k]
        ux, uy = q.x - p.x, q.y - p.y
        vx, vy = r.x - q.x, r.y - q.y
        lu, lv = math.hypot(ux, uy), math.hypot(vx, vy)
        if lu == 0 or lv == 0:
            raise GeometryError("repeated polygon vertex")
        cr = ux * vy - uy * vx
        if cr <= 1e-12 * lu * lv:
            raise GeometryError("polygon core must be strictly convex and counter-clockwise")
        total += math.atan2(cr, ux * vx + uy * vy)
    if abs(total - 2 * math.pi) > 1e-6:
        raise GeometryError("polygon core winds more than once")


@dataclass(frozen=True)
class BoundaryCurve:
    """One piece of an offset boundary, traversed counter-clockwise.

    Edges use ``start``/``end``; arcs use ``center``, ``radius``,
    ``start_angle`` and ``sweep`` (radians, sweep in (0, 2π]).
    """

    kind: Literal["edge", "arc"]
    index: int
    start: Point | None = None
    end: Point | None = None
    center: Point | None = None
    radius: float = 0.0
    start_angle: float = 0.0
    sweep: float = 0.0

    def length(self) -> float:
        if self.kind == "edge":
            return math.dist(self.start, self.end)
        return self.radius * self.sweep

    def point_at(self, t: float) -> Point:
        """Point at fraction ``t`` in [0, 1] along the curve."""
        if self.kind == "edge":
            return Point(self.start.x + t * (self.end.x - self.start.x),
                         self.start.y + t * (self.end.y - self.start.y))
        ang = self.start_angle + t * self.sweep
        return Point(self.center.x + self.radius * math.cos(ang),
                     self.center.y + self.radius * math.sin(ang))


@dataclass(frozen=True)
class OffsetShape:
    core: ConvexCore
    radius: float

    def __post_init__(self):
        r = float(self.radius)
        if not math.isfinite(r) or r < 0:
            raise GeometryError(f"radius must be finite and non-negative, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    def _table(self) -> ShapeTable:
        return shape_table([self])

    def boundary(self) -> list[BoundaryCurve]:
        """Edges and arcs in counter-clockwise order (edge 0, arc 0, edge 1, arc 1, ...)."""
        T = self._table()
        edges = [
            BoundaryCurve("edge", int(k), start=_pt(p0), end=_pt(p1))
            for k, p0, p1 in zip(T.e_local, T.e_p0, T.e_p1)
        ]
        arcs = [
            BoundaryCurve("arc", int(k), center=_pt(c), radius=float(r), start_angle=float(s),
                          sweep=float(w))
            for k, c, r, s, w in zip(T.a_local, T.a_center, T.a_radius, T.a_start, T.a_sweep)
        ]
        if not edges:
            return arcs
        if not arcs:
            return edges
        out = []
        for e, a in zip(edges, arcs):
            out += [e, a]
        return out

    def vertices(self) -> list[Point]:
        """Arc/edge junctions of the boundary (empty for a disk)."""
        out = []
        for c in self.boundary():
            if c.kind == "edge":
                out += [c.start, c.end]
        if self.radius == 0:
            out = list(dict.fromkeys(out))
        return out

    def perimeter(self) -> float:
        return sum(c.length() for c in self.boundary()) if self.radius > 0 else _core_perimeter(self.core)

    def bbox(self) -> tuple[float, float, float, float]:
        a = self.core.as_array()
        r = self.radius
        return (a[:, 0].min() - r, a[:, 1].min() - r, a[:, 0].max() + r, a[:, 1].max() + r)

    def to_json(self) -> dict:
        return {**self.core.to_json(), "radius": self.radius}

    @classmethod
    def from_json(cls, obj) -> "OffsetShape":
        return cls(ConvexCore.from_json(obj), obj["radius"])


def _core_perimeter(core: ConvexCore) -> float:
    v = core.vertices
    if len(v) == 1:
        return 0.0
    if len(v) == 2:
        return 2 * math.dist(v[0], v[1])
    return sum(math.dist(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))


@dataclass(frozen=True)
class CurveIntersection:
    point: Point
    curve_i: BoundaryCurve
    curve_j: BoundaryCurve
    kindpair: Literal["RR", "CR", "CC"]


def offset(core: ConvexCore, r: float) -> OffsetShape:
    """Minkowski sum of ``core`` with the disk of radius ``r``."""
    if not isinstance(core, ConvexCore):
        core = ConvexCore(tuple(core))
    return OffsetShape(core, r)


def shape_table(shapes: Sequence[OffsetShape], weights=None) -> ShapeTable:
    return ShapeTable.from_arrays([s.core.as_array() for s in shapes],
                                  [s.radius for s in shapes], weights)


def dist_point_core(q, core: ConvexCore) -> float:
    """Euclidean distance from ``q`` to the core (0 inside a polygon)."""
    table = CoreTable([core.as_array()])
    return float(table.dist(np.array([q], dtype=float), [0])[0])


def contains(shape: OffsetShape, q, mode: Literal["open", "closed"] = "closed",
             eps: float | None = None) -> bool:
    """Whether ``q`` lies in the shape.  Points within ``eps`` of the boundary are closed-only."""
    eps = eps_or_default(eps)
    d = dist_point_core(q, shape.core)
    if mode == "open":
        return d < shape.radius - eps
    if mode == "closed":
        return d <= shape.radius + eps
    raise ValueError(f"mode must be 'open' or 'closed', not {mode!r}")


def _kindpair(ki: int, kj: int) -> str:
    if ki == EDGE and kj == EDGE:
        return "RR"
    if ki == ARC and kj == ARC:
        return "CC"
    return "CR"


def boundary_intersections(s1: OffsetShape, s2: OffsetShape,
                           eps: float | None = None) -> list[CurveIntersection]:
    """Transversal crossings of the two boundaries, tagged RR / CR / CC.

    Raises :class:`DegenerateInputError` on tangency or overlapping edges.
    """
    eps = eps_or_default(eps)
    T = shape_table([s1, s2])
    X = _kernel.pair_crossings(T, [0], [1], eps, tangency="raise")
    X = _kernel.dedupe_crossings(X, 10 * eps)
    c1 = {(c.kind, c.index): c for c in s1.boundary()}
    c2 = {(c.kind, c.index): c for c in s2.boundary()}

    def curve(table_kind, idx, lookup):
        if table_kind == EDGE:
            return lookup[("edge", int(T.e_local[idx]))]
        return lookup[("arc", int(T.a_local[idx]))]

    out = []
    order = np.lexsort((X.pts[:, 1], X.pts[:, 0]))
    for k in order:
        out.append(CurveIntersection(
            _pt(X.pts[k]),
            curve(X.kind_i[k], X.idx_i[k], c1),
            curve(X.kind_j[k], X.idx_j[k], c2),
            _kindpair(X.kind_i[k], X.kind_j[k]),
        ))
    return out


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed segments p1p2 and q1q2 share at least one point."""
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def shapes_from_cores(cores: Iterable[ConvexCore], radii: Iterable[float]) -> list[OffsetShape]:
    return [OffsetShape(c, r) for c, r in zip(cores, radii)]
