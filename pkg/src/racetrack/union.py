"""Vertices of the union of offset shapes and their RR / CR / CC taxonomy."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal, Sequence

import numpy as np

from . import _kernel
from ._kernel import ARC, EDGE, DegenerateInputError, ShapeTable
from .config import eps_or_default
from .geometry import OffsetShape, Point, contains, shape_table

VertexClass = Literal["CC", "RR", "CR", "shape-vertex"]


@dataclass(frozen=True)
class UnionVertex:
    """A vertex of the union boundary.

    ``owners`` is ``(i, j)`` for a crossing of two boundaries and
    ``(i, None)`` for an arc/edge junction of shape ``i``.  ``curves`` holds
    the local ``(kind, index)`` of the incident curve on each owner, which is
    what terminal classification needs.
    """

    point: Point
    owners: tuple[int, int | None]
    cls: VertexClass
    terminal: bool | None = None
    curves: tuple = ()


@dataclass(frozen=True)
class UnionStats:
    psi: int
    cc: int
    rr: int
    rr_terminal: int
    rr_nonterminal: int
    cr: int
    shape_vertices_on_boundary: int

    def as_dict(self) -> dict:
        return asdict(self)


def _kind_name(k: int) -> str:
    return "edge" if k == EDGE else "arc"


def _classify(ki: int, kj: int) -> VertexClass:
    if ki == EDGE and kj == EDGE:
        return "RR"
    if ki == ARC and kj == ARC:
        return "CC"
    return "CR"


def union_vertex_arrays(T: ShapeTable, eps: float):
    """Raw union vertices of a packed family.

    Returns ``(crossings, junction_pts, junction_shape, junction_local)`` with
    everything covered by the open interior of a non-owner removed and
    near-coincident points merged.
    """
    I, J = T.candidate_pairs(eps)
    X = _kernel.pair_crossings(T, I, J, eps, tangency="raise")
    if len(X):
        covered = _kernel.open_hits(T, X.pts, eps, X.si, X.sj) > 0
        X = X.take(~covered)

    jp, js, jl, _ = T.junctions()
    if len(jp):
        covered = _kernel.open_hits(T, jp, eps, js, None) > 0
        keep = ~covered
        jp, js, jl = jp[keep], js[keep], jl[keep]

    # merge near-coincident points; crossings rank before junctions, then by owners
    n_x = len(X)
    pts = np.concatenate([X.pts, jp]) if len(jp) else X.pts
    if len(pts) == 0:
        return X, jp, js, jl
    labels = _kernel.cluster_labels(pts, 10 * eps)
    key_a = np.concatenate([X.si, js])
    key_b = np.concatenate([X.sj, np.full(len(js), -1)])
    key_c = np.concatenate([X.kind_i * 1_000_000 + X.idx_i, jl])
    kind = np.concatenate([np.zeros(n_x, np.int64), np.ones(len(js), np.int64)])
    _reject_multi_owner(labels, key_a, key_b, pts)
    order = np.lexsort((key_c, key_b, key_a, kind))
    keep = _kernel.first_per_cluster(labels, order)
    X = X.take(keep[keep < n_x])
    jk = keep[keep >= n_x] - n_x
    return X, jp[jk], js[jk], jl[jk]


def _reject_multi_owner(labels, owner_a, owner_b, pts):
    """Raise when one merged vertex lies on the boundaries of three or more shapes."""
    _, inv, sizes = np.unique(labels, return_inverse=True, return_counts=True)
    for c in np.flatnonzero(sizes > 1):
        m = inv.ravel() == c
        owners = set(owner_a[m].tolist()) | set(owner_b[m].tolist())
        owners.discard(-1)
        if len(owners) >= 3:
            x, y = pts[np.flatnonzero(m)[0]]
            raise DegenerateInputError(
                f"boundaries of shapes {sorted(owners)} meet at one point near ({x:.6g}, {y:.6g})")


def _rr_terminal(T: ShapeTable, X, k: int, eps: float) -> bool:
    """Endpoint test on both incident edges of RR crossing ``k``."""
    for edge, other in ((X.idx_i[k], X.sj[k]), (X.idx_j[k], X.si[k])):
        ends = np.stack([T.e_p0[edge], T.e_p1[edge]])
        d = T.dist(ends, [other, other])
        if (d <= T.radius[other] + eps).any():
            return True
    return False


def union_vertices(shapes: Sequence[OffsetShape], eps: float | None = None) -> list[UnionVertex]:
    """All vertices of the boundary of the union, sorted by (x, y, owners)."""
    eps = eps_or_default(eps)
    if not shapes:
        return []
    T = shape_table(shapes)
    X, jp, js, jl = union_vertex_arrays(T, eps)
    out = []
    for k in range(len(X)):
        cls = _classify(X.kind_i[k], X.kind_j[k])
        li = T.e_local[X.idx_i[k]] if X.kind_i[k] == EDGE else T.a_local[X.idx_i[k]]
        lj = T.e_local[X.idx_j[k]] if X.kind_j[k] == EDGE else T.a_local[X.idx_j[k]]
        out.append(UnionVertex(
            Point(float(X.pts[k, 0]), float(X.pts[k, 1])),
            (int(X.si[k]), int(X.sj[k])),
            cls,
            _rr_terminal(T, X, k, eps) if cls == "RR" else None,
            ((_kind_name(X.kind_i[k]), int(li)), (_kind_name(X.kind_j[k]), int(lj))),
        ))
    for p, s, l in zip(jp, js, jl):
        out.append(UnionVertex(Point(float(p[0]), float(p[1])), (int(s), None), "shape-vertex", None,
                               (("edge", int(l)),)))
    out.sort(key=lambda v: (v.point.x, v.point.y, v.owners[0], -1 if v.owners[1] is None else v.owners[1]))
    return out


def classify_rr_terminal(v: UnionVertex, shapes: Sequence[OffsetShape], eps: float | None = None) -> bool:
    """Whether an RR vertex is terminal.

    True when an endpoint of the edge of one owner through ``v`` lies in the
    other owner (closed); the whole stub to that endpoint is then inside by
    convexity.
    """
    if v.cls != "RR" or v.owners[1] is None:
        raise ValueError(f"terminal classification needs an RR vertex, got {v.cls}")
    eps = eps_or_default(eps)
    i, j = v.owners
    (_, ei), (_, ej) = v.curves
    for own, edge, other in ((i, ei, j), (j, ej, i)):
        curve = next(c for c in shapes[own].boundary() if c.kind == "edge" and c.index == edge)
        if contains(shapes[other], curve.start, "closed", eps) or contains(shapes[other], curve.end, "closed", eps):
            return True
    return False


def stats_from_arrays(T: ShapeTable, eps: float) -> UnionStats:
    X, jp, _, _ = union_vertex_arrays(T, eps)
    cc = rr = cr = term = 0
    for k in range(len(X)):
        cls = _classify(X.kind_i[k], X.kind_j[k])
        if cls == "RR":
            rr += 1
            term += _rr_terminal(T, X, k, eps)
        elif cls == "CC":
            cc += 1
        else:
            cr += 1
    sv = len(jp)
    return UnionStats(cc + rr + cr + sv, cc, rr, term, rr - term, cr, sv)


def union_stats(shapes: Sequence[OffsetShape], eps: float | None = None) -> UnionStats:
    eps = eps_or_default(eps)
    if not shapes:
        return UnionStats(0, 0, 0, 0, 0, 0, 0)
    return stats_from_arrays(shape_table(shapes), eps)


def pair_crossing_counts(shapes: Sequence[OffsetShape], eps: float | None = None) -> dict[tuple[int, int], int]:
    """Number of distinct boundary crossings for every intersecting pair."""
    eps = eps_or_default(eps)
    T = shape_table(shapes)
    I, J = T.candidate_pairs(eps)
    X = _kernel.pair_crossings(T, I, J, eps, tangency="raise")
    counts: dict[tuple[int, int], int] = {}
    if not len(X):
        return counts
    key = X.si * T.n + X.sj
    for pair in np.unique(key):
        m = key == pair
        labels = _kernel.cluster_labels(X.pts[m], 10 * eps)
        counts[(int(pair // T.n), int(pair % T.n))] = int(len(np.unique(labels)))
    return counts
