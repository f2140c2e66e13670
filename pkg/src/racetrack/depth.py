"""Depth in an arrangement of offset shapes.

The depth of ``q`` is the number of shapes whose open interior contains it.
:func:`max_depth` finds the deepest point exactly by scoring candidate
points (probes around boundary crossings, plus one interior point per
shape) inside a quadtree branch-and-bound, so that only cells whose depth
upper bound beats the incumbent are ever examined at full resolution.
"""
from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernel
from ._kernel import ShapeTable
from .config import TOL, eps_or_default
from .geometry import OffsetShape, Point, shape_table


@dataclass(frozen=True)
class DepthReport:
    max_depth: int
    witness: Point
    fractional: float
    size: int
    vertex_depths: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "witness": [self.witness.x, self.witness.y],
            "fractional": self.fractional,
            "size": self.size,
            "vertex_depths": {str(k): v for k, v in sorted(self.vertex_depths.items())},
        }


def depth(q, shapes: Sequence[OffsetShape], eps: float | None = None) -> int:
    """Number of shapes containing ``q`` in their open interior."""
    if not shapes:
        return 0
    eps = eps_or_default(eps)
    T = shape_table(shapes)
    return int(round(_kernel.open_hits(T, np.array([q], float), eps)[0]))


def depth_many(points, shapes: Sequence[OffsetShape] | ShapeTable, eps: float | None = None) -> np.ndarray:
    eps = eps_or_default(eps)
    T = shapes if isinstance(shapes, ShapeTable) else shape_table(shapes)
    return _kernel.open_hits(T, np.asarray(points, float).reshape(-1, 2), eps)


def _probe_offsets(n1, n2, step):
    """Four offsets putting a point at signed distance ±step from both curves."""
    det = n1[:, 0] * n2[:, 1] - n1[:, 1] * n2[:, 0]
    safe = np.where(np.abs(det) < 1e-12, 1e-12, det)
    out = []
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            b1, b2 = s1 * step, s2 * step
            x = np.stack([(n2[:, 1] * b1 - n1[:, 1] * b2) / safe, (-n2[:, 0] * b1 + n1[:, 0] * b2) / safe], axis=1)
            norm = np.hypot(x[:, 0], x[:, 1])
            cap = 50 * step
            x *= np.minimum(1.0, cap / np.maximum(norm, 1e-300))[:, None]
            out.append(x)
    return out


class _Search:
    """Quadtree branch-and-bound for the maximum weighted depth of a ShapeTable."""

    def __init__(self, T: ShapeTable, eps: float, eps_probe: float, leaf: int = 16):
        self.T = T
        self.eps = eps
        self.step = eps_probe
        self.margin = 64 * eps_probe
        self.leaf = leaf
        self.best = -1.0
        self.witness = None

    def _offer(self, value, pt):
        pt = (float(pt[0]), float(pt[1]))
        if value > self.best + 1e-9 or (abs(value - self.best) <= 1e-9 and self.witness is not None and pt < self.witness):
            self.best = float(value)
            self.witness = pt

    def _classify(self, x0, y0, size, idx, full_w):
        T = self.T
        c = np.array([x0 + size / 2, y0 + size / 2])
        h = size * math.sqrt(0.5)
        d = T.cores.dist(np.broadcast_to(c, (len(idx), 2)), T.gid[idx])
        r = T.radius[idx]
        w = T.weight[idx]
        full = d + h + 2 * self.margin <= r - self.eps
        disj = d - h - 2 * self.margin >= r
        cross = ~(full | disj)
        full_w = full_w + w[full].sum()
        inside = cross & (d < r - self.eps)
        lb = full_w + w[inside].sum()
        ub = full_w + w[cross].sum()
        self._offer(lb, c)
        return idx[cross], full_w, ub

    def _leaf(self, x0, y0, size, idx, full_w):
        T = self.T
        sub = T.subset(idx)
        lo = np.array([x0 - self.margin, y0 - self.margin])
        hi = np.array([x0 + size + self.margin, y0 + size + self.margin])
        cands = []
        if sub.n >= 2:
            I, J = np.triu_indices(sub.n, 1)
            m = sub.gid[I] != sub.gid[J]
            X = _kernel.pair_crossings(sub, I[m], J[m], self.eps, tangency="keep")
            if len(X):
                inbox = np.all((X.pts >= lo) & (X.pts <= hi), axis=1)
                X = X.take(inbox)
            if len(X):
                n1, n2 = X.normals(sub)
                for off in _probe_offsets(n1, n2, self.step):
                    cands.append(X.pts + off)
        pos = sub.radius > self.step
        if pos.any():
            low = sub.lowest_points()[pos] + np.array([0.0, self.step])
            core_v = T.cores.V[sub.gid[pos], 0]
            cands += [low, core_v]
        if not cands:
            return
        P = np.concatenate(cands)
        P = P[np.all((P >= lo) & (P <= hi), axis=1)]
        if not len(P):
            return
        vals = full_w + _kernel.open_hits(sub, P, self.eps)
        top = vals.max()
        if top < self.best - 1e-9:
            return
        ties = np.flatnonzero(vals >= top - 1e-9)
        k = ties[np.lexsort((P[ties, 1], P[ties, 0]))[0]]
        self._offer(top, P[k])

    def run(self):
        T = self.T
        lo = T.lo.min(0)
        hi = T.hi.max(0)
        size = float(max(hi - lo)) * (1 + 1e-9) + 4 * self.margin
        x0, y0 = lo - 2 * self.margin
        min_size = 8 * self.margin
        idx, full_w, ub = self._classify(x0, y0, size, np.arange(T.n), 0.0)
        heap = [(-ub, 0, x0, y0, size, idx, full_w)]
        seq = 1
        while heap:
            neg_ub, _, x0, y0, size, idx, full_w = heapq.heappop(heap)
            if -neg_ub <= self.best + 1e-9:
                break
            if len(idx) <= self.leaf or size <= min_size:
                self._leaf(x0, y0, size, idx, full_w)
                continue
            half = size / 2
            for cx, cy in ((x0, y0), (x0 + half, y0), (x0, y0 + half), (x0 + half, y0 + half)):
                cidx, cfull, cub = self._classify(cx, cy, half, idx, full_w)
                if cub > self.best + 1e-9:
                    heapq.heappush(heap, (-cub, seq, cx, cy, half, cidx, cfull))
                    seq += 1
        return self.best, self.witness


def max_depth_table(T: ShapeTable, eps: float | None = None, eps_probe: float | None = None,
                    leaf: int = 16) -> tuple[float, Point]:
    """Maximum weighted depth of a packed family and a point attaining it."""
    eps = eps_or_default(eps)
    eps_probe = TOL.eps_probe if eps_probe is None else eps_probe
    if T.n == 0:
        raise ValueError("max depth of an empty family is undefined")
    best, wit = _Search(T, eps, eps_probe, leaf).run()
    # confirm against the whole family; the search only ever scores locally
    exact = float(_kernel.open_hits(T, np.array([wit]), eps)[0])
    return exact, Point(*wit)


def arrangement_vertices(T: ShapeTable, eps: float):
    """All pairwise boundary crossings (tangencies kept), merged within 10*eps."""
    I, J = T.candidate_pairs(eps)
    X = _kernel.pair_crossings(T, I, J, eps, tangency="keep")
    return _kernel.dedupe_crossings(X, 10 * eps)


def vertex_depths(T: ShapeTable, eps: float) -> np.ndarray:
    """Depth of every arrangement vertex, not counting its two owners."""
    X = arrangement_vertices(T, eps)
    return _kernel.open_hits(T, X.pts, eps, X.si, X.sj)


def max_depth(shapes: Sequence[OffsetShape], eps: float | None = None, histogram: bool = True) -> DepthReport:
    if not shapes:
        raise ValueError("max depth of an empty family is undefined")
    eps = eps_or_default(eps)
    T = shape_table(shapes)
    best, wit = max_depth_table(T, eps)
    # prefer a core vertex when one attains the maximum: stable, readable witnesses
    anchors = T.cores.V[T.gid, 0]
    at = _kernel.open_hits(T, anchors, eps)
    hit = np.flatnonzero(at >= best - 1e-9)
    if len(hit):
        k = hit[np.lexsort((anchors[hit, 1], anchors[hit, 0]))[0]]
        wit = Point(float(anchors[k, 0]), float(anchors[k, 1]))
    hist = {}
    if histogram:
        hist = dict(sorted(Counter(int(round(v)) for v in vertex_depths(T, eps)).items()))
    best = int(round(best))
    return DepthReport(best, wit, best / len(shapes), len(shapes), hist)


def shallow_vertex_count(shapes: Sequence[OffsetShape], k: int, eps: float | None = None) -> int:
    """Arrangement vertices covered by at most ``k`` shapes other than their owners."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if len(shapes) < 2:
        return 0
    eps = eps_or_default(eps)
    return int((vertex_depths(shape_table(shapes), eps) <= k + 1e-9).sum())
