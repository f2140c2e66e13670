"""Brute-force reference implementations used only by the tests.

Nothing here imports the package's geometry kernel: boundaries are rebuilt
from support points and normal cones, and crossings are found by dense
sampling plus bisection.
"""
from __future__ import annotations

import math

import numpy as np


def point_core_dist(P, core):
    """Distance from points P (k, 2) to a point / segment / convex CCW polygon."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    V = np.asarray(core, dtype=float).reshape(-1, 2)
    if len(V) == 1:
        return np.hypot(*(P - V[0]).T)
    edges = [(V[k], V[(k + 1) % len(V)]) for k in range(len(V) if len(V) > 2 else 1)]
    best = np.full(len(P), np.inf)
    for a, b in edges:
        d = b - a
        t = np.clip(((P - a) @ d) / (d @ d), 0, 1)
        best = np.minimum(best, np.hypot(*(P - a - t[:, None] * d).T))
    if len(V) >= 3:
        inside = np.ones(len(P), bool)
        for a, b in edges:
            d = b - a
            inside &= d[0] * (P[:, 1] - a[1]) - d[1] * (P[:, 0] - a[0]) >= 0
        best[inside] = 0.0
    return best


class Boundary:
    """Arc-length parametrised boundary of core + disk(r), built from normal cones."""

    def __init__(self, core, r):
        V = np.asarray(core, dtype=float).reshape(-1, 2)
        self.r = float(r)
        k = len(V)
        pieces = []  # ("arc", center, theta0, sweep) or ("edge", p, q)
        if k == 1:
            pieces.append(("arc", V[0], 0.0, 2 * math.pi))
        else:
            ring = [V[0], V[1]] if k == 2 else list(V)
            m = len(ring)
            normals = []
            for i in range(m):
                a, b = ring[i], ring[(i + 1) % m]
                d = b - a
                normals.append(math.atan2(-d[0], d[1]))  # outward (right-hand) normal angle
            for i in range(m):
                a, b = ring[i], ring[(i + 1) % m]
                nrm = np.array([math.cos(normals[i]), math.sin(normals[i])])
                pieces.append(("edge", a + self.r * nrm, b + self.r * nrm))
                t0 = normals[i]
                t1 = normals[(i + 1) % m]
                sweep = (t1 - t0) % (2 * math.pi)
                if k == 2:
                    sweep = math.pi
                pieces.append(("arc", b, t0, sweep))
        self.pieces = pieces
        lens = []
        for p in pieces:
            lens.append(np.hypot(*(p[2] - p[1])) if p[0] == "edge" else self.r * p[3])
        self.lengths = np.array(lens)
        self.cum = np.concatenate([[0.0], np.cumsum(self.lengths)])
        self.total = float(self.cum[-1])

    def at(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.total) if self.total > 0 else np.zeros_like(t)
        idx = np.clip(np.searchsorted(self.cum, t, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty((len(t), 2))
        for k, p in enumerate(self.pieces):
            m = idx == k
            if not m.any():
                continue
            s = (t[m] - self.cum[k]) / max(self.lengths[k], 1e-300)
            if p[0] == "edge":
                out[m] = p[1] + s[:, None] * (p[2] - p[1])
            else:
                ang = p[2] + s * p[3]
                out[m] = p[1] + self.r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return out

    def junctions(self):
        pts = []
        for p in self.pieces:
            if p[0] == "edge":
                pts += [p[1], p[2]]
        return np.array(pts).reshape(-1, 2)


def _merge(points, tol):
    out = []
    for p in points:
        if all(math.dist(p, q) > tol for q in out):
            out.append(p)
    return out


def union_vertices_sampled(cores, radii, samples=100_000, eps=1e-9):
    """Union boundary vertices by walking every boundary and bisecting sign changes."""
    n = len(cores)
    bnds = [Boundary(c, r) for c, r in zip(cores, radii)]
    found = []
    for i in range(n):
        b = bnds[i]
        if b.total == 0:
            continue
        t = np.linspace(0, b.total, samples, endpoint=False)
        P = b.at(t)
        for j in range(n):
            if j == i:
                continue
            f = point_core_dist(P, cores[j]) - radii[j]
            s = np.sign(f)
            flips = np.flatnonzero(s != np.roll(s, -1))
            for k in flips:
                lo, hi = t[k], t[k] + b.total / samples
                flo = f[k]
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    fm = point_core_dist(b.at(np.array([mid])), cores[j])[0] - radii[j]
                    if np.sign(fm) == np.sign(flo):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                    if hi - lo < 1e-15:
                        break
                found.append(b.at(np.array([0.5 * (lo + hi)]))[0])
        found += list(b.junctions())
    kept = []
    for p in found:
        d = np.array([point_core_dist(p[None], cores[k])[0] for k in range(n)])
        on_or_out = d >= np.asarray(radii) - eps
        if on_or_out.all():
            kept.append(p)
    return np.array(_merge(kept, 1e-7)).reshape(-1, 2)


def match_points(A, B, tol):
    """True when A and B have equal size and can be paired within tol (greedy nearest)."""
    A = np.asarray(A).reshape(-1, 2)
    B = np.asarray(B).reshape(-1, 2)
    if len(A) != len(B):
        return False
    used = np.zeros(len(B), bool)
    for p in A:
        d = np.hypot(*(B - p).T)
        d[used] = np.inf
        k = int(np.argmin(d))
        if d[k] > tol:
            return False
        used[k] = True
    return True


def grid_depth_max(cores, radii, lo, hi, res, weights=None):
    """Max open-containment depth over a res x res grid of [lo, hi]^2."""
    xs = np.linspace(lo[0], hi[0], res)
    ys = np.linspace(lo[1], hi[1], res)
    G = np.stack(np.meshgrid(xs, ys), -1).reshape(-1, 2)
    w = np.ones(len(cores)) if weights is None else np.asarray(weights, float)
    total = np.zeros(len(G))
    for c, r, wt in zip(cores, radii, w):
        total += wt * (point_core_dist(G, c) < r)
    k = int(np.argmax(total))
    return total[k], G[k]


def seg_intersect_exact(p1, p2, q1, q2):
    """Closed segment intersection solved in rational arithmetic."""
    from fractions import Fraction as F

    p1, p2, q1, q2 = ([F(v) for v in p] for p in (p1, p2, q1, q2))
    d = [p2[0] - p1[0], p2[1] - p1[1]]
    e = [q2[0] - q1[0], q2[1] - q1[1]]
    w = [q1[0] - p1[0], q1[1] - p1[1]]
    den = d[0] * e[1] - d[1] * e[0]
    if den != 0:
        t = (w[0] * e[1] - w[1] * e[0]) / den
        u = (w[0] * d[1] - w[1] * d[0]) / den
        return 0 <= t <= 1 and 0 <= u <= 1
    if w[0] * d[1] - w[1] * d[0] != 0:
        return False  # parallel, different lines
    dd = d[0] * d[0] + d[1] * d[1]
    s0 = (w[0] * d[0] + w[1] * d[1]) / dd
    s1 = ((q2[0] - p1[0]) * d[0] + (q2[1] - p1[1]) * d[1]) / dd
    return max(s0, s1) >= 0 and min(s0, s1) <= 1


def polygons_separated(P, Q):
    """Separating-axis test on convex polygons, written independently of the generators."""
    for poly in (P, Q):
        poly = np.asarray(poly)
        for k in range(len(poly)):
            e = poly[(k + 1) % len(poly)] - poly[k]
            axis = np.array([-e[1], e[0]])
            a = np.asarray(P) @ axis
            b = np.asarray(Q) @ axis
            if a.max() < b.min() or b.max() < a.min():
                return True
    return False
