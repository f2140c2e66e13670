"""Vectorised kernels behind the public geometry API.

A family of offset shapes is stored as two tables.  :class:`CoreTable` holds
the convex cores (padded to a common arity) and everything about them that
does not depend on the offset radius: edge normals, arc angles, lowest
vertex.  :class:`ShapeTable` pairs core ids with radii and expands the
boundary of every shape into flat edge and arc arrays.  Several shapes may
share a core, which is how the nested racetrack families of the
vulnerability code are represented without copying segments.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

TWO_PI = 2.0 * np.pi

EDGE = 0
ARC = 1


class DegenerateInputError(ValueError):
    """Boundaries are tangent or overlap; perturb the input and retry."""


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


class CoreTable:
    """Padded arrays for a list of convex cores given as ``(k, 2)`` vertex arrays.

    Polygons must be counter-clockwise.  Arity 1 is a point, arity 2 a
    segment; for arity 2 the "polygon" ``[a, b]`` has the two edges
    ``a -> b`` and ``b -> a`` with opposite outward normals, which makes the
    racetrack boundary fall out of the polygon formulas unchanged.
    """

    def __init__(self, cores):
        cores = [np.asarray(c, dtype=float).reshape(-1, 2) for c in cores]
        self.n = n = len(cores)
        self.arity = arity = np.array([len(c) for c in cores], dtype=np.int64)
        self.S = S = int(arity.max()) if n else 1
        V = np.empty((n, S, 2))
        for i, c in enumerate(cores):
            V[i, : len(c)] = c
            V[i, len(c):] = c[0]
        self.V = V
        k = np.arange(S)
        nxt = (k[None, :] + 1) % np.maximum(arity[:, None], 1)
        pad = k[None, :] >= arity[:, None]
        nxt = np.where(pad, nxt[:, :1], nxt)
        cur = np.where(pad, 0, k[None, :])
        rows = np.arange(n)[:, None]
        self.E0 = V[rows, cur]
        self.E1 = V[rows, nxt]
        self.next_index = nxt
        d = self.E1 - self.E0
        length = np.hypot(d[..., 0], d[..., 1])
        safe = np.where(length > 0, length, 1.0)
        self.normal = np.stack([d[..., 1] / safe, -d[..., 0] / safe], axis=-1)
        self.normal[length == 0] = 0.0
        self.is_poly = arity >= 3
        ang = np.arctan2(self.normal[..., 1], self.normal[..., 0])
        ang_next = np.take_along_axis(ang, nxt, axis=1)
        self.arc_start = ang
        self.arc_sweep = np.mod(ang_next - ang, TWO_PI)
        two = arity == 2
        self.arc_sweep[two, :2] = np.pi
        one = arity == 1
        self.arc_start[one, 0] = 0.0
        self.arc_sweep[one, 0] = TWO_PI
        masked_y = np.where(pad, np.inf, V[..., 1])
        self.lowest = np.argmin(masked_y, axis=1)
        valid = ~pad
        self.lo = np.stack(
            [np.where(valid, V[..., 0], np.inf).min(1), np.where(valid, V[..., 1], np.inf).min(1)], axis=1
        )
        self.hi = np.stack(
            [np.where(valid, V[..., 0], -np.inf).max(1), np.where(valid, V[..., 1], -np.inf).max(1)], axis=1
        )

    def dist(self, P, gids):
        """Elementwise distance from ``P[k]`` to core ``gids[k]``."""
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        gids = np.asarray(gids, dtype=np.int64)
        a = self.E0[gids]
        d = self.E1[gids] - a
        w = P[:, None, :] - a
        L2 = (d * d).sum(-1)
        t = np.where(L2 > 0, (w * d).sum(-1) / np.where(L2 > 0, L2, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        diff = w - t[..., None] * d
        dist = np.sqrt((diff * diff).sum(-1).min(axis=1))
        poly = self.is_poly[gids]
        if poly.any():
            inside = poly & np.all(_cross(d, w) >= 0.0, axis=1)
            dist[inside] = 0.0
        return dist

    def dist_matrix(self, P, gids=None):
        """Distances from every point in ``P`` to every core in ``gids``, shape (len(P), len(gids))."""
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        gids = np.arange(self.n) if gids is None else np.asarray(gids, dtype=np.int64)
        pi = np.repeat(np.arange(len(P)), len(gids))
        gi = np.tile(gids, len(P))
        return self.dist(P[pi], gi).reshape(len(P), len(gids))


class ShapeTable:
    """Offset shapes ``core[gid[i]] + disk(radius[i])`` with expanded boundaries."""

    def __init__(self, cores: CoreTable, gid, radius, weight=None):
        self.cores = cores
        self.gid = gid = np.asarray(gid, dtype=np.int64)
        self.radius = r = np.asarray(radius, dtype=float)
        self.n = n = len(gid)
        self.weight = np.ones(n) if weight is None else np.asarray(weight, dtype=float)
        S = cores.S
        k = np.arange(S)[None, :]
        ar = cores.arity[gid][:, None]
        rows = gid[:, None]

        emask = (k < ar) & (ar >= 2)
        nrm = cores.normal[gid]
        p0 = cores.E0[gid] + r[:, None, None] * nrm
        p1 = cores.E1[gid] + r[:, None, None] * nrm
        self.e_p0 = p0[emask]
        self.e_p1 = p1[emask]
        self.e_normal = nrm[emask]
        self.e_shape = np.broadcast_to(np.arange(n)[:, None], emask.shape)[emask]
        self.e_local = np.broadcast_to(k, emask.shape)[emask]
        self.e_count = emask.sum(1)
        self.e_start = np.concatenate([[0], np.cumsum(self.e_count)[:-1]]).astype(np.int64)

        amask = (k < ar) & (r[:, None] > 0)
        centers = np.where(
            (ar == 1)[..., None], cores.V[gid][:, :1, :], cores.V[rows, cores.next_index[gid]]
        )
        self.a_center = np.broadcast_to(centers, (n, S, 2))[amask]
        self.a_radius = np.broadcast_to(r[:, None], amask.shape)[amask]
        self.a_start = cores.arc_start[gid][amask]
        self.a_sweep = cores.arc_sweep[gid][amask]
        self.a_shape = np.broadcast_to(np.arange(n)[:, None], amask.shape)[amask]
        self.a_local = np.broadcast_to(k, amask.shape)[amask]
        self.a_count = amask.sum(1)
        self.a_start_idx = np.concatenate([[0], np.cumsum(self.a_count)[:-1]]).astype(np.int64)

        self.lo = cores.lo[gid] - r[:, None]
        self.hi = cores.hi[gid] + r[:, None]

    @classmethod
    def from_arrays(cls, cores_list, radii, weight=None):
        return cls(CoreTable(cores_list), np.arange(len(cores_list)), radii, weight)

    def subset(self, idx):
        return ShapeTable(self.cores, self.gid[idx], self.radius[idx], self.weight[idx])

    def dist(self, P, shapes):
        return self.cores.dist(P, self.gid[np.asarray(shapes, dtype=np.int64)])

    def junctions(self):
        """Arc/edge junction points as (points, shape index, local edge index, end flag)."""
        pts = np.concatenate([self.e_p0, self.e_p1])
        shape = np.concatenate([self.e_shape, self.e_shape])
        local = np.concatenate([self.e_local, self.e_local])
        end = np.concatenate([np.zeros(len(self.e_p0), bool), np.ones(len(self.e_p1), bool)])
        return pts, shape, local, end

    def lowest_points(self):
        v = self.cores.V[self.gid, self.cores.lowest[self.gid]]
        return v - np.stack([np.zeros(self.n), self.radius], axis=1)

    def candidate_pairs(self, eps):
        """Index pairs i < j whose bounding boxes overlap (sort-and-sweep on x)."""
        if self.n < 2:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        order = np.argsort(self.lo[:, 0], kind="stable")
        lo = self.lo[order]
        hi = self.hi[order]
        # for each box, how many later boxes start before it ends
        ends = np.searchsorted(lo[:, 0], hi[:, 0] + eps, side="right")
        counts = ends - np.arange(self.n) - 1
        counts = np.maximum(counts, 0)
        a = np.repeat(np.arange(self.n), counts)
        off = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        b = a + 1 + off
        keep = (lo[b, 1] <= hi[a, 1] + eps) & (lo[a, 1] <= hi[b, 1] + eps)
        i = order[a[keep]]
        j = order[b[keep]]
        swap = i > j
        i2 = np.where(swap, j, i)
        j2 = np.where(swap, i, j)
        srt = np.lexsort((j2, i2))
        return i2[srt], j2[srt]


def _expand(I, J, cnt_i, start_i, cnt_j, start_j):
    c = cnt_i[I] * cnt_j[J]
    total = int(c.sum())
    pair = np.repeat(np.arange(len(I)), c)
    within = np.arange(total) - np.repeat(np.cumsum(c) - c, c)
    cj = cnt_j[J][pair]
    gi = start_i[I][pair] + within // np.maximum(cj, 1)
    gj = start_j[J][pair] + within % np.maximum(cj, 1)
    return pair, gi, gj


def _on_arc(pts, centers, radii, start, sweep, eps):
    ang = np.arctan2(pts[:, 1] - centers[:, 1], pts[:, 0] - centers[:, 0])
    rel = np.mod(ang - start, TWO_PI)
    tol = eps / np.maximum(radii, 1e-300)
    return (rel <= sweep + tol) | (rel >= TWO_PI - tol)


def _edge_edge(T, pair, gi, gj, eps, tangency):
    p = T.e_p0[gi]
    d = T.e_p1[gi] - p
    q = T.e_p0[gj]
    e = T.e_p1[gj] - q
    den = _cross(d, e)
    qp = q - p
    ld = np.hypot(d[:, 0], d[:, 1])
    le = np.hypot(e[:, 0], e[:, 1])
    par = np.abs(den) <= 1e-13 * ld * le
    if tangency == "raise" and par.any():
        off = np.abs(_cross(qp, d)) / np.maximum(ld, 1e-300)
        col = par & (off <= eps)
        if col.any():
            s0 = (qp * d).sum(1) / np.maximum(ld * ld, 1e-300)
            s1 = ((q + e - p) * d).sum(1) / np.maximum(ld * ld, 1e-300)
            overlap = col & (np.maximum(s0, s1) >= 0) & (np.minimum(s0, s1) <= 1)
            if overlap.any():
                k = int(np.flatnonzero(overlap)[0])
                raise DegenerateInputError(
                    f"collinear overlapping edges between shapes {T.e_shape[gi[k]]} and {T.e_shape[gj[k]]}"
                )
    safe = np.where(par, 1.0, den)
    t = _cross(qp, e) / safe
    u = _cross(qp, d) / safe
    tt = eps / np.maximum(ld, 1e-300)
    tu = eps / np.maximum(le, 1e-300)
    ok = ~par & (t >= -tt) & (t <= 1 + tt) & (u >= -tu) & (u <= 1 + tu)
    pts = p[ok] + t[ok, None] * d[ok]
    n = int(ok.sum())
    return pts, pair[ok], gi[ok], gj[ok], np.zeros(n, bool)


def _edge_arc(T, pair, ei, aj, eps, tangency):
    """Intersections of edges ``ei`` with arcs ``aj``; returns parallel arrays."""
    p = T.e_p0[ei]
    d = T.e_p1[ei] - p
    L = np.hypot(d[:, 0], d[:, 1])
    dn = d / np.maximum(L, 1e-300)[:, None]
    c = T.a_center[aj]
    R = T.a_radius[aj]
    t0 = ((c - p) * dn).sum(1)
    foot = p + t0[:, None] * dn
    hv = c - foot
    h = np.hypot(hv[:, 0], hv[:, 1])
    near = h <= R + eps
    tangent = near & (np.abs(h - R) <= eps)
    w = np.sqrt(np.maximum(R * R - h * h, 0.0))
    out_pts, out_pair, out_e, out_a, out_tan = [], [], [], [], []
    for sgn in (-1.0, 1.0):
        s = t0 + sgn * w
        pt = foot + (sgn * w)[:, None] * dn
        ok = near & ~tangent & (s >= -eps) & (s <= L + eps)
        ok &= _on_arc(pt, c, R, T.a_start[aj], T.a_sweep[aj], eps)
        out_pts.append(pt[ok]); out_pair.append(pair[ok]); out_e.append(ei[ok]); out_a.append(aj[ok])
        out_tan.append(np.zeros(int(ok.sum()), bool))
    tan_ok = tangent & (t0 >= -eps) & (t0 <= L + eps)
    if tan_ok.any():
        tan_ok &= _on_arc(foot, c, R, T.a_start[aj], T.a_sweep[aj], eps)
    if tan_ok.any():
        if tangency == "raise":
            k = int(np.flatnonzero(tan_ok)[0])
            raise DegenerateInputError(
                f"edge of shape {T.e_shape[ei[k]]} tangent to arc of shape {T.a_shape[aj[k]]}"
            )
        if tangency == "keep":
            out_pts.append(foot[tan_ok]); out_pair.append(pair[tan_ok]); out_e.append(ei[tan_ok])
            out_a.append(aj[tan_ok]); out_tan.append(np.ones(int(tan_ok.sum()), bool))
    return (np.concatenate(out_pts), np.concatenate(out_pair), np.concatenate(out_e),
            np.concatenate(out_a), np.concatenate(out_tan))


def _arc_arc(T, pair, ai, aj, eps, tangency):
    c1 = T.a_center[ai]
    r1 = T.a_radius[ai]
    c2 = T.a_center[aj]
    r2 = T.a_radius[aj]
    dv = c2 - c1
    D = np.hypot(dv[:, 0], dv[:, 1])
    conc = D <= eps
    if tangency == "raise" and conc.any():
        same = conc & (np.abs(r1 - r2) <= eps)
        if same.any():
            k = int(np.flatnonzero(same)[0])
            raise DegenerateInputError(
                f"coincident arcs between shapes {T.a_shape[ai[k]]} and {T.a_shape[aj[k]]}"
            )
    Ds = np.where(conc, 1.0, D)
    u = dv / Ds[:, None]
    uperp = np.stack([-u[:, 1], u[:, 0]], axis=1)
    ext = np.abs(D - (r1 + r2)) <= eps
    inn = np.abs(D - np.abs(r1 - r2)) <= eps
    tangent = ~conc & (ext | inn)
    meets = ~conc & (D <= r1 + r2 + eps) & (D >= np.abs(r1 - r2) - eps)
    a = (D * D + r1 * r1 - r2 * r2) / (2 * Ds)
    hh = np.sqrt(np.maximum(r1 * r1 - a * a, 0.0))
    base = c1 + a[:, None] * u
    out_pts, out_pair, out_i, out_j, out_tan = [], [], [], [], []
    for sgn in (-1.0, 1.0):
        pt = base + (sgn * hh)[:, None] * uperp
        ok = meets & ~tangent
        ok &= _on_arc(pt, c1, r1, T.a_start[ai], T.a_sweep[ai], eps)
        ok &= _on_arc(pt, c2, r2, T.a_start[aj], T.a_sweep[aj], eps)
        out_pts.append(pt[ok]); out_pair.append(pair[ok]); out_i.append(ai[ok]); out_j.append(aj[ok])
        out_tan.append(np.zeros(int(ok.sum()), bool))
    if tangent.any():
        # external tangency: point along +u from c1; internal: away from the bigger circle's centre
        direction = np.where(ext | (r1 >= r2), 1.0, -1.0)
        tp = c1 + (direction * r1)[:, None] * u
        tan_ok = tangent & _on_arc(tp, c1, r1, T.a_start[ai], T.a_sweep[ai], eps)
        tan_ok &= _on_arc(tp, c2, r2, T.a_start[aj], T.a_sweep[aj], eps)
        if tan_ok.any():
            if tangency == "raise":
                k = int(np.flatnonzero(tan_ok)[0])
                raise DegenerateInputError(
                    f"arcs of shapes {T.a_shape[ai[k]]} and {T.a_shape[aj[k]]} are tangent"
                )
            if tangency == "keep":
                out_pts.append(tp[tan_ok]); out_pair.append(pair[tan_ok]); out_i.append(ai[tan_ok])
                out_j.append(aj[tan_ok]); out_tan.append(np.ones(int(tan_ok.sum()), bool))
    return (np.concatenate(out_pts), np.concatenate(out_pair), np.concatenate(out_i),
            np.concatenate(out_j), np.concatenate(out_tan))


class Crossings:
    """Flat record of boundary intersection points between shape pairs."""

    def __init__(self, pts, si, sj, kind_i, idx_i, kind_j, idx_j, tangent):
        self.pts = pts
        self.si = si
        self.sj = sj
        self.kind_i = kind_i
        self.idx_i = idx_i
        self.kind_j = kind_j
        self.idx_j = idx_j
        self.tangent = tangent

    def __len__(self):
        return len(self.pts)

    def take(self, mask):
        return Crossings(*(a[mask] for a in (self.pts, self.si, self.sj, self.kind_i, self.idx_i,
                                             self.kind_j, self.idx_j, self.tangent)))

    def normals(self, T):
        """Outward unit normals of the two incident curves at each point."""
        def side(kind, idx):
            out = np.empty((len(kind), 2))
            e = kind == EDGE
            out[e] = T.e_normal[idx[e]]
            a = ~e
            v = self.pts[a] - T.a_center[idx[a]]
            out[a] = v / np.maximum(np.hypot(v[:, 0], v[:, 1]), 1e-300)[:, None]
            return out
        return side(self.kind_i, self.idx_i), side(self.kind_j, self.idx_j)


def pair_crossings(T: ShapeTable, I, J, eps, tangency="raise") -> Crossings:
    """All boundary intersection points for shape pairs ``(I[k], J[k])``.

    ``tangency`` is ``"raise"`` (DegenerateInputError), ``"keep"`` (report the
    touching point once) or ``"ignore"``.  Points where a crossing hits an
    arc/edge junction are reported once per incident curve; callers dedupe.
    """
    I = np.asarray(I, dtype=np.int64)
    J = np.asarray(J, dtype=np.int64)
    parts = []
    pair, gi, gj = _expand(I, J, T.e_count, T.e_start, T.e_count, T.e_start)
    if len(pair):
        pts, pr, a, b, tan = _edge_edge(T, pair, gi, gj, eps, tangency)
        parts.append((pts, pr, np.full(len(pr), EDGE), a, np.full(len(pr), EDGE), b, tan))
    pair, gi, gj = _expand(I, J, T.e_count, T.e_start, T.a_count, T.a_start_idx)
    if len(pair):
        pts, pr, a, b, tan = _edge_arc(T, pair, gi, gj, eps, tangency)
        parts.append((pts, pr, np.full(len(pr), EDGE), a, np.full(len(pr), ARC), b, tan))
    pair, gi, gj = _expand(J, I, T.e_count, T.e_start, T.a_count, T.a_start_idx)
    if len(pair):
        pts, pr, a, b, tan = _edge_arc(T, pair, gi, gj, eps, tangency)
        parts.append((pts, pr, np.full(len(pr), ARC), b, np.full(len(pr), EDGE), a, tan))
    pair, gi, gj = _expand(I, J, T.a_count, T.a_start_idx, T.a_count, T.a_start_idx)
    if len(pair):
        pts, pr, a, b, tan = _arc_arc(T, pair, gi, gj, eps, tangency)
        parts.append((pts, pr, np.full(len(pr), ARC), a, np.full(len(pr), ARC), b, tan))
    if not parts:
        z = np.empty(0, np.int64)
        return Crossings(np.empty((0, 2)), z, z, z, z, z, z, np.empty(0, bool))
    pts, pr, ki, ii, kj, ij, tan = (np.concatenate(x) for x in zip(*parts))
    return Crossings(pts.reshape(-1, 2), I[pr], J[pr], ki, ii, kj, ij, tan)


def cluster_labels(pts, radius):
    """Connected components of the "closer than ``radius``" graph on points."""
    n = len(pts)
    if n == 0:
        return np.empty(0, np.int64)
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(n)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return connected_components(g, directed=False)[1]


def first_per_cluster(labels, order):
    """Index of the first element (in ``order``) of every cluster."""
    ranked = labels[order]
    _, first = np.unique(ranked, return_index=True)
    return np.sort(order[first])


def dedupe_crossings(X: Crossings, radius) -> Crossings:
    """Merge points closer than ``radius``; the lexicographically smallest owner pair wins."""
    if len(X) == 0:
        return X
    labels = cluster_labels(X.pts, radius)
    order = np.lexsort((X.idx_j, X.idx_i, X.kind_j, X.kind_i, X.sj, X.si))
    return X.take(first_per_cluster(labels, order))


def _bbox_pairs(T: ShapeTable, P, lo, hi, strict):
    m = (P[:, None, 0] >= lo[None, :, 0]) & (P[:, None, 0] <= hi[None, :, 0])
    m &= (P[:, None, 1] >= lo[None, :, 1]) & (P[:, None, 1] <= hi[None, :, 1])
    return m


def open_hits(T: ShapeTable, pts, eps, exclude_i=None, exclude_j=None, chunk=4096):
    """Weighted count of shapes whose open interior contains each point.

    ``exclude_i`` / ``exclude_j`` name up to two owner shapes per point that
    are skipped (use -1 for none).
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    out = np.zeros(len(pts))
    if T.n == 0 or len(pts) == 0:
        return out
    step = max(1, chunk * 256 // max(T.n, 1))
    for c0 in range(0, len(pts), step):
        P = pts[c0:c0 + step]
        m = _bbox_pairs(T, P, T.lo, T.hi, True)
        rows = np.arange(len(P))
        if exclude_i is not None:
            ei = np.asarray(exclude_i[c0:c0 + step])
            ok = ei >= 0
            m[rows[ok], ei[ok]] = False
        if exclude_j is not None:
            ej = np.asarray(exclude_j[c0:c0 + step])
            ok = ej >= 0
            m[rows[ok], ej[ok]] = False
        pi, sk = np.nonzero(m)
        if len(pi) == 0:
            continue
        d = T.dist(P[pi], sk)
        hit = d < T.radius[sk] - eps
        out[c0:c0 + step] += np.bincount(pi[hit], weights=T.weight[sk[hit]], minlength=len(P))
    return out
