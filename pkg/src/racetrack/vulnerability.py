"""Most vulnerable location of a segment network under a distance-based
failure probability.

The failure function is turned into ``m - 1`` nested racetrack radii per
segment.  The deepest point of that implicit family, or of a random sample of
it, is an approximately most vulnerable location.  Samples are kept as
multiplicities over the ``(segment, radius)`` grid, so a racetrack drawn twice
simply counts twice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._kernel import CoreTable, ShapeTable
from .config import TOL
from .depth import max_depth_table
from .geometry import ConvexCore, OffsetShape, Point, Segment
from .models import Instance


class FailureFunctionError(ValueError):
    """phi is not a valid non-increasing failure function."""


_INV_LIMIT = 1e12


@dataclass(frozen=True)
class FailureFunction:
    """A non-increasing ``phi`` with ``phi(0) = 1`` and ``phi(inf) = 0``.

    Built-ins have exact inverses.  ``custom`` ones fall back to bisection
    for the generalized inverse ``inf{x >= 0 : phi(x) <= y}``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    fn: Callable | None = field(default=None, compare=False, repr=False)
    inverse: Callable | None = field(default=None, compare=False, repr=False)

    @classmethod
    def linear(cls, scale: float = 1.0) -> "FailureFunction":
        """phi(x) = max(1 - x/scale, 0)."""
        if not scale > 0:
            raise FailureFunctionError("scale must be positive")
        return cls("linear", {"scale": float(scale)})

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "FailureFunction":
        if not rate > 0:
            raise FailureFunctionError("rate must be positive")
        return cls("exponential", {"rate": float(rate)})

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "FailureFunction":
        if not sigma > 0:
            raise FailureFunctionError("sigma must be positive")
        return cls("gaussian", {"sigma": float(sigma)})

    @classmethod
    def table(cls, xs: Sequence[float], ys: Sequence[float], interp: str = "step") -> "FailureFunction":
        """Tabulated phi.  ``xs`` starts at 0, ``ys`` starts at 1, ends at 0 and never increases.

        ``step`` holds ``ys[k]`` on ``[xs[k], xs[k+1])``; ``linear`` interpolates.
        """
        xs = [float(v) for v in xs]
        ys = [float(v) for v in ys]
        if interp not in ("step", "linear"):
            raise FailureFunctionError(f"unknown interpolation {interp!r}")
        if len(xs) != len(ys) or len(xs) < 2:
            raise FailureFunctionError("table needs matching xs, ys of length >= 2")
        if xs[0] != 0 or ys[0] != 1 or ys[-1] != 0:
            raise FailureFunctionError("table must start at (0, 1) and end at y = 0")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise FailureFunctionError("table xs must be strictly increasing")
        if any(b > a for a, b in zip(ys, ys[1:])):
            raise FailureFunctionError("table ys must be non-increasing")
        return cls("table", {"xs": xs, "ys": ys, "interp": interp})

    @classmethod
    def custom(cls, fn: Callable[[float], float], inverse: Callable[[float], float] | None = None,
               name: str = "custom") -> "FailureFunction":
        return cls("custom", {"name": name}, fn, inverse)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "linear":
            return np.maximum(1.0 - x / p["scale"], 0.0)
        if self.kind == "exponential":
            return np.exp(-p["rate"] * x)
        if self.kind == "gaussian":
            return np.exp(-0.5 * (x / p["sigma"]) ** 2)
        if self.kind == "table":
            xs, ys = np.array(p["xs"]), np.array(p["ys"])
            if p["interp"] == "linear":
                return np.interp(x, xs, ys, right=0.0)
            k = np.searchsorted(xs, x, side="right") - 1
            return np.where(x >= xs[-1], 0.0, ys[np.clip(k, 0, len(ys) - 1)])
        return np.vectorize(self.fn, otypes=[float])(x)

    def inv(self, y):
        """Generalized inverse ``inf{x >= 0 : phi(x) <= y}`` (``inf`` when never reached)."""
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.kind == "linear":
            return np.clip(p["scale"] * (1.0 - y), 0.0, p["scale"])
        if self.kind in ("exponential", "gaussian"):
            with np.errstate(divide="ignore"):
                t = -np.log(np.minimum(y, 1.0))
            if self.kind == "exponential":
                return t / p["rate"]
            return p["sigma"] * np.sqrt(2 * t)
        if self.kind == "table":
            return self._table_inv(y)
        if self.inverse is not None:
            return np.vectorize(self.inverse, otypes=[float])(y)
        return self._bisect_inv(y)

    def _table_inv(self, y):
        xs, ys = np.array(self.params["xs"]), np.array(self.params["ys"])
        flat = np.atleast_1d(y).ravel()
        out = np.empty(len(flat))
        for t, v in enumerate(flat):
            if v >= 1.0:
                out[t] = 0.0
                continue
            k = int(np.argmax(ys <= v))  # first knot at or below v
            if self.params["interp"] == "step" or ys[k - 1] == ys[k]:
                out[t] = xs[k]
            else:
                frac = (ys[k - 1] - v) / (ys[k - 1] - ys[k])
                out[t] = min(xs[k - 1] + frac * (xs[k] - xs[k - 1]), xs[k])
        return out.reshape(np.shape(y))

    def _bisect_inv(self, y, tol: float = 1e-12):
        flat = np.atleast_1d(y).astype(float).ravel()
        out = np.zeros(len(flat))
        for t, v in enumerate(flat):
            if float(self(0.0)) <= v:
                continue
            hi = 1.0
            while float(self(hi)) > v:
                hi *= 2
                if hi > _INV_LIMIT:
                    raise FailureFunctionError(f"phi never drops to {v}")
            lo = 0.0
            while hi - lo > tol * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                if float(self(mid)) <= v:
                    hi = mid
                else:
                    lo = mid
            out[t] = hi
        return out.reshape(np.shape(y))

    def validate(self, x_max: float, samples: int = 2049) -> None:
        """Sampled check of ``phi(0) = 1`` and monotonicity on ``[0, x_max]``."""
        if abs(float(self(0.0)) - 1.0) > 1e-12:
            raise FailureFunctionError("phi(0) must be 1")
        xs = np.linspace(0.0, max(x_max, 1e-12), samples)
        v = self(xs)
        if not np.all(np.isfinite(v)) or (v < -1e-12).any() or (v > 1 + 1e-12).any():
            raise FailureFunctionError("phi must take values in [0, 1]")
        if (np.diff(v) > 1e-12).any():
            raise FailureFunctionError("phi must be non-increasing")

    def to_json(self) -> dict:
        if self.kind == "custom":
            raise FailureFunctionError("custom failure functions are not serializable")
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "FailureFunction":
        kind = obj["kind"]
        if kind == "linear":
            return cls.linear(obj.get("scale", 1.0))
        if kind == "exponential":
            return cls.exponential(obj.get("rate", 1.0))
        if kind == "gaussian":
            return cls.gaussian(obj.get("sigma", 1.0))
        if kind == "table":
            return cls.table(obj["xs"], obj["ys"], obj.get("interp", "step"))
        raise FailureFunctionError(f"unknown failure function kind {kind!r}")


@dataclass(frozen=True)
class DiscretizationSpec:
    n: int
    delta: float
    m: int
    radii: tuple[float, ...]

    @property
    def family_size(self) -> int:
        return self.n * (self.m - 1)


# smallest round value passing the empirical (rho, eps)-approximation check in the tests
DEFAULT_C_VC = 2.5


@dataclass(frozen=True)
class ApproxParams:
    delta: float
    b: float = 2.0
    c_vc: float = DEFAULT_C_VC
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.b < 1:
            raise ValueError("b must be at least 1")
        if not self.c_vc > 0:
            raise ValueError("c_vc must be positive")


@dataclass(frozen=True)
class VulnResult:
    location: Point
    est_phi: float
    phase1_steps: int
    samples_used: tuple[int, ...]
    rho: float

    def to_json(self) -> dict:
        return {
            "location": [self.location.x, self.location.y],
            "est_phi": self.est_phi,
            "phase1_steps": self.phase1_steps,
            "samples_used": list(self.samples_used),
            "rho": self.rho,
        }


# --- inputs -----------------------------------------------------------------

def segments_array(segments) -> np.ndarray:
    """Coerce an Instance, cores, Segments or an (n, 2, 2) array to an (n, 2, 2) array."""
    if isinstance(segments, Instance):
        segments = segments.cores
    if isinstance(segments, np.ndarray):
        arr = np.asarray(segments, dtype=float)
    else:
        rows = []
        for s in segments:
            if isinstance(s, ConvexCore):
                rows.append(s.as_array())
            elif isinstance(s, Segment):
                rows.append(np.array([s.a, s.b], dtype=float))
            else:
                rows.append(np.asarray(s, dtype=float))
        arr = np.array(rows, dtype=float) if rows else np.empty((0, 2, 2))
    if arr.ndim != 3 or arr.shape[1:] != (2, 2):
        raise ValueError("segments must have shape (n, 2, 2)")
    return arr


def _core_table(segs: np.ndarray) -> CoreTable:
    return CoreTable(list(segs))


def _seg_dists(P: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distance matrix (points x segments)."""
    a = segs[:, 0]
    d = segs[:, 1] - a
    dd = np.maximum((d * d).sum(1), 1e-300)
    rel = P[:, None, :] - a[None, :, :]
    t = np.clip((rel * d[None]).sum(2) / dd[None], 0.0, 1.0)
    diff = rel - t[..., None] * d[None]
    return np.hypot(diff[..., 0], diff[..., 1])


# --- exact quantities -------------------------------------------------------

def phi_point(q, segments, f: FailureFunction) -> float:
    """Expected number of failed segments for an attack at ``q``."""
    return float(phi_many(np.array([q], dtype=float), segments, f)[0])


def phi_many(points, segments, f: FailureFunction) -> np.ndarray:
    segs = segments_array(segments)
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(segs) == 0:
        return np.zeros(len(P))
    out = np.empty(len(P))
    step = max(1, 2_000_000 // len(segs))
    for k in range(0, len(P), step):
        out[k:k + step] = f(_seg_dists(P[k:k + step], segs)).sum(1)
    return out


def _ceil_ratio(num: float, den: float) -> int:
    q = num / den
    r = round(q)
    # 8 / 0.4 must give 20, not 21
    if abs(q - r) <= 1e-9 * max(1.0, abs(q)):
        return int(r)
    return math.ceil(q)


def discretize(n: int, delta: float, f: FailureFunction) -> DiscretizationSpec:
    """Radii ``r_j = inv(1 - j/m)``, ``j = 1..m-1`` with ``m = ceil(2n/delta)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if n < 1:
        raise ValueError("need at least one segment")
    m = _ceil_ratio(2 * n, delta)
    j = np.arange(1, m)
    radii = np.asarray(f.inv(1.0 - j / m), dtype=float)
    if not np.all(np.isfinite(radii)):
        raise FailureFunctionError("phi never reaches the required levels")
    f.validate(2 * float(radii[-1]) if len(radii) else 1.0)
    if (np.diff(radii) < 0).any():
        raise FailureFunctionError("inverse of phi is not monotone")
    return DiscretizationSpec(n, float(delta), m, tuple(float(r) for r in radii))


def family_depth(points, segments, spec: DiscretizationSpec) -> np.ndarray:
    """Depth of each point in the full implicit family, strict ``d < r_j`` containment.

    Per segment this is the number of radii exceeding the distance, so the
    ``n (m - 1)`` racetracks are never built.
    """
    segs = segments_array(segments)
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    radii = np.asarray(spec.radii)
    d = _seg_dists(P, segs)
    inside = len(radii) - np.searchsorted(radii, d, side="right")
    return inside.sum(1)


def sanity_depth_vs_phi(q, segments, spec: DiscretizationSpec, f: FailureFunction,
                        slack: float = 1e-9) -> tuple[bool, bool]:
    """Both sides of ``Phi(q) >= depth/m >= Phi(q) - delta/2``."""
    phi = phi_point(q, segments, f)
    scaled = float(family_depth([q], segments, spec)[0]) / spec.m
    return phi >= scaled - slack, scaled >= phi - spec.delta / 2 - slack


# --- sampling ---------------------------------------------------------------

def sample_size(rho: float, eps: float, n: int, params: ApproxParams) -> int:
    """``c b ln n / (eps^2 rho)`` rounded up (at least 1)."""
    return max(1, math.ceil(params.c_vc * params.b * math.log(max(n, 2)) / (eps * eps * rho)))


def _draw_counts(spec: DiscretizationSpec, nu: int, rng: np.random.Generator) -> np.ndarray:
    i = rng.integers(0, spec.n, nu)
    j = rng.integers(0, spec.m - 1, nu)
    counts = np.zeros((spec.n, spec.m - 1), dtype=np.int64)
    np.add.at(counts, (i, j), 1)
    return counts


def sample_racetracks(spec: DiscretizationSpec, segments, nu: int, rng: np.random.Generator,
                      jitter: float | None = None) -> list[OffsetShape]:
    """``nu`` racetracks drawn uniformly with replacement from the implicit family.

    Every draw after the first on the same segment gets its endpoints shifted
    by at most ``jitter`` per coordinate, so no two cores coincide.
    """
    if nu < 1:
        raise ValueError("nu must be at least 1")
    segs = segments_array(segments)
    jitter = TOL.jitter if jitter is None else jitter
    i = rng.integers(0, spec.n, nu)
    j = rng.integers(0, spec.m - 1, nu)
    seen = set()
    out = []
    for a, b in zip(i, j):
        core = segs[a].copy()
        if a in seen:
            core = core + rng.uniform(-jitter, jitter, core.shape)
        seen.add(a)
        out.append(OffsetShape(ConvexCore.segment(core[0], core[1]), spec.radii[b]))
    return out


def _weighted_table(cores: CoreTable, spec: DiscretizationSpec, counts: np.ndarray) -> ShapeTable:
    """One shape per distinct positive (segment, radius), weighted by multiplicity."""
    radii = np.asarray(spec.radii)
    seg_i, rad_j = np.nonzero(counts)
    w = counts[seg_i, rad_j].astype(float)
    r = radii[rad_j]
    keep = r > 0
    seg_i, r, w = seg_i[keep], r[keep], w[keep]
    # plateaus in phi give repeated radii; merge them
    key = np.stack([seg_i.astype(float), r], axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    weights = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
    return ShapeTable(cores, uniq[:, 0].astype(np.int64), uniq[:, 1], weights)


def _sample_depth(cores, spec, counts):
    """Max weighted depth and witness of a sample given as multiplicities."""
    T = _weighted_table(cores, spec, counts)
    if T.n == 0:
        a = cores.V[0, 0]
        return 0.0, Point(float(a[0]), float(a[1]))
    return max_depth_table(T)


def _step_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *path])


def _counts_for(spec, nu, rng):
    full = spec.family_size
    if nu >= full:
        return np.ones((spec.n, spec.m - 1), dtype=np.int64), full
    return _draw_counts(spec, nu, rng), nu


def phase1(spec: DiscretizationSpec, segments, params: ApproxParams,
           rng: np.random.Generator | None = None) -> tuple[float, float, int, tuple[int, ...]]:
    """Exponential search for the fractional max depth.

    Returns ``(rho, omega_of_last_sample, steps, sizes)``.  Once ``2^-i``
    drops below ``1/(2n)`` the full family is used, so the search never runs
    more than ``ceil(log2 n) + 1`` steps.
    """
    segs = segments_array(segments)
    cores = _core_table(segs)
    n = spec.n
    cap_step = math.ceil(math.log2(n)) + 1 if n > 1 else 1
    sizes = []
    i = 1
    while True:
        rho_i = 2.0 ** -i
        nu = sample_size(2 * rho_i, 1 / 8, n, params)
        if i >= cap_step:
            nu = spec.family_size
        step_rng = rng if rng is not None else _step_rng(params.seed, 1, i)
        counts, size = _counts_for(spec, nu, step_rng)
        sizes.append(size)
        best, _ = _sample_depth(cores, spec, counts)
        omega = best / size
        if omega > 0.75 * rho_i:
            return omega - 0.25 * rho_i, omega, i, tuple(sizes)
        i += 1


def phase2(spec: DiscretizationSpec, segments, rho: float, params: ApproxParams,
           rng: np.random.Generator | None = None) -> tuple[Point, float, int]:
    """Deepest point of a ``(rho, delta/4)`` sample and its rescaled Phi estimate."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    segs = segments_array(segments)
    cores = _core_table(segs)
    nu = sample_size(rho, params.delta / 4, spec.n, params)
    rng = _step_rng(params.seed, 2) if rng is None else rng
    counts, size = _counts_for(spec, nu, rng)
    best, wit = _sample_depth(cores, spec, counts)
    est = best * spec.family_size / (size * spec.m)
    return wit, float(est), size


def approx_most_vulnerable(segments, f: FailureFunction, params: ApproxParams) -> VulnResult:
    segs = segments_array(segments)
    if len(segs) == 0:
        raise ValueError("need at least one segment")
    spec = discretize(len(segs), params.delta, f)
    rho, _, steps, sizes = phase1(spec, segs, params)
    loc, est, size2 = phase2(spec, segs, rho, params)
    return VulnResult(loc, est, steps, sizes + (size2,), float(rho))


def exact_omega(spec: DiscretizationSpec, segments) -> float:
    """Fractional max depth of the full implicit family."""
    segs = segments_array(segments)
    best, _ = _sample_depth(_core_table(segs), spec, np.ones((spec.n, spec.m - 1), dtype=np.int64))
    return best / spec.family_size


# --- grid oracle ------------------------------------------------------------

def brute_force_phi_max(segments, f: FailureFunction, pitch: float, refine_top: int = 8,
                        margin: float | None = None) -> tuple[Point, float]:
    """Grid maximum of Phi over the segments' bounding box, refined 10x around the best cells.

    Phi at any point is at most Phi at its projection onto the convex hull of
    the segments (distances only shrink), so the box needs no inflation beyond
    one pitch.
    """
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    segs = segments_array(segments)
    pts = segs.reshape(-1, 2)
    margin = pitch if margin is None else margin
    lo = pts.min(0) - margin
    hi = pts.max(0) + margin
    xs = np.arange(lo[0], hi[0] + pitch / 2, pitch)
    ys = np.arange(lo[1], hi[1] + pitch / 2, pitch)
    G = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1).reshape(-1, 2)
    # the segment endpoints themselves are cheap extra candidates
    G = np.concatenate([G, pts])
    vals = phi_many(G, segs, f)
    order = np.argsort(-vals, kind="stable")[:refine_top]
    best_v = float(vals[order[0]])
    best_p = G[order[0]]
    fine = pitch / 10
    offs = np.arange(-pitch, pitch + fine / 2, fine)
    local = np.stack(np.meshgrid(offs, offs, indexing="ij"), -1).reshape(-1, 2)
    for k in order:
        L = G[k] + local
        v = phi_many(L, segs, f)
        t = int(np.argmax(v))
        if v[t] > best_v:
            best_v, best_p = float(v[t]), L[t]
    return Point(float(best_p[0]), float(best_p[1])), best_v


def phi_grid(segments, f: FailureFunction, pitch: float, tol: float) -> tuple[Point, float, bool]:
    """Grid oracle plus a pitch-halving convergence check (change below ``tol``)."""
    p1, v1 = brute_force_phi_max(segments, f, pitch)
    p2, v2 = brute_force_phi_max(segments, f, pitch / 2)
    if v2 >= v1:
        return p2, v2, abs(v2 - v1) < tol
    return p1, v1, abs(v2 - v1) < tol
