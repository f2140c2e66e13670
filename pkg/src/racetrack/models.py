"""Random expansion radii and generators for disjoint core instances.

Two radius models are supported.  :class:`Permutation` shuffles a fixed
multiset of radii over the cores; :class:`Density` draws every radius
independently from a :class:`DistributionSpec`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import stats

from .config import TOL
from .geometry import ConvexCore

Box = tuple[float, float, float, float]


class GenerationError(RuntimeError):
    """Rejection sampling gave up (region too crowded for the requested instance)."""


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        if self.kind == "uniform":
            if not 0 <= p["lo"] <= p["hi"]:
                raise ValueError("uniform needs 0 <= lo <= hi")
        elif self.kind == "exponential":
            if p["rate"] <= 0:
                raise ValueError("exponential rate must be positive")
        elif self.kind == "discrete":
            vals = np.asarray(p["values"], float)
            w = np.asarray(p["weights"], float)
            if len(vals) != len(w) or (vals < 0).any() or (w < 0).any() or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
                raise ValueError("discrete needs non-negative values and weights summing to 1")
        elif self.kind == "truncated-gaussian":
            if p["sigma"] <= 0 or p["lo"] < 0:
                raise ValueError("truncated-gaussian needs sigma > 0 and lo >= 0")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "DistributionSpec":
        return cls("uniform", {"lo": lo, "hi": hi})

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        return cls("exponential", {"rate": rate})

    @classmethod
    def discrete(cls, values: Sequence[float], weights: Sequence[float]) -> "DistributionSpec":
        return cls("discrete", {"values": list(values), "weights": list(weights)})

    @classmethod
    def truncated_gaussian(cls, mu: float, sigma: float, lo: float = 0.0) -> "DistributionSpec":
        return cls("truncated-gaussian", {"mu": mu, "sigma": sigma, "lo": lo})

    def sample(self, rng: np.random.Generator, n: int, jitter: float | None = None) -> np.ndarray:
        p = self.params
        if self.kind == "uniform":
            return rng.uniform(p["lo"], p["hi"], n)
        if self.kind == "exponential":
            return rng.exponential(1.0 / p["rate"], n)
        if self.kind == "discrete":
            jitter = TOL.jitter if jitter is None else jitter
            draws = rng.choice(np.asarray(p["values"], float), size=n, p=np.asarray(p["weights"], float))
            # ties between draws would break general position
            return draws + rng.uniform(0.0, jitter, n)
        a = (p["lo"] - p["mu"]) / p["sigma"]
        return stats.truncnorm.rvs(a, np.inf, loc=p["mu"], scale=p["sigma"], size=n, random_state=rng)


@dataclass(frozen=True)
class Permutation:
    theta: tuple[float, ...]

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        if any(t < 0 or not math.isfinite(t) for t in theta):
            raise ValueError("radii must be finite and non-negative")
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class Density:
    spec: DistributionSpec


RadiiModel = Union[Permutation, Density]


def assign_radii(model: RadiiModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Radii for ``n`` cores: a uniformly random ordering of theta, or n i.i.d. draws."""
    if isinstance(model, Permutation):
        if len(model.theta) != n:
            raise ValueError(f"permutation model has {len(model.theta)} radii for {n} cores")
        return rng.permutation(np.asarray(model.theta, dtype=float))
    if isinstance(model, Density):
        return np.asarray(model.spec.sample(rng, n), dtype=float)
    raise TypeError(f"not a radii model: {model!r}")


def geometric_theta(n: int, r_min: float, r_max: float) -> tuple[float, ...]:
    """n radii in geometric progression from r_min to r_max."""
    if n == 1:
        return (float(r_max),)
    return tuple(float(x) for x in np.geomspace(r_min, r_max, n))


def model_to_json(model: RadiiModel) -> dict:
    if isinstance(model, Permutation):
        return {"permutation": list(model.theta)}
    return {"density": {"kind": model.spec.kind, **model.spec.params}}


def model_from_json(obj: dict) -> RadiiModel:
    if "permutation" in obj:
        return Permutation(tuple(obj["permutation"]))
    d = dict(obj["density"])
    kind = d.pop("kind")
    return Density(DistributionSpec(kind, d))


@dataclass
class Instance:
    cores: list[ConvexCore]
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cores)

    def to_json(self) -> dict:
        return {
            "cores": [c.to_json() for c in self.cores],
            "seed": self.meta.get("seed"),
            "generator": self.meta.get("generator", "manual"),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        cores = [ConvexCore.from_json(c) for c in obj["cores"]]
        return cls(cores, {"seed": obj.get("seed"), "generator": obj.get("generator", "manual")})

    def arrays(self) -> list[np.ndarray]:
        return [c.as_array() for c in self.cores]


def _seg_seg_dist(a, b, C, D):
    """Distance between segment ab and each segment C[k]D[k] (vectorised over k)."""
    def pt_seg(p, s0, s1):
        d = s1 - s0
        L2 = (d * d).sum(-1)
        t = np.clip(((p - s0) * d).sum(-1) / np.where(L2 > 0, L2, 1.0), 0, 1)
        diff = p - (s0 + t[..., None] * d)
        return np.hypot(diff[..., 0], diff[..., 1])

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    o1, o2 = orient(a, b, C), orient(a, b, D)
    o3, o4 = orient(C, D, a), orient(C, D, b)
    crossing = (np.sign(o1) != np.sign(o2)) & (np.sign(o3) != np.sign(o4))
    d = np.minimum.reduce([pt_seg(a, C, D), pt_seg(b, C, D), pt_seg(C, a, b), pt_seg(D, a, b)])
    return np.where(crossing, 0.0, d)


def segment_clearances(segs: np.ndarray) -> np.ndarray:
    """Pairwise distances between segments given as an (n, 2, 2) array."""
    n = len(segs)
    out = np.full((n, n), np.inf)
    for i in range(n):
        if i + 1 < n:
            d = _seg_seg_dist(segs[i, 0], segs[i, 1], segs[i + 1:, 0], segs[i + 1:, 1])
            out[i, i + 1:] = d
            out[i + 1:, i] = d
    return out


def gen_disjoint_segments(n: int, region: Box, rng: np.random.Generator, *, min_len: float = 0.0,
                          max_len: float | None = None, clearance: float = 1e-6,
                          jitter: float | None = None, max_tries: int = 1000) -> Instance:
    """Rejection-sample ``n`` pairwise-disjoint segments inside ``region``."""
    if n < 1:
        raise ValueError("need at least one segment")
    x0, y0, x1, y1 = region
    if max_len is None:
        max_len = 0.25 * min(x1 - x0, y1 - y0)
    jitter = TOL.jitter if jitter is None else jitter
    segs = np.empty((n, 2, 2))
    for k in range(n):
        for _ in range(max_tries):
            a = rng.uniform((x0, y0), (x1, y1))
            ang = rng.uniform(0, 2 * np.pi)
            length = rng.uniform(min_len, max_len)
            b = a + length * np.array([np.cos(ang), np.sin(ang)])
            if length <= 0 or not (x0 <= b[0] <= x1 and y0 <= b[1] <= y1):
                continue
            a = a + rng.uniform(-jitter, jitter, 2)
            b = b + rng.uniform(-jitter, jitter, 2)
            if k and _seg_seg_dist(a, b, segs[:k, 0], segs[:k, 1]).min() <= clearance:
                continue
            segs[k] = (a, b)
            break
        else:
            raise GenerationError(f"could not place segment {k} after {max_tries} tries")
    cores = [ConvexCore.segment(s[0], s[1]) for s in segs]
    return Instance(cores, {"generator": "segments", "n": n, "region": list(region)})


def gen_disjoint_polygons(n: int, s: int, region: Box, rng: np.random.Generator, *,
                          min_gap: float | None = None, jitter: float | None = None) -> Instance:
    """Convex s-gons on a jittered ceil(sqrt(n)) x ceil(sqrt(n)) grid, one per cell."""
    if n < 1 or s < 3:
        raise ValueError("need n >= 1 and s >= 3")
    jitter = TOL.jitter if jitter is None else jitter
    g = math.ceil(math.sqrt(n))
    x0, y0, x1, y1 = region
    cw, ch = (x1 - x0) / g, (y1 - y0) / g
    cell = min(cw, ch)
    min_gap = 2 * np.pi / (4 * s) if min_gap is None else min_gap
    cells = np.sort(rng.choice(g * g, size=n, replace=False))
    cores = []
    for c in cells:
        cx = x0 + (c % g + 0.5) * cw
        cy = y0 + (c // g + 0.5) * ch
        rho = cell * rng.uniform(0.25, 0.4)
        slack = 0.5 * cell - rho
        cx += rng.uniform(-0.9, 0.9) * slack
        cy += rng.uniform(-0.9, 0.9) * slack
        while True:
            ang = np.sort(rng.uniform(0, 2 * np.pi, s))
            gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
            if gaps.min() >= min_gap:
                break
        pts = np.stack([cx + rho * np.cos(ang), cy + rho * np.sin(ang)], axis=1)
        pts += rng.uniform(-jitter, jitter, pts.shape)
        cores.append(ConvexCore.polygon(pts))
    return Instance(cores, {"generator": f"polygons-{s}", "n": n, "region": list(region)})


def gen_adversarial(n: int, *, spacing: float = 2.0, big: float = 1.0, slope_deg: float = 60.0,
                    length: float = 3.0, tilt: float = 1e-5) -> tuple[Instance, list[float]]:
    """Sawtooth instance whose fixed radii give a union with Theta(n^2) vertices.

    n/2 parallel segments rising at ``slope_deg`` end on the x-axis and get a
    large radius.  Along the top of their union each racetrack contributes a
    rising straight edge and a falling cap, a row of teeth.  n/2 long nearly
    horizontal segments run through the band between the valleys and the
    tops of the straight edges with a thin radius, so every thin racetrack
    crosses every tooth twice on an edge and twice on an arc.  Shuffling the
    same radii almost surely hands a large radius to a horizontal segment,
    which then swallows the band.
    """
    if n < 2 or n % 2:
        raise ValueError("adversarial construction needs an even n >= 2")
    k = n // 2
    a = math.radians(slope_deg)
    u = np.array([math.cos(a), math.sin(a)])
    # top end of the next tooth's straight edge, relative to this tooth's core end
    top = np.array([spacing - big * math.sin(a), big * math.cos(a)])
    au = float(top @ u)
    disc = au * au - (float(top @ top) - big * big)
    if disc <= 0 or float(top @ top) <= big * big:
        raise ValueError("spacing leaves no band between the teeth")
    valley = top[1] - (au - math.sqrt(disc)) * u[1]
    if valley <= 0:
        raise ValueError("spacing too wide: the band would reach the fat cores")
    band_lo = valley + 0.1 * (top[1] - valley)
    band_hi = top[1] - 0.1 * (top[1] - valley)
    pitch = (band_hi - band_lo) / k
    thin = 0.25 * pitch
    cores, radii = [], []
    for i in range(k):
        end = np.array([i * spacing, 0.0])
        cores.append(ConvexCore.segment(end - length * u, end))
        radii.append(big * (1 + 1e-3 * i / k))
    x_lo, x_hi = -length - 2 * big, (k - 1) * spacing + 2 * big
    for j in range(k):
        h = band_lo + (j + 0.5) * pitch
        slope = tilt * (j + 1) / k
        cores.append(ConvexCore.segment((x_lo, h), (x_hi, h + slope * (x_hi - x_lo))))
        radii.append(thin * (1 + 0.1 * j / k))
    return Instance(cores, {"generator": "adversarial", "n": n}), radii


def verify_disjoint(instance: Instance, clearance: float = 0.0) -> bool:
    """Pairwise disjointness: segment distance for segments, separating axes otherwise."""
    arrays = instance.arrays()
    if all(len(a) == 2 for a in arrays):
        segs = np.stack(arrays)
        d = segment_clearances(segs)
        return bool((d > clearance).all())
    lo = np.array([a.min(0) for a in arrays])
    hi = np.array([a.max(0) for a in arrays])
    for i in range(len(arrays)):
        for j in range(i + 1, len(arrays)):
            if (lo[i] > hi[j]).any() or (lo[j] > hi[i]).any():
                continue
            if not _separated(arrays[i], arrays[j]):
                return False
    return True


def _separated(P: np.ndarray, Q: np.ndarray) -> bool:
    def axes(A):
        if len(A) == 1:
            return np.empty((0, 2))
        d = np.roll(A, -1, axis=0) - A
        return np.stack([-d[:, 1], d[:, 0]], axis=1)

    for ax in np.concatenate([axes(P), axes(Q)]):
        if not ax.any():
            continue
        p, q = P @ ax, Q @ ax
        if p.max() < q.min() or q.max() < p.min():
            return True
    return False
