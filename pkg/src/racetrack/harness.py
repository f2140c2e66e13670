"""Scaling experiments, log-log regression and the vulnerability benchmark.

Every trial is seeded from ``(config.seed + trial, n)`` so rows can be
regenerated one at a time, and rows are emitted in (n, trial) order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from ._kernel import DegenerateInputError
from .depth import shallow_vertex_count
from .geometry import OffsetShape, shapes_from_cores
from .models import (
    Density,
    DistributionSpec,
    GenerationError,
    Instance,
    Permutation,
    RadiiModel,
    assign_radii,
    gen_adversarial,
    gen_disjoint_polygons,
    gen_disjoint_segments,
    geometric_theta,
)
from .union import union_stats
from .vulnerability import (
    DEFAULT_C_VC,
    ApproxParams,
    FailureFunction,
    approx_most_vulnerable,
    brute_force_phi_max,
    phi_point,
    segments_array,
)

KINDS = ("union-scaling", "shallow-vertices", "adversarial", "vuln-bench")
GENERATORS = ("random", "adversarial")


@dataclass
class ExperimentConfig:
    """One experiment.

    ``model`` is a small dict resolved per ``n`` by :func:`make_model`:
    ``{"kind": "geometric", "r_min", "r_max"}``, ``{"kind": "equal", "r"}``,
    ``{"kind": "density", "dist": ..., **params}``, or for the adversarial
    generator ``{"kind": "fixed"}`` / ``{"kind": "shuffled"}``.
    """

    kind: str
    n_values: list[int]
    s: int = 2
    trials: int = 20
    model: dict = field(default_factory=lambda: {"kind": "geometric", "r_min": 0.01, "r_max": 2.0})
    seed: int = 0
    output: str | None = None
    generator: str = "random"
    k: int | str = 5  # "n" ties k to the family size
    delta: float = 0.25
    pitch: float = 0.02
    phi: dict = field(default_factory=lambda: {"kind": "linear"})
    c_vc: float = DEFAULT_C_VC
    b: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if not self.n_values or any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n_values must be non-empty and strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.s < 2:
            raise ValueError("s must be 2 (segments) or a polygon size >= 3")
        if self.k != "n" and not (isinstance(self.k, int) and self.k >= 0):
            raise ValueError("k must be a non-negative integer or 'n'")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        return cls(**obj)


@dataclass(frozen=True)
class RegressionReport:
    slope: float
    intercept: float
    r_squared: float
    n_values: tuple[int, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]

    def to_json(self) -> dict:
        return asdict(self)


def regress(n_values, means, stds=None) -> RegressionReport:
    """Least squares fit of ln(mean) against ln(n)."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.asarray(means, dtype=float))
    fit = stats.linregress(x, y)
    stds = [0.0] * len(means) if stds is None else stds
    r2 = float(fit.rvalue ** 2) if np.isfinite(fit.rvalue) else 1.0
    return RegressionReport(float(fit.slope), float(fit.intercept), min(max(r2, 0.0), 1.0),
                            tuple(int(n) for n in n_values), tuple(float(m) for m in means),
                            tuple(float(s) for s in stds))


def make_model(spec: dict, n: int) -> RadiiModel:
    kind = spec["kind"]
    if kind == "geometric":
        return Permutation(geometric_theta(n, spec.get("r_min", 0.01), spec.get("r_max", 2.0)))
    if kind == "equal":
        return Permutation((float(spec.get("r", 0.3)),) * n)
    if kind == "permutation":
        return Permutation(tuple(spec["theta"]))
    if kind == "density":
        params = {k: v for k, v in spec.items() if k not in ("kind", "dist")}
        return Density(DistributionSpec(spec["dist"], params))
    raise ValueError(f"unknown radii model {kind!r}")


def trial_rng(seed: int, trial: int, n: int) -> np.random.Generator:
    return np.random.default_rng([seed + trial, n])


def make_trial(config: ExperimentConfig, n: int, trial: int) -> tuple[Instance, np.ndarray]:
    """Instance and radii for one trial."""
    rng = trial_rng(config.seed, trial, n)
    if config.generator == "adversarial":
        inst, radii = gen_adversarial(n)
        radii = np.asarray(radii)
        kind = config.model.get("kind", "fixed")
        if kind == "shuffled":
            radii = rng.permutation(radii)
        elif kind != "fixed":
            radii = assign_radii(make_model(config.model, n), n, rng)
        return inst, radii
    side = math.sqrt(n)
    region = (0.0, 0.0, side, side)
    if config.s == 2:
        inst = gen_disjoint_segments(n, region, rng, min_len=0.1, max_len=1.0)
    else:
        inst = gen_disjoint_polygons(n, config.s, region, rng)
    inst.meta["seed"] = config.seed + trial
    return inst, assign_radii(make_model(config.model, n), n, rng)


def _model_label(config: ExperimentConfig) -> str:
    return config.model.get("kind", "?") if config.generator == "random" else f"adversarial-{config.model.get('kind')}"


def _run_trials(config: ExperimentConfig, measure: Callable[[list[OffsetShape]], dict], fields: list[str]):
    rows = []
    for n in config.n_values:
        for t in range(config.trials):
            row = {"n": n, "s": config.s, "model": _model_label(config), "seed": config.seed + t, "trial": t}
            try:
                inst, radii = make_trial(config, n, t)
                row.update(measure(shapes_from_cores(inst.cores, radii)))
                row["status"] = "ok"
            except (GenerationError, DegenerateInputError) as exc:
                row.update({f: "" for f in fields})
                row["status"] = f"error: {exc}"
            rows.append(row)
    return rows


def _aggregate(config, rows, key):
    ns, means, stds = [], [], []
    for n in config.n_values:
        vals = [r[key] for r in rows if r["n"] == n and r["status"] == "ok"]
        if vals:
            ns.append(n)
            means.append(float(np.mean(vals)))
            stds.append(float(np.std(vals)))
    if len(ns) < 2:
        raise RuntimeError("fewer than two n values produced results")
    return regress(ns, means, stds)


UNION_FIELDS = ["psi", "cc", "rr", "rr_terminal", "rr_nonterminal", "cr", "shape_vertices"]


def _union_measure(shapes):
    st = union_stats(shapes)
    return {"psi": st.psi, "cc": st.cc, "rr": st.rr, "rr_terminal": st.rr_terminal,
            "rr_nonterminal": st.rr_nonterminal, "cr": st.cr,
            "shape_vertices": st.shape_vertices_on_boundary}


def run_union_scaling(config: ExperimentConfig) -> tuple[RegressionReport, list[dict]]:
    """Mean union complexity per n, regressed on a log-log scale."""
    rows = _run_trials(config, _union_measure, UNION_FIELDS)
    _write_csv(config.output, rows)
    return _aggregate(config, rows, "psi"), rows


def run_adversarial(config: ExperimentConfig) -> tuple[RegressionReport, list[dict]]:
    if config.generator != "adversarial":
        config = ExperimentConfig(**{**asdict(config), "generator": "adversarial"})
    return run_union_scaling(config)


def run_shallow_vertices(config: ExperimentConfig, k: int | str | None = None) -> tuple[RegressionReport, list[dict]]:
    """Mean count of arrangement vertices of depth at most k, regressed in n."""
    k = config.k if k is None else k
    if k != "n" and k < 0:
        raise ValueError("k must be non-negative")

    def measure(shapes):
        kk = len(shapes) if k == "n" else k
        return {"k": kk, "shallow": shallow_vertex_count(shapes, kk)}

    rows = _run_trials(config, measure, ["k", "shallow"])
    _write_csv(config.output, rows)
    return _aggregate(config, rows, "shallow"), rows


# --- vulnerability benchmark -------------------------------------------------

@dataclass(frozen=True)
class VulnBenchReport:
    pass_rate: float
    trials: int
    unstable_oracle: int
    seconds_by_n: dict = field(default_factory=dict, compare=False)

    def to_json(self, timing: bool = False) -> dict:
        out = {"pass_rate": self.pass_rate, "trials": self.trials, "unstable_oracle": self.unstable_oracle}
        if timing:
            out["seconds_by_n"] = {str(k): v for k, v in self.seconds_by_n.items()}
        return out


def vuln_instance(n: int, rng: np.random.Generator) -> Instance:
    """n segments of length 0.1 to 0.5 at a density of 5 per unit area."""
    side = math.sqrt(n / 5)
    return gen_disjoint_segments(n, (0.0, 0.0, side, side), rng, min_len=0.1, max_len=0.5)


def converged_grid(segs, f: FailureFunction, pitch: float, tol: float, max_halvings: int = 4):
    """Grid oracle, halving the pitch until successive maxima differ by less than ``tol``."""
    _, prev = brute_force_phi_max(segs, f, pitch)
    for _ in range(max_halvings):
        pitch /= 2
        p, cur = brute_force_phi_max(segs, f, pitch)
        if abs(cur - prev) < tol:
            return p, max(cur, prev), True
        prev = cur
    return p, cur, False


def vuln_trial(n: int, seed: int, f: FailureFunction, delta: float, pitch: float,
               c_vc: float = DEFAULT_C_VC, b: float = 2.0) -> dict:
    rng = np.random.default_rng([seed, n])
    segs = segments_array(vuln_instance(n, rng))
    res = approx_most_vulnerable(segs, f, ApproxParams(delta, b=b, c_vc=c_vc, seed=seed))
    phi_q = phi_point(res.location, segs, f)
    _, grid, stable = converged_grid(segs, f, pitch, delta / 10)
    return {
        "n": n, "seed": seed, "x": res.location.x, "y": res.location.y, "est_phi": res.est_phi,
        "phi_at_q": phi_q, "grid_max": grid, "grid_stable": stable,
        "passed": bool(phi_q >= (1 - delta) * grid), "phase1_steps": res.phase1_steps,
        "samples": " ".join(str(s) for s in res.samples_used),
    }


def run_vuln_bench(config: ExperimentConfig) -> tuple[VulnBenchReport, list[dict]]:
    f = FailureFunction.from_json(config.phi)
    rows, seconds = [], {}
    for n in config.n_values:
        t0 = time.perf_counter()
        for t in range(config.trials):
            rows.append(vuln_trial(n, config.seed + t, f, config.delta, config.pitch, config.c_vc, config.b))
        seconds[n] = (time.perf_counter() - t0) / config.trials
    _write_csv(config.output, rows)
    passed = sum(r["passed"] for r in rows)
    unstable = sum(not r["grid_stable"] for r in rows)
    return VulnBenchReport(passed / len(rows), len(rows), unstable, seconds), rows


# --- output ------------------------------------------------------------------

def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    fields = list(rows[0].keys())
    for r in rows:
        fields += [k for k in r if k not in fields]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in fields})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path, rows):
    if path:
        Path(path).write_text(rows_to_csv(rows))


def load_config(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_json(json.loads(Path(path).read_text()))
