"""Acceptance gates, one test per criterion, each recording a PASS/FAIL line.

The lines are repeated in a summary section at the end of the pytest run.
"""
import functools
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import match_points, union_vertices_sampled
from racetrack.geometry import OffsetShape, shapes_from_cores
from racetrack.harness import ExperimentConfig, make_trial, run_union_scaling, run_vuln_bench, vuln_instance
from racetrack.models import gen_disjoint_segments
from racetrack.union import pair_crossing_counts, union_vertices
from racetrack.vulnerability import (
    ApproxParams,
    FailureFunction,
    discretize,
    exact_omega,
    phase1,
    sanity_depth_vs_phi,
    segments_array,
)

EPS = 1e-9

pytestmark = pytest.mark.slow


@functools.cache
def scaling_runs():
    """The union experiments shared by criteria 2 to 5, with wall-clock seconds."""
    specs = {
        "equal": ExperimentConfig("union-scaling", [50, 100, 200], trials=20, model={"kind": "equal", "r": 0.3}),
        "segments": ExperimentConfig("union-scaling", [50, 100, 200, 400], trials=20),
        "polygons": ExperimentConfig("union-scaling", [50, 100, 200, 400], trials=20, s=4),
        "fixed": ExperimentConfig("adversarial", [8, 16, 32, 64], trials=1, generator="adversarial",
                                  model={"kind": "fixed"}),
        "shuffled": ExperimentConfig("adversarial", [8, 16, 32, 64], trials=20, generator="adversarial",
                                     model={"kind": "shuffled"}),
    }
    out = {}
    for name, cfg in specs.items():
        t0 = time.perf_counter()
        rep, rows = run_union_scaling(cfg)
        out[name] = (cfg, rep, rows, time.perf_counter() - t0)
    return out


def test_c01_union_matches_sampling_oracle(criterion):
    bad, seconds = [], 0.0
    for seed in range(100):
        rng = np.random.default_rng([seed, 1001])
        n = int(rng.integers(1, 7))
        inst = gen_disjoint_segments(n, (0, 0, 3, 3), rng, min_len=0.2, max_len=1.5)
        radii = rng.uniform(0.05, 1.0, n)
        shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, radii)]
        t0 = time.perf_counter()
        got = np.array([v.point for v in union_vertices(shapes)])
        seconds += time.perf_counter() - t0
        ref = union_vertices_sampled([c.as_array() for c in inst.cores], radii)
        if not match_points(got, ref, 10 * EPS):
            bad.append(seed)
    ok = not bad and seconds < 60
    assert criterion(1, ok, f"mismatches={bad} union_vertices total {seconds:.2f}s (< 60s)")


def test_c02_pseudo_disk_baseline(criterion):
    cfg, rep, rows, _ = scaling_runs()["equal"]
    worst = 0
    for n in cfg.n_values:
        for t in range(cfg.trials):
            inst, radii = make_trial(cfg, n, t)
            counts = pair_crossing_counts(shapes_from_cores(inst.cores, radii))
            worst = max(worst, max(counts.values(), default=0))
    ok = worst <= 2 and rep.slope <= 1.15
    assert criterion(2, ok, f"max crossings per pair={worst} (<= 2), slope={rep.slope:.3f} (<= 1.15)")


def test_c03_permutation_near_linear(criterion):
    runs = scaling_runs()
    seg, poly = runs["segments"][1], runs["polygons"][1]
    seconds = runs["segments"][3] + runs["polygons"][3]
    ok = seg.slope <= 1.25 and poly.slope <= 1.25 and seconds < 600
    assert criterion(3, ok, f"segments slope={seg.slope:.3f}, polygons(s=4) slope={poly.slope:.3f} (<= 1.25), "
                            f"{seconds:.1f}s (< 600s)")


def test_c04_adversarial_contrast(criterion):
    runs = scaling_runs()
    fixed, shuffled = runs["fixed"][1], runs["shuffled"][1]
    ok = fixed.slope >= 1.7 and shuffled.slope <= 1.35
    assert criterion(4, ok, f"fixed slope={fixed.slope:.3f} (>= 1.7), shuffled slope={shuffled.slope:.3f} (<= 1.35)")


def test_c05_terminal_bound(criterion):
    violations, checked = 0, 0
    for name in ("equal", "segments", "fixed", "shuffled"):
        _, _, rows, _ = scaling_runs()[name]
        for r in rows:
            assert r["status"] == "ok"
            checked += 1
            violations += r["rr_terminal"] > 4 * r["n"]
    assert criterion(5, violations == 0, f"{violations} violations of rr_terminal <= 4n over {checked} segment trials")


def test_c06_depth_brackets_phi(criterion):
    rng = np.random.default_rng(606)
    fs = [FailureFunction.linear(), FailureFunction.exponential(2.0), FailureFunction.gaussian(0.5),
          FailureFunction.table([0, 0.3, 0.6, 1.0], [1.0, 0.7, 0.7, 0.0], "step")]
    fails = 0
    for t in range(200):
        n = int(rng.integers(1, 15))
        segs = segments_array(vuln_instance(n, rng))
        f = fs[t % len(fs)]
        delta = float(rng.uniform(0.05, 0.95))
        spec = discretize(n, delta, f)
        lo, hi = segs.reshape(-1, 2).min(0) - 0.5, segs.reshape(-1, 2).max(0) + 0.5
        q = rng.uniform(lo, hi) if t % 4 else segs[0].mean(0)
        fails += sanity_depth_vs_phi(q, segs, spec, f, slack=1e-9) != (True, True)
    assert criterion(6, fails == 0, f"{200 - fails}/200 triples satisfy both inequalities")


def test_c07_depth_at_least_m_minus_1(criterion):
    rng = np.random.default_rng(707)
    fs = [FailureFunction.linear(0.5), FailureFunction.exponential(), FailureFunction.gaussian(0.3),
          FailureFunction.table([0, 0.2, 0.4], [1.0, 0.5, 0.0], "linear")]
    fails = 0
    for t in range(50):
        n = int(rng.integers(1, 9))
        segs = segments_array(vuln_instance(n, rng))
        spec = discretize(n, float(rng.uniform(0.3, 0.9)), fs[t % len(fs)])
        depth = round(exact_omega(spec, segs) * spec.family_size)
        fails += depth < spec.m - 1
    assert criterion(7, fails == 0, f"{50 - fails}/50 discretizations have max depth >= m-1")


def test_c08_phase1_contract(criterion):
    n, delta = 8, 0.03
    inside, step_fail = 0, 0
    cap = math.ceil(math.log2(n)) + 1
    for s in range(30):
        # three supports give omega(K) from about 1/n up to about 3/4
        f = FailureFunction.linear((1.0, 0.3, 0.08)[s % 3])
        segs = segments_array(vuln_instance(n, np.random.default_rng([s, 808])))
        spec = discretize(n, delta, f)
        w = exact_omega(spec, segs)
        rho, _, steps, _ = phase1(spec, segs, ApproxParams(delta, seed=s))
        inside += rho <= w <= 2 * rho
        step_fail += steps > cap
    ok = inside >= 27 and step_fail == 0
    assert criterion(8, ok, f"omega(K) in [rho, 2rho] for {inside}/30 (>= 27), steps over {cap}: {step_fail}")


def test_c09_vulnerability_gate(criterion):
    cfg = ExperimentConfig("vuln-bench", [20], trials=50, delta=0.25, pitch=0.02)
    t0 = time.perf_counter()
    rep, rows = run_vuln_bench(cfg)
    seconds = time.perf_counter() - t0
    ok = rep.pass_rate >= 0.95 and seconds < 300
    assert criterion(9, ok, f"pass rate={rep.pass_rate:.2f} (>= 0.95), unstable oracle={rep.unstable_oracle}, "
                            f"{seconds:.1f}s (< 300s)")


def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "racetrack.cli", *args], capture_output=True, check=False)
    return proc.returncode, proc.stdout


def test_c10_cli_determinism(criterion, tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_bytes(_cli("gen", "--n", "15", "--seed", "10")[1])
    runs = {
        "gen": ("gen", "--n", "15", "--seed", "10"),
        "gen-polygons": ("gen", "--n", "6", "--kind", "polygons", "--seed", "4"),
        "depth": ("depth", "--instance", str(inst)),
        "vuln": ("vuln", "--instance", str(inst), "--seed", "3", "--oracle-pitch", "0.05"),
        "union-experiment": ("union-experiment", "--n-values", "10,20,40", "--trials", "3", "--seed", "2"),
        "shallow": ("shallow", "--n-values", "10,20", "--trials", "2", "--seed", "2"),
        "vuln-bench": ("vuln-bench", "--n-values", "8", "--trials", "3", "--pitch", "0.05", "--seed", "2"),
    }
    differ = []
    for name, argv in runs.items():
        a, b = _cli(*argv), _cli(*argv)
        if a != b or a[0] == 1 or not a[1]:
            differ.append(name)
    json.loads(_cli(*runs["vuln"])[1])
    detail = f"{len(runs) - len(differ)}/{len(runs)} subcommands byte-identical across two invocations"
    assert criterion(10, not differ, detail + (f", differing: {differ}" if differ else ""))
