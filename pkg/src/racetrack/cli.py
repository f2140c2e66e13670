"""Command line entry point.

Exit codes: 0 success, 1 error, 2 a requested gate failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .depth import max_depth
from .geometry import shapes_from_cores
from .harness import (
    ExperimentConfig,
    converged_grid,
    load_config,
    make_model,
    rows_to_csv,
    run_shallow_vertices,
    run_union_scaling,
    run_vuln_bench,
)
from .models import Instance, assign_radii, gen_adversarial, gen_disjoint_polygons, gen_disjoint_segments
from .vulnerability import DEFAULT_C_VC, ApproxParams, FailureFunction, approx_most_vulnerable, phi_point, segments_array

EXIT_OK, EXIT_ERROR, EXIT_GATE = 0, 1, 2


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_instance(path: str) -> tuple[Instance, list[float] | None]:
    obj = json.loads(Path(path).read_text())
    return Instance.from_json(obj), obj.get("radii")


def _parse_phi(text: str) -> FailureFunction:
    if text == "linear":
        return FailureFunction.linear()
    if text in ("exp", "exponential"):
        return FailureFunction.exponential()
    if text == "gaussian":
        return FailureFunction.gaussian()
    if text.startswith("table:"):
        obj = json.loads(Path(text[len("table:"):]).read_text())
        return FailureFunction.table(obj["xs"], obj["ys"], obj.get("interp", "step"))
    raise ValueError(f"unknown failure function {text!r}")


def _phi_json(text: str) -> dict:
    return _parse_phi(text).to_json()


def cmd_gen(args) -> int:
    rng = np.random.default_rng([args.seed, args.n])
    side = args.side if args.side is not None else float(np.sqrt(args.n))
    region = (0.0, 0.0, side, side)
    if args.kind == "adversarial":
        inst, radii = gen_adversarial(args.n)
    else:
        if args.kind == "segments":
            inst = gen_disjoint_segments(args.n, region, rng, min_len=0.1, max_len=1.0)
        else:
            inst = gen_disjoint_polygons(args.n, args.s, region, rng)
        model = json.loads(args.model) if args.model else {"kind": "geometric", "r_min": 0.01, "r_max": 2.0}
        radii = assign_radii(make_model(model, args.n), args.n, rng).tolist()
    inst.meta["seed"] = args.seed
    obj = inst.to_json()
    obj["radii"] = [float(r) for r in radii]
    _emit(_dump(obj) + "\n", args.out)
    return EXIT_OK


def _experiment_config(args, kind: str) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        return ExperimentConfig(**{**asdict(cfg), "kind": kind, "output": None})
    extra = {}
    if getattr(args, "delta", None) is not None:
        extra["delta"] = args.delta
    if getattr(args, "pitch", None) is not None:
        extra["pitch"] = args.pitch
    if getattr(args, "phi", None):
        extra["phi"] = _phi_json(args.phi)
    if getattr(args, "k", None) is not None:
        extra["k"] = args.k
    if getattr(args, "model", None):
        extra["model"] = json.loads(args.model)
    elif getattr(args, "generator", "random") == "adversarial":
        extra["model"] = {"kind": "fixed"}
    return ExperimentConfig(
        kind=kind,
        n_values=[int(x) for x in args.n_values.split(",")],
        s=getattr(args, "s", 2),
        trials=args.trials,
        seed=args.seed,
        generator=getattr(args, "generator", "random"),
        **extra,
    )


def _slope_gate(rep, args) -> int:
    sys.stderr.write(_dump(rep.to_json()) + "\n")
    if args.max_slope is not None and rep.slope > args.max_slope:
        return EXIT_GATE
    if args.min_slope is not None and rep.slope < args.min_slope:
        return EXIT_GATE
    return EXIT_OK


def cmd_union(args) -> int:
    cfg = _experiment_config(args, "adversarial" if args.generator == "adversarial" else "union-scaling")
    rep, rows = run_union_scaling(cfg)
    _emit(rows_to_csv(rows), args.output)
    return _slope_gate(rep, args)


def cmd_shallow(args) -> int:
    cfg = _experiment_config(args, "shallow-vertices")
    rep, rows = run_shallow_vertices(cfg)
    _emit(rows_to_csv(rows), args.output)
    return _slope_gate(rep, args)


def cmd_depth(args) -> int:
    inst, radii = _load_instance(args.instance)
    if args.radii:
        radii = json.loads(Path(args.radii).read_text())
    if radii is None:
        raise ValueError("no radii: pass --radii or include a 'radii' list in the instance")
    rep = max_depth(shapes_from_cores(inst.cores, radii), histogram=not args.no_histogram)
    _emit(_dump(rep.to_json()) + "\n", args.out)
    return EXIT_OK


def cmd_vuln(args) -> int:
    inst, _ = _load_instance(args.instance)
    segs = segments_array(inst)
    f = _parse_phi(args.phi)
    res = approx_most_vulnerable(segs, f, ApproxParams(args.delta, b=args.b, c_vc=args.c_vc, seed=args.seed))
    out = res.to_json()
    code = EXIT_OK
    if args.oracle_pitch is not None:
        _, grid, stable = converged_grid(segs, f, args.oracle_pitch, args.delta / 10)
        phi_q = phi_point(res.location, segs, f)
        passed = bool(phi_q >= (1 - args.delta) * grid)
        out["gate"] = {"grid_max": grid, "phi_at_location": phi_q, "grid_stable": stable, "passed": passed}
        code = EXIT_OK if passed else EXIT_GATE
    _emit(_dump(out) + "\n", args.out)
    return code


def cmd_vuln_bench(args) -> int:
    cfg = _experiment_config(args, "vuln-bench")
    rep, rows = run_vuln_bench(cfg)
    _emit(rows_to_csv(rows), args.output)
    sys.stderr.write(_dump(rep.to_json(timing=True)) + "\n")
    return EXIT_OK if rep.pass_rate >= args.min_pass_rate else EXIT_GATE


def _k_arg(text: str):
    return "n" if text == "n" else int(text)


def _experiment_args(p, default_n: str, default_trials: int = 20):
    p.add_argument("--config", help="experiment config JSON; overrides the other flags")
    p.add_argument("--n-values", default=default_n, help="comma separated, increasing")
    p.add_argument("--trials", type=int, default=default_trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="racetrack", description="Union complexity, depth and vulnerability tools for offset shapes.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance with radii as JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=["segments", "polygons", "adversarial"], default="segments")
    p.add_argument("--s", type=int, default=4, help="polygon vertex count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", type=float, help="square region side (default sqrt(n))")
    p.add_argument("--model", help='radii model JSON, e.g. {"kind": "equal", "r": 0.3}')
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    for name, func, help_ in (("union-experiment", cmd_union, "union complexity scaling"),
                              ("shallow", cmd_shallow, "shallow arrangement vertex scaling")):
        p = sub.add_parser(name, help=help_)
        _experiment_args(p, "50,100,200,400" if name == "union-experiment" else "50,100,200")
        p.add_argument("--s", type=int, default=2, help="2 for segments, >= 3 for polygons")
        p.add_argument("--model", help="radii model JSON")
        p.add_argument("--generator", choices=["random", "adversarial"], default="random")
        p.add_argument("--max-slope", type=float)
        p.add_argument("--min-slope", type=float)
        if name == "shallow":
            p.add_argument("--k", type=_k_arg, default=5, help="depth bound, or 'n'")
        p.set_defaults(func=func)

    p = sub.add_parser("depth", help="maximum depth of an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--radii")
    p.add_argument("--no-histogram", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("vuln", help="approximate most vulnerable location")
    p.add_argument("--instance", required=True)
    p.add_argument("--phi", default="linear", help="linear | exp | gaussian | table:<file>")
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c-vc", type=float, default=DEFAULT_C_VC)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--oracle-pitch", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_vuln)

    p = sub.add_parser("vuln-bench", help="vulnerability gate over many seeds")
    _experiment_args(p, "20", 50)
    p.add_argument("--phi", default="linear")
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--pitch", type=float, default=0.02)
    p.add_argument("--min-pass-rate", type=float, default=0.95)
    p.set_defaults(func=cmd_vuln_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # reported, not raised, so scripts get exit code 1
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
