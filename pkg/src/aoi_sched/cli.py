"""Command-line entry point: ``aoi-sched {solve,simulate,policymap,sweep}``.

Exit codes: 0 success, 2 validation error, 3 solver failure (non-convergence
or a non-threshold-shaped policy). Log level comes from ``AOI_SCHED_LOG``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import Params, State, default_delta_m, dumps, epoch_coords
from .mdp import NonConvergenceError, SolveConfig, ThresholdShapeError, extract_thresholds, solve_rvi, solve_structured
from .policies import Tabular, Threshold, parse_policy_spec
from .sim import SWEEP_HEADER, SWEEP_POLICIES, SimConfig, simulate, sweep

log = logging.getLogger("aoi_sched")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 2, 3


class UsageError(ValueError):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def manifest(argv, config: dict, seeds: dict | None = None, inputs: dict | None = None) -> dict:
    return {
        "tool": "aoi-sched",
        "version": __version__,
        "command": list(argv),
        "config": config,
        "seeds": seeds or {},
        "inputs": inputs or {},
    }


def _write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode()
    path.write_bytes(data)
    return _sha256(data)


def _write_csv(path: Path, header, rows, man: dict) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    digest = _write(path, buf.getvalue())
    man = dict(man, outputs={path.name: digest})
    _write(path.with_name(path.name + ".manifest.json"), dumps(man))


def _params(args) -> Params:
    try:
        delta_m = args.delta_m or default_delta_m(args.p, args.d)
        return Params(args.p, args.d, delta_m)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from exc


def _solve(args, params: Params):
    cfg = SolveConfig(tol=args.tol, max_iters=args.max_iters, trace_path=getattr(args, "trace", None))
    policy = solve_structured(params, cfg)
    if getattr(args, "verify", False):
        plain = solve_rvi(params, SolveConfig(tol=args.tol, max_iters=args.max_iters))
        if not policy.same_actions(plain) or abs(policy.avg_cost - plain.avg_cost) >= 1e-8:
            raise NonConvergenceError(float("nan"), policy.iterations)
        print("verified: structured == plain")
    return policy, extract_thresholds(policy)


def _solve_config(args) -> dict:
    return {"tol": args.tol, "max_iters": args.max_iters}


def cmd_solve(args, argv) -> int:
    params = _params(args)
    policy, tp = _solve(args, params)
    out = Path(args.out)
    man = manifest(argv, {**params.to_dict(), **_solve_config(args), "verify": args.verify})
    for name, obj in (("policy_tabular.json", policy), ("policy_threshold.json", tp)):
        _write(out / name, dumps({**obj.to_dict(), "manifest": man}))
    print(f"K={tp.K} tau={','.join(map(str, tp.tau))} avg_cost={policy.avg_cost:.10f}")
    return EXIT_OK


def cmd_simulate(args, argv) -> int:
    params = _params(args)
    try:
        kind = parse_policy_spec(args.policy)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"bad policy spec {args.policy!r}: {exc}") from exc
    inputs = {}
    if isinstance(kind, (Threshold, Tabular)):
        path = args.policy.partition(":")[2]
        inputs[path] = _sha256(Path(path).read_bytes())
        if kind.policy.params.p != params.p or kind.policy.params.d != params.d:
            raise UsageError("policy file was solved for a different (p, d)")
        if isinstance(kind, Tabular):
            params = kind.policy.params
    try:
        cfg = SimConfig(params, args.T, args.seed, args.epoch_cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = simulate(kind, cfg)
    man = manifest(
        argv,
        {**params.to_dict(), "T": args.T, "epoch_cap": args.epoch_cap, "policy": args.policy},
        {"seed": args.seed, "rng": report.rng},
        inputs,
    )
    text = dumps({**report.to_dict(), "manifest": man})
    if args.out:
        _write(Path(args.out), text)
    print(text, end="")
    return EXIT_OK


def cmd_policymap(args, argv) -> int:
    params = _params(args)
    policy, tp = _solve(args, params)
    out = Path(args.out)
    man = manifest(argv, {**params.to_dict(), **_solve_config(args)})
    d = params.d
    state_rows, epoch_rows = [], []
    for delta in range(d, params.delta_m + 1):
        for l in range(d):
            s = State(delta, l, 1)
            act = policy.action_of(s).name
            state_rows.append((delta, l, act))
            coords = epoch_coords(s, d, params.delta_m)
            if coords:
                epoch_rows.append((*coords, act))
    epoch_rows.sort()
    _write_csv(out / "state_map.csv", ("delta", "l", "action"), state_rows, man)
    _write_csv(out / "epoch_map.csv", ("i", "j", "action"), epoch_rows, man)
    print(f"K={tp.K} tau={','.join(map(str, tp.tau))}")
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            n = int(round((stop - start) / step))
            return [round(start + k * step, 10) for k in range(n + 1)]
        return [float(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}") from exc


def cmd_sweep(args, argv) -> int:
    grid = _parse_grid(args.p_grid)
    if not grid:
        raise UsageError("empty p grid")
    for p in grid:
        if not 0 < p <= 1:
            raise UsageError(f"grid point {p} outside (0, 1]")
    policies = [x for x in args.policies.split(",") if x]
    if set(policies) - set(SWEEP_POLICIES):
        raise UsageError(f"policies must come from {SWEEP_POLICIES}")
    rows = sweep(policies, grid, args.d, args.T, args.seed, args.method, args.jobs, args.delta_m)
    man = manifest(
        argv,
        {"p_grid": grid, "d": args.d, "T": args.T, "method": args.method, "policies": policies, "delta_m": args.delta_m},
        {"seed": args.seed},
    )
    table = [[r[k] for k in SWEEP_HEADER] for r in rows]
    _write_csv(Path(args.out), SWEEP_HEADER, table, man)
    for r in rows:
        print(f"p={r['p']:.4g} {r['policy']:<16} avg_aoi={r['avg_aoi']:.6f} gap={r['gap_vs_myopic']:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aoi-sched", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def instance(p, with_p=True):
        if with_p:
            p.add_argument("--p", type=float, required=True, help="arrival probability per slot")
        p.add_argument("--d", type=int, required=True, help="transmission length in slots")
        p.add_argument("--delta-m", type=int, default=None, help="AoI truncation (default max(10d, ceil(4/p)+d))")

    def solver(p):
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--max-iters", type=int, default=100_000)

    s = sub.add_parser("solve", help="solve the MDP and write policy JSON")
    instance(s)
    solver(s)
    s.add_argument("--verify", action="store_true", help="cross-check against plain value iteration")
    s.add_argument("--trace", default=None, help="write per-iteration spans to this CSV")
    s.add_argument("--out", default=".", help="output directory")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", help="Monte Carlo run of one policy")
    s.add_argument("policy", help="myopic | always-switch | threshold:<file.json> | tabular:<file.json>")
    instance(s)
    s.add_argument("--T", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epoch-cap", type=int, default=100_000)
    s.add_argument("--out", default=None, help="write the report JSON here as well")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("policymap", help="state-space and epoch-coordinate action maps")
    instance(s)
    solver(s)
    s.add_argument("--out", default=".", help="output directory")
    s.set_defaults(func=cmd_policymap)

    s = sub.add_parser("sweep", help="optimal-vs-myopic gap over a grid of p")
    s.add_argument("--p-grid", default="0.01:0.99:0.02", help="a,b,c or start:stop:step")
    instance(s, with_p=False)
    s.add_argument("--T", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--method", choices=("exact", "sim"), default="exact")
    s.add_argument("--policies", default="myopic,optimal")
    s.add_argument("--out", default="sweep.csv")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("AOI_SCHED_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ThresholdShapeError as exc:
        print(f"error: policy is not threshold-shaped: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
