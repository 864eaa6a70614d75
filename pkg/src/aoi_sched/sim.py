"""Slot-level Monte Carlo simulation and policy sweeps.

Per slot the simulator draws the arrival, asks the policy, and charges the
post-action AoI: d on a delivery slot, delta + 1 otherwise. This is the
MDP's immediate cost, so simulated averages estimate the same quantity as
``TabularPolicy.avg_cost`` and ``EpochStats.avg_aoi_slot``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .core import Params, ThresholdPolicy
from .mdp import NonConvergenceError, SolveConfig, ThresholdShapeError, extract_thresholds, solve_structured
from .policies import AlwaysSwitch, Myopic, PolicyKind, Tabular, Threshold
from .renewal import eval_threshold_exact, myopic_closed_form

log = logging.getLogger(__name__)

RNG_NAME = "PCG64"
_CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    params: Params
    horizon_T: int
    seed: int = 0
    epoch_cap: int = 100_000

    def __post_init__(self):
        if self.horizon_T < 1:
            raise ValueError("horizon_T must be >= 1")
        if self.epoch_cap <= self.params.d:
            raise ValueError("epoch_cap must exceed d")


@dataclass(frozen=True)
class SimReport:
    avg_aoi: float
    n_epochs: int
    emp_mean_x: float
    emp_mean_x2: float
    censored: int
    std_err: float
    policy: str
    p: float
    d: int
    horizon_T: int
    seed: int
    rng: str = RNG_NAME

    def to_dict(self) -> dict:
        return asdict(self)


def arrivals(p: float, T: int, seed: int):
    """Bernoulli(p) arrival flags for slots 1..T, generated in fixed-size chunks."""
    rng = np.random.Generator(np.random.PCG64(seed))
    for start in range(0, T, _CHUNK):
        yield from (rng.random(min(_CHUNK, T - start)) < p).tolist()


def simulate(kind: PolicyKind, cfg: SimConfig) -> SimReport:
    d = cfg.params.d
    if isinstance(kind, Tabular) and kind.policy.params != cfg.params:
        raise ValueError("tabular policy was solved for different parameters")
    switch = kind.switch
    last = d - 1
    cap = cfg.epoch_cap

    delta, l = d, 0
    total = 0
    epoch_area = 0
    n = 0
    sx = sx2 = sr = sr2 = srx = 0
    censored = 0
    epoch_censored = False
    for arrived in arrivals(cfg.params.p, cfg.horizon_T, cfg.seed):
        j = delta - d + 1
        if arrived and switch(delta, l, j - l, j):
            l = 1
        elif l == last:
            # delivery: AoI resets to d in this slot
            total += d
            epoch_area += d
            if not epoch_censored:
                n += 1
                sx += j
                sx2 += j * j
                sr += epoch_area
                sr2 += epoch_area * epoch_area
                srx += epoch_area * j
            delta, l = d, 0
            epoch_area = 0
            epoch_censored = False
            continue
        elif l:
            l += 1
        total += delta + 1
        epoch_area += delta + 1
        delta += 1
        if j >= cap and not epoch_censored:
            epoch_censored = True
            censored += 1

    T = cfg.horizon_T
    if n:
        mean_x, mean_x2 = sx / n, sx2 / n
        ratio = sr / sx
        resid = sr2 - 2.0 * ratio * srx + ratio * ratio * sx2
        std_err = math.sqrt(max(resid, 0.0) * n / max(n - 1, 1)) / sx
    else:
        mean_x = mean_x2 = std_err = float("nan")
    return SimReport(
        avg_aoi=total / T,
        n_epochs=n,
        emp_mean_x=mean_x,
        emp_mean_x2=mean_x2,
        censored=censored,
        std_err=std_err,
        policy=getattr(kind, "name", type(kind).__name__),
        p=cfg.params.p,
        d=d,
        horizon_T=T,
        seed=cfg.seed,
    )


def cell_seed(seed: int, index: int) -> int:
    """Independent per-grid-point seed, shared by every policy at that point."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


SWEEP_POLICIES = ("myopic", "optimal", "always-switch")
SWEEP_HEADER = ("p", "policy", "avg_aoi", "gap_vs_myopic", "n_epochs", "censored")


def _exact_aoi(name: str, p: float, d: int, tp: ThresholdPolicy | None) -> float:
    if name == "myopic":
        return myopic_closed_form(p, d).avg_aoi_slot
    if name == "optimal":
        return eval_threshold_exact(tp).avg_aoi_slot
    raise ValueError(f"no exact evaluator for {name!r}")


def _sweep_cell(args) -> list[dict]:
    index, p, d, T, seed, names, method, delta_m = args
    params = Params(p, d, delta_m or Params.with_default_truncation(p, d).delta_m)
    tp = None
    solve_error = None
    if "optimal" in names:
        try:
            tp = extract_thresholds(solve_structured(params, SolveConfig()))
        except (NonConvergenceError, ThresholdShapeError) as exc:
            solve_error = exc
            log.warning("p=%g: %s", p, exc)

    results: dict[str, dict] = {}
    cfg = SimConfig(params, T, cell_seed(seed, index))
    for name in names:
        row = {"p": p, "policy": name, "avg_aoi": float("nan"), "n_epochs": "", "censored": ""}
        if name == "optimal" and tp is None:
            row["policy"] = f"optimal (failed: {type(solve_error).__name__})"
        elif method == "exact":
            try:
                row["avg_aoi"] = _exact_aoi(name, p, d, tp)
            except ValueError as exc:
                log.warning("p=%g %s: %s", p, name, exc)
        else:
            kind = {"myopic": Myopic(), "always-switch": AlwaysSwitch()}.get(name) or Threshold(tp)
            rep = simulate(kind, cfg)
            row.update(avg_aoi=rep.avg_aoi, n_epochs=rep.n_epochs, censored=rep.censored)
        results[name] = row
    base = results.get("myopic", {}).get("avg_aoi", float("nan"))
    for row in results.values():
        row["gap_vs_myopic"] = base - row["avg_aoi"]
    return [results[name] for name in names]


def sweep(
    kinds,
    p_grid,
    d: int,
    T: int = 1_000_000,
    seed: int = 0,
    method: str = "sim",
    jobs: int = 1,
    delta_m: int | None = None,
) -> list[dict]:
    """Average AoI of each policy over a grid of arrival probabilities.

    ``kinds`` are names from ``SWEEP_POLICIES``; "optimal" solves the MDP at
    every grid point. With ``method="sim"`` all policies at one grid point
    see the same arrival sample path. Cells run in ``jobs`` processes and
    rows come back in grid order.
    """
    names = list(kinds)
    if not p_grid:
        raise ValueError("empty p grid")
    unknown = set(names) - set(SWEEP_POLICIES)
    if unknown:
        raise ValueError(f"unknown sweep policies {sorted(unknown)}")
    if method not in ("sim", "exact"):
        raise ValueError(f"method must be 'sim' or 'exact', got {method!r}")
    tasks = [(k, float(p), d, T, seed, names, method, delta_m) for k, p in enumerate(p_grid)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_sweep_cell, tasks))
    else:
        cells = [_sweep_cell(t) for t in tasks]
    return [row for cell in cells for row in cell]
