"""Truncated average-cost MDP for the switch/skip problem.

States are stored densely as ``(delta - d, l, a)``. Both solvers run
synchronous relative value iteration

    V'(s) = min_a [C(s, a) + sum_s' P(s'|s, a) V(s')] - V(s0)

and differ only in how the minimizing action is chosen for arrival states.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .core import Action, Params, State, TabularPolicy, ThresholdPolicy

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    def __init__(self, span: float, iterations: int):
        super().__init__(
            f"value iteration did not converge in {iterations} iterations "
            f"(last span {span:.3e}); check delta_m and tol"
        )
        self.span = span
        self.iterations = iterations


class ReducibleChainError(RuntimeError):
    pass


class ThresholdShapeError(ValueError):
    """The action table is not of multi-threshold shape.

    ``violations`` lists the offending (i, j) epoch slots.
    """

    def __init__(self, message: str, violations: list[tuple[int, int]]):
        super().__init__(f"{message}: {violations[:20]}{' ...' if len(violations) > 20 else ''}")
        self.violations = violations


class Transition(NamedTuple):
    next: State
    prob: float


@dataclass(frozen=True)
class SolveConfig:
    """Stopping rule and numerics for the value-iteration solvers.

    ``aperiodicity`` mixes each update with the previous iterate,
    V' = tau*V + (1-tau)*(...). This scales the per-step gain by (1-tau),
    which is undone when reporting, and leaves the relative values and the
    optimal actions unchanged. It is needed when p = 1, where every policy
    induces a periodic chain. ``trace_path`` dumps per-iteration spans as CSV.
    """

    tol: float = 1e-9
    max_iters: int = 100_000
    reference_state: State | None = None
    aperiodicity: float = 0.5
    trace_path: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (0.0 <= self.aperiodicity < 1.0):
            raise ValueError("aperiodicity must lie in [0, 1)")


def _check_legal(s: State, act: Action) -> None:
    if act == Action.SWITCH and s.a != 1:
        raise ValueError(f"SWITCH is illegal in {s}: no arrival")


def _next_delta(delta: int, params: Params) -> int:
    return min(delta + 1, params.delta_m)


def transitions(s: State, act: Action, params: Params) -> list[Transition]:
    """Successor distribution of ``s`` under ``act``."""
    _check_legal(s, act)
    params.index(s)
    d = params.d
    if act == Action.SWITCH:
        base = (_next_delta(s.delta, params), 1)
    elif s.l == 0:
        base = (_next_delta(s.delta, params), 0)
    elif s.l < d - 1:
        base = (_next_delta(s.delta, params), s.l + 1)
    else:
        base = (d, 0)
    return [
        Transition(State(*base, 1), params.p),
        Transition(State(*base, 0), 1.0 - params.p),
    ]


def cost(s: State, act: Action, d: int) -> float:
    """Instantaneous AoI after the action: d on a completion, delta + 1 otherwise."""
    _check_legal(s, act)
    if s.l == d - 1 and act == Action.SKIP:
        return float(d)
    return float(s.delta + 1)


class _Kernel:
    """Vectorized successor indices and costs on the (delta, l) grid."""

    def __init__(self, params: Params):
        self.params = params
        n, d = params.n_delta, params.d
        self.next_k = np.minimum(np.arange(n) + 1, n - 1)
        # successor (delta index, l) under SKIP
        self.skip_k = np.repeat(self.next_k[:, None], d, axis=1)
        self.skip_l = np.tile(np.minimum(np.arange(d) + 1, d - 1), (n, 1))
        self.skip_l[:, 0] = 0
        self.skip_k[:, d - 1] = 0
        self.skip_l[:, d - 1] = 0
        aoi_next = (np.arange(params.d, params.delta_m + 1) + 1.0)[:, None]
        self.cost_switch = np.repeat(aoi_next, d, axis=1)
        self.cost_skip = self.cost_switch.copy()
        self.cost_skip[:, d - 1] = d

    def expected_next(self, V: np.ndarray) -> np.ndarray:
        p = self.params.p
        return p * V[..., 1] + (1.0 - p) * V[..., 0]

    def q_values(self, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One-step costs-to-go of SKIP and SWITCH on the (delta, l) grid."""
        W = self.expected_next(V)
        q_skip = self.cost_skip + W[self.skip_k, self.skip_l]
        q_switch = self.cost_switch + W[self.next_k, 1][:, None]
        return q_skip, q_switch


Chooser = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _greedy(q_skip: np.ndarray, q_switch: np.ndarray) -> np.ndarray:
    # strict: ties go to SKIP
    return q_switch < q_skip


def _structured(q_skip: np.ndarray, q_switch: np.ndarray) -> np.ndarray:
    """Action selection for arrival states using the multi-threshold structure.

    States are visited with delta increasing and, within a row, l increasing.
    A SKIP at (delta', l) forces SKIP for every larger delta in column l; a
    SWITCH at (delta, l') with l' >= 1 forces SWITCH for every larger l in
    that row. Only states fixed by neither rule consult the minimization.
    Rows are handled as bitmasks over l.
    """
    n, d = q_skip.shape
    weights = 1 << np.arange(d, dtype=np.int64) if d < 63 else np.array([1 << l for l in range(d)], dtype=object)
    greedy_rows = (_greedy(q_skip, q_switch).astype(weights.dtype) * weights).sum(axis=1).tolist()
    full = (1 << d) - 1
    busy = full & ~1
    col_skip = 0
    rows = []
    for g in greedy_rows:
        free = full & ~col_skip
        lead = g & free & busy
        row = (free & busy & ~((lead & -lead) - 1)) if lead else 0
        row |= g & free & 1
        rows.append(row)
        col_skip |= full & ~row
    if d < 63:
        bits = np.array(rows, dtype=np.int64)[:, None] >> np.arange(d, dtype=np.int64)
        return (bits & 1).astype(bool)
    return np.array([[(r >> l) & 1 for l in range(d)] for r in rows], dtype=bool)


def _solve(params: Params, cfg: SolveConfig | None, choose: Chooser) -> TabularPolicy:
    cfg = cfg or SolveConfig()
    kern = _Kernel(params)
    ref = params.index(cfg.reference_state or State(params.d, 0, 0))
    mix = cfg.aperiodicity
    V = np.zeros(params.shape)
    trace = [] if cfg.trace_path else None
    span = float("inf")
    for it in range(1, cfg.max_iters + 1):
        q_skip, q_switch = kern.q_values(V)
        switch = choose(q_skip, q_switch)
        TV = np.empty_like(V)
        TV[..., 0] = q_skip
        TV[..., 1] = np.where(switch, q_switch, q_skip)
        if mix:
            TV = (1.0 - mix) * TV + mix * V
        V_new = TV - V[ref]
        diff = V_new - V
        span = float(diff.max() - diff.min())
        if trace is not None:
            trace.append((it, span, float(np.abs(diff).max())))
        drift = float(TV[ref] - V[ref]) / (1.0 - mix)
        V = V_new
        if span < cfg.tol:
            break
    else:
        _write_trace(cfg.trace_path, trace)
        raise NonConvergenceError(span, cfg.max_iters)
    _write_trace(cfg.trace_path, trace)
    log.debug("converged after %d iterations, span %.3e, gain %.12g", it, span, drift)

    table = np.zeros(params.shape, dtype=bool)
    table[..., 1] = switch
    values = V - V[ref]
    return TabularPolicy(params, table, drift, values, iterations=it, span=span)


def _write_trace(path: str | None, rows) -> None:
    if not path:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "span", "sup_norm"])
        for it, span, sup in rows:
            w.writerow([it, repr(span), repr(sup)])


def solve_rvi(params: Params, cfg: SolveConfig | None = None) -> TabularPolicy:
    """Plain relative value iteration: minimize over both actions in every arrival state."""
    return _solve(params, cfg, _greedy)


def solve_structured(params: Params, cfg: SolveConfig | None = None) -> TabularPolicy:
    """Structured value iteration: arrival states whose action is implied by an
    already-decided neighbour (smaller AoI, or older in-service update) are
    not minimized."""
    return _solve(params, cfg, _structured)


def policy_chain(policy: TabularPolicy) -> tuple[sp.csr_matrix, np.ndarray]:
    """Transition matrix and per-state cost of the chain induced by ``policy``."""
    params = policy.params
    kern = _Kernel(params)
    n, d = params.n_delta, params.d
    sw = policy.switch
    succ_k = np.empty(params.shape, dtype=np.int64)
    succ_l = np.empty(params.shape, dtype=np.int64)
    costs = np.empty(params.shape)
    for a in (0, 1):
        succ_k[..., a] = np.where(sw[..., a], kern.next_k[:, None], kern.skip_k)
        succ_l[..., a] = np.where(sw[..., a], 1, kern.skip_l)
        costs[..., a] = np.where(sw[..., a], kern.cost_switch, kern.cost_skip)
    base = (succ_k * d + succ_l) * 2
    rows = np.arange(params.n_states)
    p = params.p
    data = np.concatenate([np.full(params.n_states, p), np.full(params.n_states, 1.0 - p)])
    P = sp.csr_matrix(
        (data, (np.concatenate([rows, rows]), np.concatenate([base.ravel() + 1, base.ravel()]))),
        shape=(params.n_states, params.n_states),
    )
    P.eliminate_zeros()
    return P, costs.ravel()


def stationary_distribution(P: sp.csr_matrix) -> np.ndarray:
    """Unique stationary distribution of a unichain transition matrix."""
    n_comp, labels = connected_components(P, directed=True, connection="strong")
    if n_comp > 1:
        coo = P.tocoo()
        leaving = labels[coo.row] != labels[coo.col]
        open_comp = np.unique(labels[coo.row[leaving]])
        n_closed = n_comp - len(open_comp)
        if n_closed != 1:
            raise ReducibleChainError(f"policy chain has {n_closed} closed classes")
    n = P.shape[0]
    A = (P.T - sp.identity(n, format="csr")).tolil()
    A[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    pi = spsolve(A.tocsc(), rhs)
    return pi


def evaluate_stationary(policy: TabularPolicy) -> float:
    """Average cost of ``policy`` from the stationary distribution of its chain."""
    P, c = policy_chain(policy)
    pi = stationary_distribution(P)
    return float(pi @ c)


def _scan_limit(params: Params) -> int:
    # largest epoch slot j whose AoI d + j - 1 is still below delta_m
    return params.delta_m - params.d


def extract_thresholds(policy: TabularPolicy) -> ThresholdPolicy:
    """Read the multi-threshold representation off a solved action table.

    For every in-service arrival slot i, tau_i is the last slot j whose
    arrival is switched to. A threshold equal to i + d - 1 means every
    arrival during that service is switched to, so any larger value
    describes the same behaviour; such saturated thresholds are raised to
    their successor's value to give the non-increasing representation.
    """
    params = policy.params
    d = params.d
    jmax = _scan_limit(params)
    holes: list[tuple[int, int]] = []
    raw: list[int] = []
    for i in range(1, jmax):
        last = i
        for j in range(i + 1, min(i + d - 1, jmax) + 1):
            if policy.switch[params.index(State(d + j - 1, j - i, 1))]:
                holes.extend((i, jj) for jj in range(last + 1, j))
                last = j
        raw.append(last)
    if holes:
        raise ThresholdShapeError("switch region is not contiguous in j", holes)

    K = max((i for i, t in enumerate(raw, start=1) if t > i), default=0)
    gaps = [(i, raw[i - 1]) for i in range(1, K) if raw[i - 1] == i]
    if gaps:
        raise ThresholdShapeError("in-service slots below K that never switch", gaps)

    tau = raw[:K]
    for i in range(K - 1, 0, -1):
        if tau[i - 1] == i + d - 1:
            tau[i - 1] = max(tau[i - 1], tau[i])
    bad = [(i + 1, tau[i]) for i in range(K - 1) if tau[i] < tau[i + 1]]
    if bad:
        raise ThresholdShapeError("thresholds are not non-increasing", bad)
    return ThresholdPolicy(params, K, tuple(tau))


def tabular_from_thresholds(tp: ThresholdPolicy) -> TabularPolicy:
    """Action table of a threshold policy. Idle arrivals are transmitted;
    states that cannot occur inside an epoch (l >= j) or sit at the
    truncation boundary continue the current update."""
    params = tp.params
    d = params.d
    sw = np.zeros(params.shape, dtype=bool)
    sw[:, 0, 1] = True
    for i in range(1, tp.K + 1):
        for j in range(i + 1, min(tp.tau[i - 1], i + d - 1, _scan_limit(params)) + 1):
            sw[params.index(State(d + j - 1, j - i, 1))] = True
    return TabularPolicy(params, sw, float("nan"))
