"""Problem instance, MDP state/action, and policy value types."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

SCHEMA_VERSION = 1


class Action(enum.IntEnum):
    """Source decision in a slot. SKIP continues (or idles); SWITCH starts the new arrival."""

    SKIP = 0
    SWITCH = 1


@dataclass(frozen=True)
class Params:
    """One problem instance: arrival probability, service length, AoI truncation."""

    p: float
    d: int
    delta_m: int

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"arrival probability must lie in (0, 1], got {self.p}")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"transmission length d must be an integer >= 2, got {self.d}")
        if int(self.delta_m) != self.delta_m or self.delta_m <= self.d:
            raise ValueError(f"delta_m must be an integer > d={self.d}, got {self.delta_m}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "delta_m", int(self.delta_m))
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def with_default_truncation(cls, p: float, d: int) -> "Params":
        return cls(p, d, default_delta_m(p, d))

    @property
    def n_delta(self) -> int:
        return self.delta_m - self.d + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        """Dense state-array shape (delta, l, a)."""
        return (self.n_delta, self.d, 2)

    @property
    def n_states(self) -> int:
        return self.n_delta * self.d * 2

    def states(self) -> Iterator["State"]:
        for delta in range(self.d, self.delta_m + 1):
            for l in range(self.d):
                for a in (0, 1):
                    yield State(delta, l, a)

    def index(self, s: "State") -> tuple[int, int, int]:
        """Dense array index of ``s``; delta is clamped to delta_m."""
        if s.delta < self.d or not (0 <= s.l < self.d) or s.a not in (0, 1):
            raise ValueError(f"{s} outside the state space of {self}")
        return (min(s.delta, self.delta_m) - self.d, s.l, s.a)

    def to_dict(self) -> dict:
        return {"p": self.p, "d": self.d, "delta_m": self.delta_m}


def default_delta_m(p: float, d: int) -> int:
    """Truncation heuristic: max(10 d, ceil(4/p) + d)."""
    return max(10 * d, math.ceil(4.0 / p) + d)


def tail_delta_m(p: float, d: int, eps: float = 1e-14) -> int:
    """Truncation large enough that the neglected geometric tail is below ``eps``.

    The first arrival of an epoch is geometric, so the AoI reaches delta_m
    with probability about (1-p)**(delta_m - 2d); the extra factor covers the
    quadratic growth of the cost carried by that tail.
    """
    base = default_delta_m(p, d)
    if p >= 1.0:
        return base
    q = 1.0 - p
    n = math.ceil(math.log(eps * p * p) / math.log(q))
    return max(base, n + 2 * d)


class State(NamedTuple):
    """MDP state: AoI ``delta``, age ``l`` of the unfinished update (0 = idle), arrival flag ``a``."""

    delta: int
    l: int
    a: int


def epoch_coords(s: State, d: int, delta_m: int | None = None) -> tuple[int, int] | None:
    """Map a busy state to (i, j): in-service arrival slot and current slot within the epoch.

    Inside an epoch the AoI at relative slot j is d + j - 1 and the
    in-service update has age l = j - i. Returns None when idle, at the
    truncation boundary, or when the state cannot occur inside an epoch
    (l >= j).
    """
    if s.l == 0:
        return None
    if delta_m is not None and s.delta >= delta_m:
        return None
    j = s.delta - d + 1
    i = j - s.l
    if i < 1:
        return None
    return i, j


def state_at(i: int, j: int, d: int, a: int = 1) -> State:
    """Inverse of :func:`epoch_coords`."""
    if not (1 <= i < j <= i + d - 1):
        raise ValueError(f"(i={i}, j={j}) is not a busy epoch slot for d={d}")
    return State(d + j - 1, j - i, a)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Action for every truncated state plus the average cost it achieves.

    ``switch`` and ``values`` are dense arrays indexed by
    ``params.index(state)``; both are read-only.
    """

    params: Params
    switch: np.ndarray
    avg_cost: float
    values: np.ndarray | None = None
    iterations: int = 0
    span: float = float("nan")

    def __post_init__(self):
        sw = np.asarray(self.switch, dtype=bool)
        if sw.shape != self.params.shape:
            raise ValueError(f"action table shape {sw.shape} != {self.params.shape}")
        if sw[..., 0].any():
            raise ValueError("SWITCH is only legal in states with an arrival (a = 1)")
        object.__setattr__(self, "switch", _frozen(sw))
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != self.params.shape:
                raise ValueError(f"value table shape {vals.shape} != {self.params.shape}")
            object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "avg_cost", float(self.avg_cost))

    def action_of(self, s: State) -> Action:
        return Action(int(self.switch[self.params.index(s)]))

    def value_of(self, s: State) -> float:
        if self.values is None:
            raise ValueError("policy was loaded without relative values")
        return float(self.values[self.params.index(s)])

    def same_actions(self, other: "TabularPolicy") -> bool:
        return self.params == other.params and np.array_equal(self.switch, other.switch)

    def to_dict(self) -> dict:
        deltas, ls = np.nonzero(self.switch[..., 1])
        return {
            "schema": f"aoi-sched/tabular-policy/v{SCHEMA_VERSION}",
            **self.params.to_dict(),
            "avg_cost": self.avg_cost,
            "switch": [[int(k) + self.params.d, int(l)] for k, l in zip(deltas, ls)],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TabularPolicy":
        params = Params(obj["p"], obj["d"], obj["delta_m"])
        sw = np.zeros(params.shape, dtype=bool)
        for delta, l in obj["switch"]:
            sw[params.index(State(delta, l, 1))] = True
        return cls(params, sw, obj["avg_cost"])


@dataclass(frozen=True)
class ThresholdPolicy:
    """Multi-threshold rule: switch iff the in-service update arrived at slot i <= K
    and the new arrival comes at slot j <= tau[i-1]."""

    params: Params
    K: int
    tau: tuple[int, ...] = field(default=())

    def __post_init__(self):
        tau = tuple(int(t) for t in self.tau)
        object.__setattr__(self, "tau", tau)
        if self.K < 0 or len(tau) != self.K:
            raise ValueError(f"need exactly K={self.K} thresholds, got {len(tau)}")
        for i, t in enumerate(tau, start=1):
            if t < i:
                raise ValueError(f"tau_{i}={t} < {i}")
        if any(a < b for a, b in zip(tau, tau[1:])):
            raise ValueError(f"thresholds must be non-increasing, got {tau}")

    @classmethod
    def myopic(cls, params: Params) -> "ThresholdPolicy":
        return cls(params, 0, ())

    def threshold(self, i: int) -> int:
        """tau_i, or i itself (never switch) for i > K."""
        return self.tau[i - 1] if 1 <= i <= self.K else i

    def switches(self, i: int, j: int) -> bool:
        return i <= self.K and j <= self.tau[i - 1]

    def to_dict(self) -> dict:
        return {
            "schema": f"aoi-sched/threshold-policy/v{SCHEMA_VERSION}",
            **self.params.to_dict(),
            "K": self.K,
            "tau": list(self.tau),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ThresholdPolicy":
        return cls(Params(obj["p"], obj["d"], obj["delta_m"]), obj["K"], tuple(obj["tau"]))


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def load_policy(path) -> TabularPolicy | ThresholdPolicy:
    with open(path) as fh:
        obj = json.load(fh)
    if "switch" in obj:
        return TabularPolicy.from_dict(obj)
    return ThresholdPolicy.from_dict(obj)
