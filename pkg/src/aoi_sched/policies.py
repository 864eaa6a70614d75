"""Policies the simulator and evaluators can run interchangeably.

Every policy transmits an arrival that finds the source idle. The
simulator calls :meth:`switch` with epoch coordinates it tracks itself;
:func:`decide` is the state-based entry point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .core import Action, State, TabularPolicy, ThresholdPolicy, epoch_coords, load_policy


@dataclass(frozen=True)
class Myopic:
    """Never switch: transmit the first arrival when idle and always finish it."""

    name = "myopic"

    def switch(self, delta: int, l: int, i: int, j: int) -> bool:
        return l == 0


@dataclass(frozen=True)
class AlwaysSwitch:
    name = "always-switch"

    def switch(self, delta: int, l: int, i: int, j: int) -> bool:
        return True


@dataclass(frozen=True)
class Threshold:
    policy: ThresholdPolicy
    name: str = "threshold"

    def switch(self, delta: int, l: int, i: int, j: int) -> bool:
        return l == 0 or self.policy.switches(i, j)


@dataclass(frozen=True, eq=False)
class Tabular:
    policy: TabularPolicy
    name: str = "tabular"

    def switch(self, delta: int, l: int, i: int, j: int) -> bool:
        return bool(self.policy.switch[self.policy.params.index(State(delta, l, 1))])


PolicyKind = Union[Myopic, AlwaysSwitch, Threshold, Tabular]


def decide(kind: PolicyKind, s: State, d: int | None = None) -> Action:
    """Action of ``kind`` in state ``s``.

    Threshold policies need the epoch coordinates of ``s``; ``d`` defaults to
    the policy's own transmission length.
    """
    if s.a == 0:
        return Action.SKIP
    if isinstance(kind, Tabular):
        return kind.policy.action_of(s)
    i = j = 0
    if s.l > 0 and isinstance(kind, Threshold):
        d = kind.policy.params.d if d is None else d
        coords = epoch_coords(s, d)
        if coords is None:
            raise ValueError(f"{s} has no epoch coordinates for d={d}")
        i, j = coords
    return Action.SWITCH if kind.switch(s.delta, s.l, i, j) else Action.SKIP


def parse_policy_spec(spec: str) -> PolicyKind:
    """``myopic | always-switch | threshold:<file.json> | tabular:<file.json>``."""
    if spec == "myopic":
        return Myopic()
    if spec == "always-switch":
        return AlwaysSwitch()
    kind, sep, path = spec.partition(":")
    if not sep or kind not in ("threshold", "tabular"):
        raise ValueError(f"unknown policy spec {spec!r}")
    pol = load_policy(path)
    if kind == "threshold":
        if isinstance(pol, TabularPolicy):
            raise ValueError(f"{path} holds a tabular policy, not thresholds")
        return Threshold(pol)
    if isinstance(pol, ThresholdPolicy):
        raise ValueError(f"{path} holds thresholds, not a tabular policy")
    return Tabular(pol)
