"""Exact renewal-reward evaluation of multi-threshold policies.

An epoch of length X contributes per-slot AoI d, d+1, ..., d+X-1 (the
delivery slot counted as d), so the time-average AoI is

    d - 1/2 + E[X^2] / (2 E[X])

under per-slot accounting, and d + E[X^2] / (2 E[X]) under the
continuous-area convention R = (2d + X) X / 2. ``EpochStats.avg_aoi``
uses the latter; ``avg_aoi_slot`` is what the MDP and the simulator report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ThresholdPolicy

ENUMERATION_CAP = 30
_CHUNK_BITS = 20


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class EpochStats:
    mean_x: float
    mean_x2: float
    d: int
    mass: float = 1.0

    @property
    def avg_aoi(self) -> float:
        return self.d + self.mean_x2 / (2.0 * self.mean_x)

    @property
    def avg_aoi_slot(self) -> float:
        return self.avg_aoi - 0.5

    def to_dict(self) -> dict:
        return {"mean_x": self.mean_x, "mean_x2": self.mean_x2, "avg_aoi": self.avg_aoi}


def myopic_closed_form(p: float, d: int) -> EpochStats:
    """X = W + d - 1 with W ~ geometric(p) on {1, 2, ...}."""
    if not (0.0 < p <= 1.0) or d < 2:
        raise ValueError(f"need 0 < p <= 1 and d >= 2, got p={p}, d={d}")
    c = d - 1
    mean_x = 1.0 / p + c
    mean_x2 = (2.0 - p) / p**2 + 2.0 * c / p + c * c
    return EpochStats(mean_x, mean_x2, d)


def _tail_moments(p: float, K: int, d: int) -> tuple[float, float, float]:
    """Mass and first two moments of X over epochs whose first arrival is after K.

    Such an epoch has X = x1 + d - 1 with no switching possible.
    """
    q = 1.0 - p
    mass = q**K
    c = K + d - 1
    m1 = mass * (c + 1.0 / p)
    m2 = mass * (c * c + 2.0 * c / p + (2.0 - p) / p**2)
    return mass, m1, m2


def _replay(x1: int, window: int, tp: ThresholdPolicy, d: int, p: float, start: int, stop: int):
    """Replay the switching rule on arrival patterns ``start .. stop-1``.

    Bit k of a pattern index is an arrival at slot x1 + 1 + k. Returns the
    pattern probabilities and epoch lengths.
    """
    idx = np.arange(start, stop, dtype=np.int64)
    arrivals = np.zeros(idx.shape, dtype=np.int64)
    i = np.full(idx.shape, x1, dtype=np.int64)
    tau = np.array((0,) + tp.tau, dtype=np.int64)
    K = tp.K
    for k in range(window):
        j = x1 + 1 + k
        arrived = ((idx >> k) & 1).astype(bool)
        arrivals += arrived
        in_service = j <= i + d - 1
        eligible = i <= K
        thr = tau[np.minimum(i, K)]
        go = arrived & in_service & eligible & (j <= thr)
        i = np.where(go, j, i)
    prob = p**arrivals * (1.0 - p) ** (window - arrivals)
    return prob, (i + d - 1).astype(float)


def eval_threshold_exact(tp: ThresholdPolicy, p: float | None = None, d: int | None = None) -> EpochStats:
    """Exact E[X] and E[X^2] of a threshold policy.

    The first arrival x1 is always transmitted; for x1 > K no switch can
    happen and that geometric tail is summed in closed form. Otherwise the
    epoch is a walk over in-service arrival slots: from slot i <= K, the
    first arrival in (i, tau_i] is switched to and, if none comes, the epoch
    ends with X = i + d - 1. Arrival patterns are grouped by this walk, so
    the sum is exact without visiting each pattern.
    """
    p = tp.params.p if p is None else p
    d = tp.params.d if d is None else d
    q = 1.0 - p
    K = tp.K
    mass, m1, m2 = _tail_moments(p, K, d)
    if K == 0:
        return EpochStats(m1, m2, d, mass=mass)
    top = max(tp.tau)
    reach = [0.0] * (top + 1)
    for x1 in range(1, K + 1):
        reach[x1] = q ** (x1 - 1) * p
    masses, firsts, seconds = [mass], [m1], [m2]
    for i in range(1, top + 1):
        r = reach[i]
        if not r:
            continue
        if i <= K:
            window = min(tp.tau[i - 1], i + d - 1) - i
            for g in range(1, window + 1):
                reach[i + g] += r * q ** (g - 1) * p
            r *= q**window
        X = i + d - 1
        masses.append(r)
        firsts.append(r * X)
        seconds.append(r * X * X)
    return EpochStats(math.fsum(firsts), math.fsum(seconds), d, mass=math.fsum(masses))


def eval_threshold_enumerate(
    tp: ThresholdPolicy, p: float | None = None, d: int | None = None, cap: int = ENUMERATION_CAP
) -> EpochStats:
    """Same moments as :func:`eval_threshold_exact`, by replaying every arrival pattern.

    For x1 <= K each pattern over slots x1+1 .. tau_{x1} is replayed; later
    arrivals never trigger a switch because thresholds are non-increasing
    and the in-service slot only grows. Cost is 2**(tau_1 - 1) patterns, so
    this is a cross-check for small instances.
    """
    p = tp.params.p if p is None else p
    d = tp.params.d if d is None else d
    tau1 = tp.tau[0] if tp.K else 0
    if tau1 > cap:
        raise EnumerationTooLarge(f"tau_1={tau1} exceeds the enumeration cap {cap}; use eval_threshold_exact")
    mass, m1, m2 = _tail_moments(p, tp.K, d)
    masses, firsts, seconds = [mass], [m1], [m2]
    for x1 in range(1, tp.K + 1):
        p_x1 = (1.0 - p) ** (x1 - 1) * p
        window = tp.tau[x1 - 1] - x1
        total = 1 << window
        chunk = 1 << _CHUNK_BITS
        for start in range(0, total, chunk):
            prob, X = _replay(x1, window, tp, d, p, start, min(total, start + chunk))
            w = p_x1 * prob
            masses.append(math.fsum(w))
            firsts.append(math.fsum(w * X))
            seconds.append(math.fsum(w * X * X))
    return EpochStats(math.fsum(firsts), math.fsum(seconds), d, mass=math.fsum(masses))
