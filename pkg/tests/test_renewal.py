import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from aoi_sched.core import Params, ThresholdPolicy, default_delta_m, tail_delta_m
from aoi_sched.mdp import evaluate_stationary, extract_thresholds, solve_structured, tabular_from_thresholds
from aoi_sched.renewal import (
    EnumerationTooLarge,
    EpochStats,
    eval_threshold_enumerate,
    eval_threshold_exact,
    myopic_closed_form,
)


def summed_myopic(p, d, terms=40000):
    k = np.arange(1, terms + 1)
    w = (1 - p) ** (k - 1) * p
    x = k + d - 1
    return float(w @ x), float(w @ x**2)


@pytest.mark.parametrize(
    "p, d, mean_x, mean_x2, avg",
    [(1.0, 2, 2, 4, 3.0), (1.0, 3, 3, 9, 4.5), (0.5, 2, 3, 11, 2 + 11 / 6)],
)
def test_myopic_closed_form_examples(p, d, mean_x, mean_x2, avg):
    st_ = myopic_closed_form(p, d)
    assert st_.mean_x == pytest.approx(mean_x, abs=1e-12)
    assert st_.mean_x2 == pytest.approx(mean_x2, abs=1e-12)
    assert st_.avg_aoi == pytest.approx(avg, abs=1e-12)
    assert st_.avg_aoi_slot == pytest.approx(avg - 0.5, abs=1e-12)


def test_myopic_mean_at_low_rate():
    assert myopic_closed_form(0.07, 10).mean_x == pytest.approx(1 / 0.07 + 9, abs=1e-12)


@given(st.floats(0.02, 1.0), st.integers(2, 12))
def test_myopic_closed_form_matches_direct_sum(p, d):
    m1, m2 = summed_myopic(p, d)
    cf = myopic_closed_form(p, d)
    assert cf.mean_x == pytest.approx(m1, rel=1e-10)
    assert cf.mean_x2 == pytest.approx(m2, rel=1e-10)


@given(st.floats(0.01, 1.0), st.integers(2, 12))
def test_exact_with_no_thresholds_is_myopic(p, d):
    tp = ThresholdPolicy.myopic(Params(p, d, d + 1))
    a, b = eval_threshold_exact(tp), myopic_closed_form(p, d)
    assert abs(a.mean_x - b.mean_x) <= 1e-12 * b.mean_x
    assert abs(a.mean_x2 - b.mean_x2) <= 1e-12 * b.mean_x2
    assert abs(a.avg_aoi - b.avg_aoi) < 1e-12 * b.avg_aoi + 1e-12
    assert abs(a.mass - 1) < 1e-12


@st.composite
def threshold_policies(draw, max_tau=14):
    d = draw(st.integers(2, 6))
    p = draw(st.sampled_from([0.05, 0.2, 0.5, 0.9]))
    K = draw(st.integers(0, 6))
    tau, prev = [], max_tau
    for i in range(1, K + 1):
        hi = min(prev, i + d - 1)
        assume(hi >= i)
        t = draw(st.integers(i, hi))
        tau.append(t)
        prev = t
    return ThresholdPolicy(Params(p, d, d + 1), K, tuple(tau))


@settings(max_examples=150, deadline=None)
@given(threshold_policies())
def test_exact_matches_pattern_enumeration(tp):
    a, b = eval_threshold_exact(tp), eval_threshold_enumerate(tp)
    assert a.mean_x == pytest.approx(b.mean_x, rel=1e-12)
    assert a.mean_x2 == pytest.approx(b.mean_x2, rel=1e-12)
    assert abs(a.mass - 1) < 1e-12 and abs(b.mass - 1) < 1e-12


@settings(max_examples=150, deadline=None)
@given(threshold_policies())
def test_epoch_stats_invariants(tp):
    s = eval_threshold_exact(tp)
    assert s.mean_x2 >= s.mean_x**2
    assert s.avg_aoi >= tp.params.d
    assert s.mean_x >= tp.params.d


def test_enumeration_cap():
    tp = ThresholdPolicy(Params(0.03, 40, 400), 1, (31,))
    with pytest.raises(EnumerationTooLarge):
        eval_threshold_enumerate(tp)
    assert abs(eval_threshold_exact(tp).mass - 1) < 1e-12


@pytest.mark.parametrize(
    "tp",
    [
        ThresholdPolicy(Params(0.07, 10, 200), 4, (9, 8, 7, 6)),
        ThresholdPolicy(Params(0.3, 4, 60), 2, (4, 3)),
        ThresholdPolicy(Params(0.1, 6, 80), 5, (6, 6, 5, 5, 5)),
    ],
)
def test_exact_matches_linear_system(tp):
    """Renewal moments against the stationary distribution of the same rule."""
    p, d = tp.params.p, tp.params.d
    params = Params(p, d, max(default_delta_m(p, d), tail_delta_m(p, d)))
    tp = ThresholdPolicy(params, tp.K, tp.tau)
    lin = evaluate_stationary(tabular_from_thresholds(tp))
    assert abs(eval_threshold_exact(tp).avg_aoi_slot - lin) < 1e-9


def test_optimal_beats_myopic_with_longer_epochs():
    """The optimal rule lengthens epochs on average yet lowers the average AoI."""
    p, d = 0.07, 10
    params = Params(p, d, max(default_delta_m(p, d), tail_delta_m(p, d)))
    opt = eval_threshold_exact(extract_thresholds(solve_structured(params)))
    my = myopic_closed_form(p, d)
    print(f"\noptimal E[X]={opt.mean_x:.4f} E[X^2]={opt.mean_x2:.3f} avg={opt.avg_aoi:.6f}")
    print(f"myopic  E[X]={my.mean_x:.4f} E[X^2]={my.mean_x2:.3f} avg={my.avg_aoi:.6f}")
    assert opt.mean_x > my.mean_x
    assert opt.avg_aoi < my.avg_aoi


def test_to_dict_fields():
    assert set(myopic_closed_form(0.5, 2).to_dict()) == {"mean_x", "mean_x2", "avg_aoi"}
    assert EpochStats(3.0, 11.0, 2).avg_aoi == pytest.approx(2 + 11 / 6)
