import numpy as np
import pytest

from sdebvp.boundary import basic_form, preserves
from sdebvp.ode import check_wellposed
from sdebvp.suite import (
    MIN_SPACING,
    SuiteConfig,
    TheoremCheck,
    invariance_trials,
    mc_trial,
    random_pairs,
    random_problem,
    run_suite,
    sample_times,
    verify_problem,
)

from conftest import half_sum, lateral3


def test_random_problem_properties():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = random_problem(rng, h=0.01)
        assert 1 <= p.n <= 3 and len(p.boundary.points) <= 5
        assert check_wellposed(p).wellposed
        pts = np.array(p.boundary.points)
        assert np.allclose(pts / MIN_SPACING, np.round(pts / MIN_SPACING))


def test_random_pairs_avoid_support():
    rng = np.random.default_rng(4)
    p = random_problem(rng, h=0.01)
    for a, b in random_pairs(rng, p, 20):
        assert 0 <= a < b <= 1
        assert all(abs(t - a) > 1e-9 and abs(t - b) > 1e-9 for t in p.boundary.points)


def test_sample_times_sides():
    p = lateral3(h=0.01)
    inside, outside = sample_times(np.random.default_rng(0), p, 0.35, 0.8)
    assert all(0.35 < t < 0.8 for t in inside) and 0.6 in inside
    assert all(t < 0.35 or t > 0.8 for t in outside) and {0.0, 0.3, 1.0} <= set(outside)


def test_verify_fixed_problem():
    p = half_sum(h=0.01)
    cfg = SuiteConfig(h=0.01)
    res = verify_problem(p, [(0.1, 0.3), (0.3, 0.7), (0.6, 0.9)], [0.25, 0.75], cfg, np.random.default_rng(0))
    pairs = res.of_kind("pair")
    assert [c.predicted_independent for c in pairs] == [True, False, True]
    assert not res.failures
    assert [c.predicted_independent for c in res.of_kind("split")] == [True, False]


def test_small_suite_green():
    res = run_suite(SuiteConfig(n_problems=4, pairs_per_problem=4, seed=11, h=0.01))
    assert res.checks and not res.failures


def test_check_without_verdict_fails():
    c = TheoremCheck("enlarged-inside", 0, 0.1, 0.2, True, None, note="endpoint in support")
    assert not c.passed


def test_invariance_small():
    assert all(invariance_trials(trials=5, bases=4, seed=2))


def test_mc_trial_small():
    t = mc_trial(np.random.default_rng(1), 4000, h=0.01)
    assert len(t.labels) == 4 and np.isfinite(t.max_z)
