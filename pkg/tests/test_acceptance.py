"""Acceptance criteria, one test per criterion.

Every test prints a single ``[PASS]``/``[FAIL]`` line (shown even under
output capture) before asserting, so ``pytest tests/test_acceptance.py``
doubles as a readable report.
"""

import time

import numpy as np
import pytest

from sdebvp.boundary import basic_form, regularity
from sdebvp.green import influence_table
from sdebvp.law import covariance_kernel, joint_law, support_rank
from sdebvp.ode import check_wellposed
from sdebvp.problem import make_problem
from sdebvp.sampler import perturbation_experiment, sample_solution, sample_wiener
from sdebvp.suite import SuiteConfig, invariance_trials, mc_trial, random_problem, run_suite

from conftest import brownian, half_sum, sinusoid_dirichlet


@pytest.fixture
def report(capsys):
    def emit(num, name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {num:>2} {name}: {detail}")
        return ok

    return emit


@pytest.fixture(scope="module")
def suite():
    t0 = time.perf_counter()
    res = run_suite(SuiteConfig(n_problems=20, pairs_per_problem=10, seed=0))
    return res, time.perf_counter() - t0


def test_01_golden_example(report):
    t0 = time.perf_counter()
    p = half_sum()
    grid = p.grid
    g = influence_table(p, grid, "right")[:, :-1, 0]
    s = grid[:-1]
    closed = 0.5 * (s >= 0.5)[None, :] - (grid[:, None] <= s[None, :])
    kern_err = float(np.max(np.abs(g - closed)))
    var = covariance_kernel(p, 0.5, 0.5)[0, 0]
    i = p.node_index(0.5)
    path_err = 0.0
    for stream in range(20):
        w = sample_wiener(grid, 2024, stream)
        y = sample_solution(p, w).values[:, 0]
        path_err = max(path_err, float(np.max(np.abs(y + 0.5 * (w.values[i] + w.values[-1]) - w.values))))
    dt = time.perf_counter() - t0
    ok = kern_err <= 1e-10 and abs(var - 0.125) <= 1e-6 and path_err <= 1e-10 and dt < 5
    report(1, "golden example", ok, f"kernel err {kern_err:.1e}, Var X(1/2) {var:.9f}, path err {path_err:.1e}, {dt:.2f}s")
    assert ok


def test_02_wellposedness(report):
    t0 = time.perf_counter()
    d1 = check_wellposed(half_sum()).det
    d2 = check_wellposed(make_problem([0.0], [0.5, 1.0], [[1.0, -1.0]])).det
    dpi = check_wellposed(make_problem([np.pi**2, 0.0], [0.0, 1.0], np.eye(2)))
    dt = time.perf_counter() - t0
    ok = abs(d1 - 2) <= 1e-8 and abs(d2) <= 1e-8 and not dpi.wellposed and dt < 5
    report(2, "well-posedness", ok, f"det {d1:.10f}, det {d2:.1e}, pi-Dirichlet wellposed={dpi.wellposed}, {dt:.2f}s")
    assert ok


def test_03_preserved_pairs_independent(report, suite):
    res, dt = suite
    checks = [c for c in res.of_kind("pair") if c.predicted_independent]
    worst = max(c.verdict.normalized for c in checks)
    ok = all(c.passed for c in checks) and len(checks) > 0 and dt < 300
    report(3, "preserved pairs independent", ok, f"{len(checks)} pairs, max normalized {worst:.1e}, suite {dt:.1f}s")
    assert ok


def test_04_nonpreserved_pairs_dependent(report, suite):
    res, _ = suite
    checks = [c for c in res.of_kind("pair") if not c.predicted_independent]
    least = min(c.verdict.normalized for c in checks)
    ok = all(c.passed for c in checks) and len(checks) > 0
    report(4, "non-preserved pairs dependent", ok, f"{len(checks)} pairs, min normalized {least:.1e}")
    assert ok


def test_05_enlarged_conditioning(report, suite):
    res, _ = suite
    checks = res.of_kind("enlarged-inside", "enlarged-outside")
    worst = max(c.verdict.normalized for c in checks)
    ok = all(c.passed for c in checks) and len(checks) > 0
    report(5, "enlarged conditioning", ok, f"{len(checks)} checks, max normalized {worst:.1e}")
    assert ok


def test_06_past_future_split(report, suite):
    res, _ = suite
    checks = res.of_kind("split")
    yes = [c for c in checks if c.predicted_independent]
    no = [c for c in checks if not c.predicted_independent]
    ok = all(c.passed for c in checks) and yes and no
    report(6, "past/future split", ok, f"{len(yes)} one-sided, {len(no)} straddling, failures {sum(not c.passed for c in checks)}")
    assert ok


def test_07_basis_invariance(report):
    t0 = time.perf_counter()
    verdicts = invariance_trials(trials=50, bases=10, seed=0)
    dt = time.perf_counter() - t0
    ok = all(verdicts)
    report(7, "basis invariance", ok, f"{sum(verdicts)}/50 trials agree, {dt:.1f}s")
    assert ok


def test_08_regular_and_singular(report, suite):
    p = sinusoid_dirichlet()
    bf = basic_form(p)
    sing = regularity(p, bf, 0.2, 0.2 + np.pi / 4)
    reg = regularity(p, bf, 0.2, 0.7)
    res, _ = suite
    split = [c for c in res.splitting if c.regular]
    min_ratio = min(c.ratio for c in split if c.ratio is not None)
    ok = (
        not sing.regular
        and abs(sing.dets[1]) <= 1e-6
        and reg.regular
        and split
        and all(c.passed for c in res.splitting)
    )
    report(
        8,
        "regular/singular",
        ok,
        f"middle det {sing.dets[1]:.1e} (pi/4), regular at 0.5={reg.regular}, "
        f"{len(split)} regular pairs, min splitting ratio {min_ratio:.1e}",
    )
    assert ok


def test_09_kernel_and_mc(report):
    t0 = time.perf_counter()
    bm = brownian()
    nodes = np.linspace(0, 1, 21)
    cov = joint_law(bm, [(t, 1) for t in nodes]).cov
    kern_err = float(np.max(np.abs(cov - np.minimum.outer(nodes, nodes))))
    rng = np.random.default_rng(9)
    trials = [mc_trial(rng, 100_000) for _ in range(20)]
    frac = sum(t.passed for t in trials) / len(trials)
    dt = time.perf_counter() - t0
    ok = kern_err <= 1e-6 and frac >= 0.95 and dt < 120
    report(9, "kernel and Monte Carlo", ok, f"min-kernel err {kern_err:.1e}, MC within 4 stderr {frac:.0%}, {dt:.1f}s")
    assert ok


def test_10_support_rank(report):
    rng = np.random.default_rng(10)
    worst, good = 0.0, 0
    for _ in range(10):
        p = random_problem(rng, h=2e-3)
        extra = rng.choice(np.arange(1, 20) / 20, size=2, replace=False)
        r = support_rank(p, sorted(set(p.boundary.points) | set(extra)))
        good += r.rank == r.expected_rank and r.residual <= 1e-7
        worst = max(worst, r.residual)
    ok = good == 10
    report(10, "support rank", ok, f"{good}/10 problems at rank nk-n, max null-space residual {worst:.1e}")
    assert ok


def test_11_perturbation_rate(report):
    bm = brownian()
    rows = perturbation_experiment(bm, [1.0], [2, 64])
    ratio = rows[1].sup_l2 / rows[0].sup_l2
    zero = perturbation_experiment(bm, [0.0], [2, 64])
    zeros = all(r.sup_l2 == 0.0 and r.kernel_sup == 0.0 for r in zero)
    ok = ratio < 1 / 32 and zeros
    report(
        11,
        "perturbation rate",
        ok,
        f"dist N=2 {rows[0].sup_l2:.5f}, N=64 {rows[1].sup_l2:.7f}, ratio {ratio:.4f} vs {1 / 32:.4f}, zero delta exact={zeros}",
    )
    assert ok
