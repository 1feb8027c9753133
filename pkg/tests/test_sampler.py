import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdebvp.errors import GridMismatch, NotWellPosed, PerturbedNotWellPosed
from sdebvp.law import joint_law
from sdebvp.problem import make_problem
from sdebvp.sampler import (
    WienerPath,
    label_samples,
    mc_covariance,
    path_tolerance,
    perturbation_experiment,
    rng_for,
    sample_solution,
    sample_wiener,
)

from conftest import brownian, half_sum


def test_wiener_basics(hsum):
    w = sample_wiener(hsum.grid, seed=1, stream=2)
    assert w.values[0] == 0.0
    again = sample_wiener(hsum.grid, seed=1, stream=2)
    assert np.array_equal(w.values, again.values)
    other = sample_wiener(hsum.grid, seed=1, stream=3)
    assert not np.array_equal(w.values, other.values)


def test_wiener_increment_variance():
    grid = np.linspace(0, 1, 11)
    dt = 0.1
    inc = np.concatenate([sample_wiener(grid, 5, s).increments for s in range(10_000)])
    var = inc.var(ddof=1)
    se = dt * np.sqrt(2 / (len(inc) - 1))
    assert abs(var - dt) <= 3 * se


def test_rng_key_range():
    with pytest.raises(ValueError):
        rng_for(-1, 0)
    with pytest.raises(ValueError):
        rng_for(0, 2**64)


def test_example_path_identity(hsum):
    i = hsum.node_index(0.5)
    for stream in range(5):
        w = sample_wiener(hsum.grid, 11, stream)
        y = sample_solution(hsum, w).values[:, 0]
        exact = -0.5 * (w.values[i] + w.values[-1]) + w.values
        assert np.max(np.abs(y - exact)) <= 1e-10


def test_zero_path_gives_mean(lat3):
    zero = WienerPath(lat3.grid, np.zeros(len(lat3.grid)), 0, 0)
    from sdebvp.green import mean_values

    assert np.allclose(sample_solution(lat3, zero).values, mean_values(lat3), atol=1e-14)


def test_boundary_residual(lat3, hsum):
    for p in (lat3, hsum):
        path = sample_solution(p, sample_wiener(p.grid, 3, 0))
        assert np.max(np.abs(path.boundary_residual(p))) <= path_tolerance(p.h)
    path = sample_solution(hsum, sample_wiener(hsum.grid, 3, 0))
    assert np.max(np.abs(path.boundary_residual(hsum))) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32))
def test_increment_and_by_parts_agree(seed):
    from conftest import lateral3

    p = lateral3(h=2e-3)
    w = sample_wiener(p.grid, seed, 0)
    a = sample_solution(p, w, "increments").values
    b = sample_solution(p, w, "by_parts").values
    assert np.max(np.abs(a - b)) <= 10 * path_tolerance(p.h)


def test_by_parts_exact_for_example(hsum):
    w = sample_wiener(hsum.grid, 0, 9)
    a = sample_solution(hsum, w, "increments").values
    b = sample_solution(hsum, w, "by_parts").values
    assert np.max(np.abs(a - b)) <= 1e-12


def test_grid_mismatch(hsum):
    w = sample_wiener(np.linspace(0, 1, 101), 0, 0)
    with pytest.raises(GridMismatch):
        sample_solution(hsum, w)
    with pytest.raises(ValueError):
        sample_solution(hsum, sample_wiener(hsum.grid, 0, 0), method="euler")


def test_not_wellposed():
    anti = make_problem([0.0], [0.5, 1.0], [[1.0, -1.0]])
    with pytest.raises(NotWellPosed):
        sample_solution(anti, sample_wiener(anti.grid, 0, 0))
    with pytest.raises(NotWellPosed):
        mc_covariance(anti, [(0.5, 1)], 10, 0)


def test_mc_matches_exact_samples(lat3):
    # the MC layer uses the same kernel rows as pathwise synthesis
    labels = [(0.45, 1), (0.8, 3)]
    x = label_samples(lat3, labels, 3, seed=4)
    for p in range(3):
        y = sample_solution(lat3, sample_wiener(lat3.grid, 4, p)).values
        assert np.allclose(x[p], [y[lat3.node_index(0.45), 0], y[lat3.node_index(0.8), 2]], atol=1e-12)


def test_mc_single_path(hsum):
    est = mc_covariance(hsum, [(0.5, 1)], 1, 0)
    assert not est.stderr_defined
    assert np.isfinite(est.mean).all()


def test_mc_reproducible(hsum):
    a = mc_covariance(hsum, [(0.3, 1), (0.5, 1)], 5000, 7)
    b = mc_covariance(hsum, [(0.3, 1), (0.5, 1)], 5000, 7)
    assert np.array_equal(a.cov, b.cov) and np.array_equal(a.mean, b.mean)


def test_mc_batching_does_not_matter(hsum):
    a = label_samples(hsum, [(0.3, 1)], 1000, 2, batch=1000)
    b = label_samples(hsum, [(0.3, 1)], 1000, 2, batch=7)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


@pytest.mark.slow
def test_mc_variances():
    bm = brownian()
    est = mc_covariance(bm, [(1.0, 1)], 100_000, 1)
    assert abs(est.cov[0, 0] - 1.0) <= 3 * est.stderr_cov[0, 0]
    ex = half_sum()
    est = mc_covariance(ex, [(0.5, 1)], 100_000, 2)
    assert abs(est.cov[0, 0] - 0.125) <= 3 * est.stderr_cov[0, 0]


def scalar_distance(n):
    # a_0 = 1/N, X(0) = 0 against Brownian motion, at t = 1
    return np.sqrt(1 - 2 * n * (1 - np.exp(-1 / n)) + n / 2 * (1 - np.exp(-2 / n)))


def test_perturbation_closed_form():
    bm = brownian()
    rows = perturbation_experiment(bm, [1.0], [2, 8, 64])
    for r in rows:
        assert r.t_at_sup == 1.0
        assert r.sup_l2 == pytest.approx(scalar_distance(r.n_value), rel=1e-5)
        assert r.kernel_sup == pytest.approx(1 - np.exp(-1 / r.n_value), rel=1e-6)
    assert rows[0].sup_l2 > rows[1].sup_l2 > rows[2].sup_l2


def test_perturbation_zero_delta(lat3):
    rows = perturbation_experiment(lat3, [0.0, 0.0, 0.0], [2, 16])
    assert all(r.sup_l2 == 0.0 and r.kernel_sup == 0.0 for r in rows)


def test_perturbation_failure_reports_n():
    # X(0) - e^{-1} X(1) = 0 becomes singular exactly when a_0 = -1
    p = make_problem([0.0], [0.0, 1.0], [[1.0, -np.exp(-1.0)]])
    with pytest.raises(PerturbedNotWellPosed) as info:
        perturbation_experiment(p, [-2.0], [4, 2])
    assert info.value.n_value == 2


def test_perturbation_arity(lat3):
    with pytest.raises(ValueError):
        perturbation_experiment(lat3, [1.0], [2])


def test_perturbation_first_order_rate():
    # N * dist(N) settles, so the rate is 1/N even though dist(64)/dist(2) > 1/32
    rows = perturbation_experiment(brownian(h=2e-3), [1.0], [8, 16, 32, 64])
    scaled = [r.n_value * r.sup_l2 for r in rows]
    steps = np.abs(np.diff(scaled))
    assert np.all(steps[1:] < steps[:-1])
    assert rows[-1].sup_l2 / rows[-2].sup_l2 == pytest.approx(0.5, rel=0.02)
