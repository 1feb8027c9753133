import numpy as np
import pytest

from sdebvp.errors import NotWellPosed
from sdebvp.green import green_matrix, influence_column, influence_table, mean_values
from sdebvp.ode import integration_tolerance
from sdebvp.problem import companion_matrices, make_problem

from conftest import brownian, half_sum


def closed_form_43(t, s):
    return 0.5 * (s >= 0.5) + 0.5 * (s >= 1.0) - 1.0 * (t <= s)


def test_example_kernel_closed_form(hsum):
    grid = hsum.grid
    times = grid[::50]
    g = influence_table(hsum, times)[:, :, 0]
    exact = closed_form_43(times[:, None], grid[None, :])
    assert np.max(np.abs(g - exact)) <= 1e-10
    # from X(t) = -(W(1/2) + W(1))/2 + W(t): dW on ]1/2, 1[ enters X(1/4) with weight -1/2
    assert green_matrix(hsum, 0.25, 0.75)[0, 0] == pytest.approx(-0.5, abs=1e-12)


def test_left_limits_match_closed_form(hsum):
    grid = hsum.grid
    g = influence_table(hsum, [0.25], "left")[0, :, 0]
    exact = 0.5 * (grid > 0.5) + 0.5 * (grid > 1.0) - 1.0 * (0.25 < grid)
    assert np.max(np.abs(g - exact)) <= 1e-10


def test_influence_column_example(hsum):
    row = influence_column(hsum, 0.25)
    assert row.breakpoints == (0.25, 0.5, 1.0)
    s = hsum.grid
    assert np.max(np.abs(row.values[:, 0] - (0.5 * (s >= 0.5) - 1.0 * (s >= 0.25)))[:-1]) <= 1e-12


def test_brownian_kernel():
    bm = brownian()
    grid = bm.grid
    g = influence_table(bm, [0.4, 1.0])[:, :, 0]
    assert np.array_equal(g[0], (grid < 0.4).astype(float))
    assert np.all(g[1, :-1] == 1.0) and g[1, -1] == 0.0


def test_vanishes_at_one(lat3):
    tol = integration_tolerance(lat3.h)
    for t in (0.0, 0.3, 0.45, 1.0):
        assert np.max(np.abs(green_matrix(lat3, t, 1.0))) <= tol


def test_jump_structure(lat3, hsum):
    t = 0.45
    right = influence_table(lat3, [t], "right")[0]
    left = influence_table(lat3, [t], "left")[0]
    k = lat3.node_index(t)
    assert np.allclose(right[k] - left[k], -np.eye(3)[0], atol=1e-10)
    # for n > 1 an atom at t_j adds J(t)^{-1} alpha_j (e_n . e_1) = 0 to the first column
    others = np.setdiff1d(np.arange(len(lat3.grid)), [k])
    assert np.max(np.abs(right - left)[others]) <= 1e-12
    # n = 1: jumps of 1/2 at both boundary points
    r43 = influence_table(hsum, [t], "right")[0, :, 0]
    l43 = influence_table(hsum, [t], "left")[0, :, 0]
    assert np.allclose((r43 - l43)[hsum.node_indices([0.5, 1.0])], 0.5)


def test_full_matrix_jumps_at_boundary_points(lat3):
    # the full G does jump at t_j even though its first column does not
    k = lat3.node_index(0.3)
    s_prev = lat3.grid[k - 1]
    jump = green_matrix(lat3, 0.8, 0.3) - green_matrix(lat3, 0.8, s_prev)
    assert np.max(np.abs(jump)) > 1e-3


def test_green_satisfies_boundary_conditions(lat3):
    # Lambda[G(., s)] = 0 for s off the boundary points
    idx = lat3.node_indices(lat3.boundary.points)
    g = influence_table(lat3, lat3.grid[idx])  # (m, N+1, n)
    lam = np.einsum("ij,js->is", lat3.boundary.matrix, g[:, :, -1])
    off = np.setdiff1d(np.arange(len(lat3.grid)), idx)
    assert np.max(np.abs(lam[:, off])) <= 1e-10


def _trap(problem, f, R, L, step):
    g = problem.grid[::step]
    h = np.diff(g)
    fr = f[::step]
    Rs, Ls = R[:, ::step], L[:, ::step]
    return np.einsum("l,tla->ta", 0.5 * h * fr[:-1], Rs[:, :-1]) + np.einsum("l,tla->ta", 0.5 * h * fr[1:], Ls[:, 1:])


@pytest.mark.parametrize("which", ["lat3", "sindir"])
def test_reproduction_property(which, request):
    # Y = m + int G f e1 ds solves DY + AY = f e1 with Lambda[Y] = c
    p = request.getfixturevalue(which)
    f = np.cos(3 * p.grid)
    even = p.grid[::2]
    R = influence_table(p, even, "right")
    L = influence_table(p, even, "left")
    # Richardson on h and 2h removes the trapezoid error (all jumps sit on even nodes)
    y = mean_values(p)[::2] + (4 * _trap(p, f, R, L, 1) - _trap(p, f, R, L, 2)) / 3
    a = companion_matrices(p.coeffs, even)
    k = np.arange(2, len(even) - 2)
    dh = even[1] - even[0]
    dy = (-y[k + 2] + 8 * y[k + 1] - 8 * y[k - 1] + y[k - 2]) / (12 * dh)
    res = dy + np.einsum("kab,kb->ka", a[k], y[k])
    res[:, 0] -= f[::2][k]
    assert np.max(np.abs(res)) <= 100 * integration_tolerance(p.h)
    pos = [int(np.argmin(np.abs(even - t))) for t in p.boundary.points]
    assert np.allclose(p.boundary.matrix @ y[pos, -1], p.boundary.rhs, atol=1e-12)


def test_mean_examples():
    assert np.all(mean_values(half_sum(c=0.0)) == 0.0)
    assert np.allclose(mean_values(half_sum(c=1.0)), 0.5)
    assert np.allclose(mean_values(brownian(c=0.7)), 0.7)


def test_mean_satisfies_conditions(lat3):
    m = mean_values(lat3)
    idx = lat3.node_indices(lat3.boundary.points)
    assert np.allclose(lat3.boundary.matrix @ m[idx, -1], lat3.boundary.rhs, atol=1e-12)


def test_not_wellposed_raises():
    anti = make_problem([0.0], [0.5, 1.0], [[1.0, -1.0]])
    with pytest.raises(NotWellPosed):
        green_matrix(anti, 0.2, 0.3)
