import numpy as np
import pytest

from sdebvp.problem import Coefficient, CoefficientSet, make_problem


def half_sum(c=0.0, h=1e-3):
    # X' = noise, X(1/2) + X(1) = c
    return make_problem([0.0], [0.5, 1.0], [[1.0, 1.0]], [c], h=h)


def brownian(c=0.0, h=1e-3):
    return make_problem([0.0], [0.0], [[1.0]], [c], h=h)


def sinusoid_dirichlet(h=1e-3):
    # D^2 X + 4 X, X(0) = X(1) = 0
    return make_problem([4.0, 0.0], [0.0, 1.0], np.eye(2), h=h)


def lateral3(h=1e-3):
    coeffs = CoefficientSet(
        (Coefficient.constant(1.0), Coefficient.polynomial(0.5, -1.0), Coefficient.sinusoid(0.5, 6.0))
    )
    alpha = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, -2.0], [0.0, 0.0, 1.0, 1.0]]
    return make_problem(coeffs, [0.0, 0.3, 0.6, 1.0], alpha, [0.0, 1.0, -0.5], h=h)


@pytest.fixture(scope="session")
def hsum():
    return half_sum()


@pytest.fixture(scope="session")
def bm():
    return brownian()


@pytest.fixture(scope="session")
def sindir():
    return sinusoid_dirichlet()


@pytest.fixture(scope="session")
def lat3():
    return lateral3()
