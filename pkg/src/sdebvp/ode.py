"""Fundamental matrices of ``DY + A(t) Y = 0`` and the boundary matrix ``J(t)``.

Integration is classical fixed-step RK4 on the problem's master grid, so every
quantity downstream is available exactly at the grid nodes. For a linear
system one RK4 step is a matrix, which lets us build all step matrices at
once and only loop over the (cheap) sequential products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditionCountMismatch, InconsistentVerdict, IntegrationOverflow, NotWellPosed, ProblemError
from .problem import NODE_TOL, Problem, companion_matrices

OVERFLOW_GUARD = 1e150
EPS_DET = 1e-8
COND_WARN = 1e10


def integration_tolerance(h: float) -> float:
    """Tolerance for node values of the flow, ``C h^4`` with a round-off floor.

    C = 1e3 covers the coefficient sizes used here (|a_i| up to ~10); the
    Liouville defect measured by :func:`liouville_defect` stays well below it.
    """
    return max(1e-10, 1e3 * h**4)


@dataclass(frozen=True)
class FundamentalMatrix:
    """``values[k] = Phi^s(grid[k])`` with ``Phi^s(s) = I``."""

    base: float
    grid: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[k] - t) > NODE_TOL:
            raise ProblemError(f"t={t!r} is not a grid node")
        return self.values[k]


def _step_matrices(problem: Problem, backward: bool) -> np.ndarray:
    """RK4 propagators between consecutive nodes.

    Forward: ``P[k]`` maps the state at ``grid[k]`` to ``grid[k+1]``.
    Backward: ``P[k]`` maps the state at ``grid[k+1]`` to ``grid[k]``.
    """
    grid = problem.grid
    h = np.diff(grid)
    a_left = -companion_matrices(problem.coeffs, grid[:-1])
    a_mid = -companion_matrices(problem.coeffs, 0.5 * (grid[:-1] + grid[1:]))
    a_right = -companion_matrices(problem.coeffs, grid[1:])
    if backward:
        a_left, a_right, h = a_right, a_left, -h
    n = problem.n
    eye = np.broadcast_to(np.eye(n), a_left.shape)
    h = h[:, None, None]
    k1 = a_left
    k2 = a_mid @ (eye + 0.5 * h * k1)
    k3 = a_mid @ (eye + 0.5 * h * k2)
    k4 = a_right @ (eye + h * k3)
    return eye + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate(problem: Problem, start: int) -> np.ndarray:
    n = problem.n
    size = len(problem.grid)
    out = np.empty((size, n, n))
    out[start] = np.eye(n)
    if start < size - 1:
        fwd = _step_matrices(problem, backward=False)
        for k in range(start, size - 1):
            out[k + 1] = fwd[k] @ out[k]
    if start > 0:
        bwd = _step_matrices(problem, backward=True)
        for k in range(start - 1, -1, -1):
            out[k] = bwd[k] @ out[k + 1]
    peak = np.max(np.abs(out))
    if not np.isfinite(peak) or peak > OVERFLOW_GUARD:
        raise IntegrationOverflow(f"fundamental matrix entries reached {peak:.3e}")
    return out


def fundamental_matrix(problem: Problem, s: float) -> FundamentalMatrix:
    """``Phi^s`` on the whole grid, integrated forward and backward from ``s``."""
    k = problem.node_index(s)
    key = ("phi", k)
    if key not in problem._memo:
        values = _integrate(problem, k)
        values.setflags(write=False)
        problem._memo[key] = FundamentalMatrix(float(problem.grid[k]), problem.grid, values)
    return problem._memo[key]


def flow(problem: Problem, t: float, s: float) -> np.ndarray:
    """``Phi^s(t)`` through the composition ``Phi^0(t) Phi^0(s)^{-1}``."""
    phi0 = fundamental_matrix(problem, 0.0)
    a = phi0.values[problem.node_index(t)]
    b = phi0.values[problem.node_index(s)]
    return np.linalg.solve(b.T, a.T).T


def liouville_defect(problem: Problem, s: float = 0.0) -> float:
    """Max over nodes of ``|det Phi^s(t) - exp(int_s^t a_{n-1})|``.

    For the companion layout ``trace A = a_{n-1}``; the exponent integral is
    taken with composite Simpson on each grid panel.
    """
    phi = fundamental_matrix(problem, s)
    grid = problem.grid
    top = problem.coeffs.a[-1]
    h = np.diff(grid)
    panel = h / 6.0 * (top(grid[:-1]) + 4.0 * top(0.5 * (grid[:-1] + grid[1:])) + top(grid[1:]))
    cum = np.concatenate([[0.0], np.cumsum(panel)])
    k = problem.node_index(s)
    expected = np.exp(-(cum - cum[k]))
    return float(np.max(np.abs(np.linalg.det(phi.values) - expected)))


@dataclass(frozen=True)
class JMatrix:
    """``J(t) = sum_j alpha[:, j] * (n-th row of Phi^t(t_j))`` at every node."""

    grid: np.ndarray
    values: np.ndarray
    s_ref: float
    det_h0: float

    @property
    def at_zero(self) -> np.ndarray:
        return self.values[0]

    def inverse_values(self) -> np.ndarray:
        cond = np.linalg.cond(self.values)
        if np.max(cond) > COND_WARN:
            warnings.warn(f"J(t) badly conditioned (cond up to {np.max(cond):.2e})", RuntimeWarning, stacklevel=2)
        n = self.values.shape[-1]
        return np.linalg.solve(self.values, np.broadcast_to(np.eye(n), self.values.shape))


def _boundary_rows(problem: Problem) -> np.ndarray:
    """``K = J(0)``: alpha applied to the last row of ``Phi^0`` at the points."""
    phi0 = fundamental_matrix(problem, 0.0).values
    idx = problem.node_indices(problem.boundary.points)
    last_rows = phi0[idx, -1, :]
    return problem.boundary.matrix @ last_rows


def reference_points(problem: Problem) -> list[float]:
    """Nodes nearest 1/2, 1/4, 3/4 that are not boundary points (first is s_ref)."""
    grid = problem.grid
    pts = problem.boundary.points
    usable = np.array([not any(abs(g - p) <= NODE_TOL for p in pts) for g in grid])
    out = []
    for target in (0.5, 0.25, 0.75):
        order = np.argsort(np.abs(grid - target), kind="stable")
        for k in order:
            if usable[k]:
                if float(grid[k]) not in out:
                    out.append(float(grid[k]))
                break
    return out


def j_matrix(problem: Problem) -> JMatrix:
    if "J" not in problem._memo:
        phi0 = fundamental_matrix(problem, 0.0).values
        k_mat = _boundary_rows(problem)
        # J(t) = K Phi^0(t)^{-1}, i.e. J(t)^T solves Phi^0(t)^T X = K^T
        values = np.swapaxes(np.linalg.solve(np.swapaxes(phi0, 1, 2), np.broadcast_to(k_mat.T, phi0.shape)), 1, 2)
        values.setflags(write=False)
        s_ref = reference_points(problem)[0]
        det = float(np.linalg.det(values[problem.node_index(s_ref)]))
        problem._memo["J"] = JMatrix(problem.grid, values, s_ref, det)
    return problem._memo["J"]


@dataclass(frozen=True)
class WellPosedness:
    det: float
    wellposed: bool
    s_ref: float
    spot_checks: tuple[tuple[float, float, bool], ...]


def _verdict(j: np.ndarray, eps_det: float) -> bool:
    return bool(abs(np.linalg.det(j)) > eps_det * max(1.0, np.linalg.norm(j)))


def check_wellposed(problem: Problem, eps_det: float = EPS_DET) -> WellPosedness:
    J = j_matrix(problem)
    checks = []
    for s in reference_points(problem):
        js = J.values[problem.node_index(s)]
        checks.append((s, float(np.linalg.det(js)), _verdict(js, eps_det)))
    verdicts = {v for _, _, v in checks}
    if len(verdicts) > 1:
        raise InconsistentVerdict(f"well-posedness verdict depends on the reference point: {checks}")
    return WellPosedness(J.det_h0, checks[0][2], J.s_ref, tuple(checks))


def require_wellposed(problem: Problem) -> JMatrix:
    key = "wellposed"
    if key not in problem._memo:
        problem._memo[key] = check_wellposed(problem)
    report = problem._memo[key]
    if not report.wellposed:
        raise NotWellPosed(f"boundary problem is not well posed (det J = {report.det:.3e})")
    return j_matrix(problem)


# A condition is a list of (time, weights) terms meaning sum_k weights_k . Y(time_k) = 0.
Condition = list


def coordinate_condition(t: float, coord: int, n: int) -> Condition:
    """``Y_coord(t) = 0`` with 1-based ``coord``."""
    w = np.zeros(n)
    w[coord - 1] = 1.0
    return [(float(t), w)]


def functional_condition(times: Sequence[float], weights: Sequence[float], n: int) -> Condition:
    """``sum_j weights[j] * Y_n(times[j]) = 0``."""
    terms = []
    for t, a in zip(times, weights):
        w = np.zeros(n)
        w[-1] = a
        terms.append((float(t), w))
    return terms


def _normalize_intervals(intervals):
    arr = np.asarray(intervals, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != 2 or np.any(arr[:, 0] > arr[:, 1]):
        raise ProblemError(f"bad interval specification {intervals!r}")
    return [(float(u), float(v)) for u, v in arr]


def subinterval_system(problem: Problem, intervals, conditions: Sequence[Condition]) -> np.ndarray:
    """Square matrix of ``conditions`` applied to ``Phi^u`` on each interval.

    Column block ``k`` holds the free initial value at the left end of
    interval ``k``. A zero determinant means the homogeneous problem on the
    interval(s) has a nontrivial solution.
    """
    ivs = _normalize_intervals(intervals)
    n = problem.n
    if len(conditions) != n * len(ivs):
        raise ConditionCountMismatch(f"{len(conditions)} conditions for {len(ivs)} interval(s) of order {n}")
    phi0 = fundamental_matrix(problem, 0.0).values
    bases = [phi0[problem.node_index(u)] for u, _ in ivs]
    mat = np.zeros((len(conditions), n * len(ivs)))
    for r, cond in enumerate(conditions):
        for t, w in cond:
            blocks = [k for k, (u, v) in enumerate(ivs) if u - NODE_TOL <= t <= v + NODE_TOL]
            if not blocks:
                raise ProblemError(f"condition point {t} lies outside {ivs}")
            k = blocks[0]
            # w . Phi^u(t) = w . Phi^0(t) Phi^0(u)^{-1}
            row = np.linalg.solve(bases[k].T, phi0[problem.node_index(t)].T @ np.asarray(w, dtype=float))
            mat[r, k * n:(k + 1) * n] += row
    return mat


def subinterval_boundary_determinant(problem: Problem, intervals, conditions: Sequence[Condition]) -> float:
    return float(np.linalg.det(subinterval_system(problem, intervals, conditions)))
