"""Monte Carlo layer: Wiener paths, pathwise solutions, empirical covariances.

Random numbers come from Philox keyed by ``(seed, stream)``; each path owns a
stream, so results do not depend on how paths are batched or scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatch, PerturbedNotWellPosed
from .green import _data, influence_table, mean_values
from .law import _factor_rows
from .ode import check_wellposed, require_wellposed
from .problem import Coefficient, Problem

EPS_PATH_PER_H = 100.0


def path_tolerance(h: float) -> float:
    return EPS_PATH_PER_H * h


def rng_for(seed: int, stream: int) -> np.random.Generator:
    if not (0 <= seed < 2**64 and 0 <= stream < 2**64):
        raise ValueError("seed and stream must fit in 64 unsigned bits")
    return np.random.Generator(np.random.Philox(key=(int(stream) << 64) | int(seed)))


@dataclass(frozen=True)
class WienerPath:
    grid: np.ndarray
    values: np.ndarray
    seed: int
    stream: int

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def sample_wiener(grid, seed: int, stream: int = 0) -> WienerPath:
    grid = np.asarray(grid, dtype=float)
    z = rng_for(seed, stream).standard_normal(len(grid) - 1)
    w = np.concatenate([[0.0], np.cumsum(z * np.sqrt(np.diff(grid)))])
    return WienerPath(grid, w, int(seed), int(stream))


@dataclass(frozen=True)
class SolutionPath:
    grid: np.ndarray
    values: np.ndarray  # (N+1, n)

    def boundary_residual(self, problem: Problem) -> np.ndarray:
        idx = problem.node_indices(problem.boundary.points)
        return problem.boundary.matrix @ self.values[idx, -1] - problem.boundary.rhs


def _check_grid(problem: Problem, wiener: WienerPath) -> None:
    if wiener.grid.shape != problem.grid.shape or not np.array_equal(wiener.grid, problem.grid):
        raise GridMismatch("Wiener path was not sampled on the problem grid")


def sample_solution(problem: Problem, wiener: WienerPath, method: str = "increments") -> SolutionPath:
    """Pathwise solution on the grid.

    ``increments``: ``Y(t_k) = m(t_k) + sum_l g(t_k, s_l+) (W(s_{l+1}) - W(s_l))``,
    evaluated in O(N) by splitting the Green function into its
    ``t``-independent part and the tail indicator.
    ``by_parts``: ``-sum_l W(s_l) (g(t_k, s_l) - g(t_k, s_{l-1}))``, which
    uses ``G(t, 1) = 0``; O(N^2), meant as a cross-check.
    """
    require_wellposed(problem)
    _check_grid(problem, wiener)
    mean = mean_values(problem)
    dw = wiener.increments
    if method == "increments":
        d = _data(problem)
        w = d.j_vals[:-1, :, 0]  # J(s_l) e_1
        v = np.einsum("lab,lb->la", d.s_right[:-1], w)
        total = v.T @ dw
        tail = np.concatenate([np.cumsum((w * dw[:, None])[::-1], axis=0)[::-1], np.zeros((1, problem.n))])
        values = mean + np.einsum("kab,kb->ka", d.j_inv, total[None, :] - tail)
    elif method == "by_parts":
        grid = problem.grid
        values = np.empty((len(grid), problem.n))
        wv = wiener.values[1:]
        for lo in range(0, len(grid), 256):
            g = influence_table(problem, grid[lo:lo + 256], "right")
            values[lo:lo + 256] = mean[lo:lo + 256] - np.einsum("l,tla->ta", wv, np.diff(g, axis=1))
    else:
        raise ValueError(f"unknown method {method!r}")
    return SolutionPath(problem.grid, values)


@dataclass(frozen=True)
class MCEstimate:
    labels: tuple
    mean: np.ndarray
    cov: np.ndarray
    stderr_mean: np.ndarray
    stderr_cov: np.ndarray
    n_paths: int
    stderr_defined: bool


def label_samples(problem: Problem, labels, n_paths: int, seed: int, batch: int = 2048) -> np.ndarray:
    """Values of the labelled coordinates on ``n_paths`` independent paths, shape (n_paths, L)."""
    labels = [(float(t), int(k)) for t, k in labels]
    times = sorted({t for t, _ in labels})
    problem = problem.with_nodes(times)
    require_wellposed(problem)
    g = influence_table(problem, times, "right")[:, :-1, :]
    pos = {t: i for i, t in enumerate(times)}
    gmat = np.stack([g[pos[t], :, k - 1] for t, k in labels])  # (L, N)
    means = mean_values(problem)
    mvec = np.array([means[problem.node_index(t), k - 1] for t, k in labels])
    sqrt_h = np.sqrt(np.diff(problem.grid))
    out = np.empty((n_paths, len(labels)))
    buf = np.empty((min(batch, max(n_paths, 1)), len(sqrt_h)))
    for lo in range(0, n_paths, batch):
        hi = min(n_paths, lo + batch)
        for p in range(lo, hi):
            rng_for(seed, p).standard_normal(out=buf[p - lo])
        out[lo:hi] = mvec + (buf[: hi - lo] * sqrt_h) @ gmat.T
    return out


def mc_covariance(problem: Problem, labels, n_paths: int, seed: int) -> MCEstimate:
    """Empirical mean and covariance of the labelled coordinates with standard errors."""
    x = label_samples(problem, labels, n_paths, seed)
    mean = x.mean(axis=0)
    z = x - mean
    cov = z.T @ z / max(n_paths - 1, 1)
    if n_paths < 2:
        nan = np.full(cov.shape, np.nan)
        return MCEstimate(tuple(labels), mean, cov, np.full(mean.shape, np.nan), nan, n_paths, False)
    se_mean = x.std(axis=0, ddof=1) / np.sqrt(n_paths)
    prods = z[:, :, None] * z[:, None, :]
    se_cov = prods.std(axis=0, ddof=1) / np.sqrt(n_paths)
    return MCEstimate(tuple(labels), mean, cov, se_mean, se_cov, n_paths, True)


@dataclass(frozen=True)
class PerturbationRow:
    n_value: int
    sup_l2: float  # sup_t of the L2(omega) distance between the two solutions
    kernel_sup: float  # sup_{t,s} |g_N(t, s) - g(t, s)|
    t_at_sup: float


def _as_coefficients(delta, n) -> list[Coefficient]:
    out = [d if isinstance(d, Coefficient) else Coefficient.constant(d) for d in delta]
    if len(out) != n:
        raise ValueError(f"perturbation needs {n} coefficients (a_0..a_(n-1)), got {len(out)}")
    return out


def perturbation_experiment(problem: Problem, delta: Sequence, n_list: Sequence[int], chunk: int = 128) -> list[PerturbationRow]:
    """Distance between the solution for ``a_i + delta_i / N`` and the original one.

    Both solutions are driven by the same noise, so
    ``E|Y_N(t) - Y(t)|^2 = |m_N(t) - m(t)|^2 + int |g_N(t,u) - g(t,u)|^2 du``,
    evaluated exactly from the two Gaussian laws. Only the first row of the
    companion matrix changes, as the perturbation acts on the coefficients.
    """
    require_wellposed(problem)
    delta = _as_coefficients(delta, problem.n)
    grid = problem.grid
    m0 = mean_values(problem)
    rows = []
    for big_n in n_list:
        pert = problem.with_coeffs(problem.coeffs.perturbed(delta, 1.0 / big_n))
        wp = check_wellposed(pert)
        if not wp.wellposed:
            raise PerturbedNotWellPosed(big_n, wp.det)
        dist2 = np.sum((mean_values(pert) - m0) ** 2, axis=1)
        ksup = 0.0
        for lo in range(0, len(grid), chunk):
            ts = grid[lo:lo + chunk]
            dist2[lo:lo + chunk] += np.sum((_factor_rows(pert, ts) - _factor_rows(problem, ts)) ** 2, axis=(1, 2))
            for side in ("right", "left"):
                diff = influence_table(pert, ts, side) - influence_table(problem, ts, side)
                ksup = max(ksup, float(np.max(np.abs(diff))))
        k = int(np.argmax(dist2))
        rows.append(PerturbationRow(int(big_n), float(np.sqrt(dist2[k])), ksup, float(grid[k])))
    return rows
