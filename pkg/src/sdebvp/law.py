"""Exact Gaussian law of the solution and conditional-independence checks.

The covariance kernel ``C(t, s) = int_0^1 g(t, u) g(s, u)^T du`` is computed
with the trapezoid rule on every grid panel, using the one-sided limits of
``g`` that belong to the panel. Since the boundary points, ``t`` and ``s`` are
all nodes, no panel straddles a jump.

The trapezoid sum is a Gram matrix, ``C = F F^T`` with ``F`` holding
``sqrt(h/2) g`` at both ends of each panel. Joint laws keep that factor and
the conditional computations project it rather than inverting covariance
blocks; this avoids squaring the condition number when conditioning on
nearly degenerate sets (boundary constraints remove whole directions).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MissingSupportPoint
from .green import influence_table, mean_values
from .problem import NODE_TOL, Problem

EPS_CI = 1e-6
EPS_VAR = 1e-12
EPS_RANK = 1e-7
PINV_RTOL = 1e-10

Label = tuple  # (time, coordinate) with coordinate in 1..n


def _factor_rows(problem: Problem, times) -> np.ndarray:
    """Trapezoid square-root factor, shape ``(len(times), n, 2N)``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    right = influence_table(problem, times, "right")[:, :-1, :]
    left = influence_table(problem, times, "left")[:, 1:, :]
    w = np.sqrt(0.5 * np.diff(problem.grid))[None, :, None]
    return np.concatenate([right * w, left * w], axis=1).transpose(0, 2, 1)


def mean_function(problem: Problem) -> np.ndarray:
    """``m(t) = J(t)^{-1} c`` at every node of ``problem.grid``; shape (N+1, n)."""
    return mean_values(problem)


def covariance_kernel(problem: Problem, t: float, s: float) -> np.ndarray:
    """``C(t, s)``, an n x n matrix (rows index Y(t), columns Y(s))."""
    problem = problem.with_nodes([t, s])
    f = _factor_rows(problem, [t, s])
    return f[0] @ f[1].T


def covariance_rows(problem: Problem, times) -> np.ndarray:
    """``C(t, s)`` for ``t`` in ``times`` and every node ``s``; shape (T, N+1, n, n)."""
    grid = problem.grid
    ft = _factor_rows(problem, times)
    out = np.empty((len(ft), len(grid), problem.n, problem.n))
    chunk = 256
    for lo in range(0, len(grid), chunk):
        fs = _factor_rows(problem, grid[lo:lo + chunk])
        out[:, lo:lo + chunk] = np.einsum("tik,sjk->tsij", ft, fs)
    return out


@dataclass(frozen=True)
class JointGaussian:
    labels: tuple
    mean: np.ndarray
    cov: np.ndarray
    factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        k = len(self.labels)
        if self.mean.shape != (k,) or self.cov.shape != (k, k):
            raise ValueError("label count, mean and covariance dimensions disagree")
        if self.factor is not None and self.factor.shape[0] != k:
            raise ValueError("factor must have one row per label")


def joint_law(problem: Problem, labels: Sequence[Label]) -> JointGaussian:
    """Mean and covariance of ``(Y_k(t) for (t, k) in labels)``."""
    labels = tuple((float(t), int(k)) for t, k in labels)
    n = problem.n
    for _, k in labels:
        if not 1 <= k <= n:
            raise ValueError(f"coordinate {k} outside 1..{n}")
    times = sorted({t for t, _ in labels})
    problem = problem.with_nodes(times)
    if not labels:
        return JointGaussian((), np.zeros(0), np.zeros((0, 0)), np.zeros((0, 2 * (len(problem.grid) - 1))))
    f = _factor_rows(problem, times)
    pos = {t: i for i, t in enumerate(times)}
    factor = np.stack([f[pos[t], k - 1] for t, k in labels])
    means = mean_values(problem)
    mean = np.array([means[problem.node_index(t), k - 1] for t, k in labels])
    return JointGaussian(labels, mean, factor @ factor.T, factor)


@dataclass(frozen=True)
class PartialCovariance:
    matrix: np.ndarray  # Sigma_AB - Sigma_AC Sigma_CC^+ Sigma_CB
    rank: int  # numerical rank of Sigma_CC
    var_a: np.ndarray  # conditional variances of the A entries
    var_b: np.ndarray


def _row_scale(std: np.ndarray) -> np.ndarray:
    # standard deviations floored at sqrt(EPS_VAR): near-deterministic
    # variables are not blown up to unit scale (that would promote round-off)
    return np.maximum(std, np.sqrt(EPS_VAR))


def _range_basis(fc: np.ndarray) -> tuple[np.ndarray, int]:
    if fc.shape[0] == 0:
        return np.zeros((fc.shape[1], 0)), 0
    # unit rows: the cutoff then acts on the correlation scale, so a variable
    # with tiny but genuine variance (X(a) next to D^2 X(a)) is not dropped
    fc = fc / _row_scale(np.linalg.norm(fc, axis=1))[:, None]
    _, sv, vt = np.linalg.svd(fc, full_matrices=False)
    # cutoff on eigenvalues of Sigma_CC = squared singular values of the factor
    keep = sv**2 > PINV_RTOL * sv[0] ** 2 if sv[0] > 0 else np.zeros_like(sv, dtype=bool)
    r = int(np.count_nonzero(keep))
    return vt[:r].T, r


def conditional_cross_covariance(joint: JointGaussian, idx_a, idx_b, idx_c) -> PartialCovariance:
    idx_a, idx_b, idx_c = (np.asarray(i, dtype=int) for i in (idx_a, idx_b, idx_c))
    if joint.factor is not None:
        f = joint.factor
        basis, r = _range_basis(f[idx_c])
        ra = f[idx_a] - (f[idx_a] @ basis) @ basis.T
        rb = f[idx_b] - (f[idx_b] @ basis) @ basis.T
        return PartialCovariance(ra @ rb.T, r, np.sum(ra**2, axis=1), np.sum(rb**2, axis=1))
    cov = joint.cov
    s_cc = cov[np.ix_(idx_c, idx_c)]
    if len(idx_c):
        d = _row_scale(np.sqrt(np.clip(np.diag(s_cc), 0.0, None)))
        corr = s_cc / np.outer(d, d)
        pinv = np.linalg.pinv(corr, rcond=PINV_RTOL, hermitian=True) / np.outer(d, d)
        eig = np.linalg.eigvalsh(corr)
        r = int(np.count_nonzero(eig > PINV_RTOL * eig[-1])) if eig[-1] > 0 else 0
    else:
        pinv = np.zeros((0, 0))
        r = 0

    def block(i, j):
        return cov[np.ix_(i, j)] - cov[np.ix_(i, idx_c)] @ pinv @ cov[np.ix_(idx_c, j)]

    return PartialCovariance(
        block(idx_a, idx_b), r, np.diag(block(idx_a, idx_a)).copy(), np.diag(block(idx_b, idx_b)).copy()
    )


@dataclass(frozen=True)
class CIVerdict:
    max_abs_partial_cov: float
    normalized: float
    independent: bool
    conditioning_rank: int
    worst_pair: tuple | None = None  # (label in A, label in B) attaining ``normalized``


def normalized_partial(pc: PartialCovariance, eps_var: float = EPS_VAR) -> np.ndarray:
    """Partial correlations; entries with a tiny conditional variance stay unnormalized."""
    scale = np.sqrt(np.outer(pc.var_a, pc.var_b))
    ok = (pc.var_a[:, None] >= eps_var) & (pc.var_b[None, :] >= eps_var)
    out = np.abs(pc.matrix).copy()
    out[ok] = out[ok] / scale[ok]
    return out


def ci_test(
    problem: Problem,
    times_a: Sequence[float],
    times_b: Sequence[float],
    cond_labels: Sequence[Label],
    eps_ci: float = EPS_CI,
    eps_var: float = EPS_VAR,
) -> CIVerdict:
    """Are ``{Y(t): t in times_a}`` and ``{Y(t): t in times_b}`` independent given ``cond_labels``?

    Each time in ``times_a``/``times_b`` contributes all n coordinates. The
    verdict is "independent" when every partial correlation is at most
    ``eps_ci``.
    """
    n = problem.n
    la = [(t, k) for t in times_a for k in range(1, n + 1)]
    lb = [(t, k) for t in times_b for k in range(1, n + 1)]
    lc = [(float(t), int(k)) for t, k in cond_labels]
    joint = joint_law(problem, la + lb + lc)
    ia = np.arange(len(la))
    ib = len(la) + np.arange(len(lb))
    ic = len(la) + len(lb) + np.arange(len(lc))
    pc = conditional_cross_covariance(joint, ia, ib, ic)
    if pc.matrix.size == 0:
        return CIVerdict(0.0, 0.0, True, pc.rank)
    norm = normalized_partial(pc, eps_var)
    i, j = np.unravel_index(int(np.argmax(norm)), norm.shape)
    worst = float(norm[i, j])
    return CIVerdict(float(np.max(np.abs(pc.matrix))), worst, worst <= eps_ci, pc.rank, (la[i], lb[j]))


@dataclass(frozen=True)
class SupportRank:
    rank: int
    expected_rank: int
    residual: float  # distance of the null space from the span of the boundary rows
    constraint_mean: np.ndarray
    constraint_var: np.ndarray
    nullspace_check: bool


def support_rank(problem: Problem, times: Sequence[float], eps_rank: float = EPS_RANK) -> SupportRank:
    """Rank of the stacked covariance of ``(Y(s_1), ..., Y(s_k))``.

    The law lives on the affine set cut out by the boundary conditions, so the
    rank should be ``n k - n`` with the null space spanned by the boundary
    rows acting on the n-th coordinates.
    """
    times = sorted({float(t) for t in times})
    for p in problem.boundary.points:
        if not any(abs(p - t) <= NODE_TOL for t in times):
            raise MissingSupportPoint(f"boundary point {p} missing from the time set")
    n, k = problem.n, len(times)
    labels = [(t, c) for t in times for c in range(1, n + 1)]
    joint = joint_law(problem, labels)
    d = _row_scale(np.linalg.norm(joint.factor, axis=1))
    u, sv, _ = np.linalg.svd(joint.factor / d[:, None], full_matrices=True)
    rank = int(np.count_nonzero(sv**2 > PINV_RTOL * sv[0] ** 2)) if sv.size and sv[0] > 0 else 0
    # w annihilates the scaled factor iff D^{-1} w annihilates the original
    null, _ = np.linalg.qr(u[:, rank:] / d[:, None]) if rank < len(d) else (u[:, rank:], None)

    constraint = np.zeros((n, n * k))
    alpha = problem.boundary.matrix
    for j, p in enumerate(problem.boundary.points):
        ti = min(range(k), key=lambda i: abs(times[i] - p))
        constraint[:, ti * n + (n - 1)] += alpha[:, j]
    q, _ = np.linalg.qr(constraint.T)
    residual = float(np.linalg.norm(null - q @ (q.T @ null), 2)) if null.size else 0.0
    c_mean = constraint @ joint.mean
    c_var = np.diag(constraint @ joint.cov @ constraint.T)
    expected = n * k - n
    return SupportRank(rank, expected, residual, c_mean, c_var, rank == expected and residual <= eps_rank)
