"""Green function of the lateral boundary problem and its noise-influence column.

With atomic boundary measures the running integral of ``dF J^{-1}`` is a step
function of ``s`` that jumps at the boundary points, so

    G(t, s) = J(t)^{-1} [ S(s) - 1{t <= s} I ] J(s),
    S(s)    = sum_{t_j <= s} alpha[:, j] (n-th row of J(t_j)^{-1}).

For fixed ``t``, ``G(t, .)`` is right-continuous with jumps at the boundary
points and at ``s = t``. All these are grid nodes, so each node carries a
right limit (its value) and a left limit; quadrature and path synthesis pick
whichever limit belongs to the panel at hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ode import require_wellposed
from .problem import Problem


@dataclass(frozen=True)
class _GreenData:
    j_inv: np.ndarray  # (N+1, n, n)
    j_vals: np.ndarray  # (N+1, n, n)
    s_right: np.ndarray  # S(s) at each node, (N+1, n, n)
    s_left: np.ndarray  # S(s-) at each node
    point_nodes: np.ndarray


def _data(problem: Problem) -> _GreenData:
    if "green" not in problem._memo:
        J = require_wellposed(problem)
        j_inv = J.inverse_values()
        n = problem.n
        size = len(problem.grid)
        idx = problem.node_indices(problem.boundary.points)
        alpha = problem.boundary.matrix
        jumps = np.zeros((size, n, n))
        for j, k in enumerate(idx):
            jumps[k] += np.outer(alpha[:, j], j_inv[k][-1, :])
        s_right = np.cumsum(jumps, axis=0)
        s_left = s_right - jumps
        problem._memo["green"] = _GreenData(j_inv, J.values, s_right, s_left, idx)
    return problem._memo["green"]


def green_matrix(problem: Problem, t: float, s: float) -> np.ndarray:
    """``G(t, s)`` (value at the node, i.e. the right limit in ``s``)."""
    d = _data(problem)
    i, k = problem.node_index(t), problem.node_index(s)
    inner = d.s_right[k] - (np.eye(problem.n) if i <= k else 0.0)
    return d.j_inv[i] @ inner @ d.j_vals[k]


def influence_table(problem: Problem, times, side: str = "right") -> np.ndarray:
    """First column of ``G(t, s)`` for each ``t`` in ``times`` and every node ``s``.

    ``side="right"`` gives node values ``g(t, s)``, ``side="left"`` gives the
    left limits ``g(t, s-)``. Shape ``(len(times), N+1, n)``.
    """
    d = _data(problem)
    rows = problem.node_indices(np.atleast_1d(times))
    cols = np.arange(len(problem.grid))
    w = d.j_vals[:, :, 0]
    if side == "right":
        v = np.einsum("kab,kb->ka", d.s_right, w)
        mask = rows[:, None] <= cols[None, :]
    elif side == "left":
        v = np.einsum("kab,kb->ka", d.s_left, w)
        mask = rows[:, None] < cols[None, :]
    else:
        raise ValueError(f"side must be 'right' or 'left', not {side!r}")
    inner = v[None, :, :] - mask[:, :, None] * w[None, :, :]
    return np.einsum("rab,rkb->rka", d.j_inv[rows], inner)


@dataclass(frozen=True)
class InfluenceRow:
    t: float
    grid: np.ndarray
    values: np.ndarray  # g(t, s) at nodes, (N+1, n)
    left: np.ndarray  # g(t, s-) at nodes
    breakpoints: tuple[float, ...]


def influence_column(problem: Problem, t: float) -> InfluenceRow:
    """The noise-influence column ``g(t, .)`` tabulated on the grid."""
    right = influence_table(problem, [t], "right")[0]
    left = influence_table(problem, [t], "left")[0]
    bps = tuple(sorted(set(problem.boundary.points) | {float(t)}))
    return InfluenceRow(float(t), problem.grid, right, left, bps)


def mean_values(problem: Problem) -> np.ndarray:
    """``J(t)^{-1} c`` at every node, shape (N+1, n)."""
    d = _data(problem)
    return d.j_inv @ problem.boundary.rhs
