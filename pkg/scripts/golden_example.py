"""X' = noise with X(1/2) + X(1) = 0: numerics against the hand solution.

The solution is X(t) = W(t) - (W(1/2) + W(1)) / 2, so Var X(t) = 5/8 - min(t, 1/2) and the
influence kernel is 1/2 on [1/2, 1) minus the indicator of t <= s.
"""

import argparse
import time

import numpy as np

from sdebvp import check_wellposed, covariance_kernel, make_problem, sample_solution, sample_wiener
from sdebvp.green import influence_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--paths", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    p = make_problem([0.0], [0.5, 1.0], [[1.0, 1.0]], h=args.h)
    print(f"det J = {check_wellposed(p).det:.12f} (hand value 2)")

    grid = p.grid
    g = influence_table(p, grid, "right")[:, :-1, 0]
    s = grid[:-1]
    closed = 0.5 * (s >= 0.5)[None, :] - (grid[:, None] <= s[None, :])
    print(f"max kernel error over {g.size} node pairs: {np.max(np.abs(g - closed)):.2e}")

    for t in (0.25, 0.5, 0.75, 1.0):
        v = covariance_kernel(p, t, t)[0, 0]
        print(f"Var X({t}) = {v:.9f}  (hand {5 / 8 - min(t, 0.5):.9f})")

    i = p.node_index(0.5)
    worst = 0.0
    for k in range(args.paths):
        w = sample_wiener(grid, args.seed, k)
        y = sample_solution(p, w).values[:, 0]
        worst = max(worst, np.max(np.abs(y - (w.values - 0.5 * (w.values[i] + w.values[-1])))))
    print(f"max path error over {args.paths} paths: {worst:.2e}")
    print(f"elapsed {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
