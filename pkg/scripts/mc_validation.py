"""Monte Carlo covariances on random problems against the exact Gaussian law."""

import argparse
import time

import numpy as np

from sdebvp.suite import mc_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--h", type=float, default=1e-3)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    ok = 0
    for i in range(args.trials):
        t = mc_trial(rng, args.paths, h=args.h)
        ok += t.passed
        labels = " ".join(f"Y{k}({s:g})" for s, k in t.labels)
        print(f"trial {i:2d}  max z {t.max_z:5.2f}  {'ok ' if t.passed else 'OUT'}  {labels}")
    print(f"{ok}/{args.trials} trials within 4 stderr, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
