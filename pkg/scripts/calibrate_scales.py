"""Observation-margin constant K and anti-concentration frequencies.

K is the largest (L(gamma_s) - L(sum of scales)) * k ln d seen over random
scale multisets; the anti-concentration sweep reports how often both events
hold for a few candidate constants.  Seeds are disjoint from the suite's.
"""
import argparse
import math

import numpy as np

from relulearn.network import unit_vector
from relulearn.scales import ScaleParams, check_anticoncentration, level, level_inverse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=9001)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        d, k = int(rng.choice([2, 4, 8])), int(rng.integers(2, 9))
        p = ScaleParams(d=d, k=k, R=2.0)
        gs = level_inverse(rng.uniform(1.0, 4.0), p)
        if gs < 1e-280:
            continue
        s = int(rng.integers(1, k + 1))
        gam = np.sort(rng.uniform(0, 1, s)) * gs
        gam[-1] = gs
        worst = max(worst, (level(gs, p) - level(float(gam.sum()), p)) * k * math.log(d))
    print(f"observation margin: max (L(gs) - L(sum)) k ln d = {worst:.4f}")
    d, k = 50, 8
    us = np.array([unit_vector(rng, d) for _ in range(k)])
    gs = [unit_vector(rng, d) for _ in range(args.trials)]
    for c, cp in [(0.02, 2.0), (0.05, 3.0), (0.1, 4.0)]:
        res = [check_anticoncentration(us, g, c, cp) for g in gs]
        print(f"c={c} c'={cp}: pairs {np.mean([r.holds_pairs for r in res]):.3f} "
              f"floor {np.mean([r.holds_floor for r in res]):.3f}")


if __name__ == "__main__":
    main()
