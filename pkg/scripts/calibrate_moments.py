"""Frobenius error of the order-2 and order-4 moment estimators at N samples.

Prints per-order quantiles for the plain and residual estimators; the tolerances
in relulearn.harness were fixed from this output with seeds disjoint from the suite.
"""
import argparse

import numpy as np

from relulearn.moments import estimate_moments, estimate_residual_moments, exact_moment_tensor
from relulearn.network import gen_instance, sample_labeled, to_abs_form


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=9001)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--d", type=int, default=4)
    args = ap.parse_args()
    errs = {(kind, l): [] for kind in ("plain", "residual") for l in (2, 4)}
    for t in range(args.trials):
        net = to_abs_form(gen_instance("well_separated", args.k, args.d, R=1.0, seed=args.seed + t))
        learned = net.drop([0])
        s = sample_labeled(net, args.n, seed=args.seed + 10_000 + t)
        for l in (2, 4):
            T = exact_moment_tensor(net, l)
            errs["plain", l].append((estimate_moments(s, l) - T).frobenius_norm())
            R = T - exact_moment_tensor(learned, l)
            errs["residual", l].append((estimate_residual_moments(s, learned, l) - R).frobenius_norm())
    for (kind, l), e in errs.items():
        q = np.quantile(e, [0.5, 0.9, 0.95, 1.0])
        print(f"{kind:8s} l={l}  median={q[0]:.4f}  q90={q[1]:.4f}  q95={q[2]:.4f}  max={q[3]:.4f}")


if __name__ == "__main__":
    main()
