"""Sweep the game constants: smallest threshold factor c with no strategy failure,
and the largest observed moves / log2(k) ratio.  Uses seeds disjoint from the tests."""
import argparse
import math

import numpy as np

from relulearn.clumping import (GAME_FAMILIES, RandomAdversary, StrategyError, default_tau,
                                play_noiseless, play_noisy, random_game_vector, worst_case_adversary)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=9001)
    ap.add_argument("--ks", type=int, nargs="+", default=[3, 5, 8, 17, 64, 512, 1024])
    ap.add_argument("--cs", type=float, nargs="+", default=[0.5, 0.75, 1.0, 1.5, 2.0])
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    for c in args.cs:
        fails = viol = 0
        ratio = 0.0
        for k in args.ks:
            tau = default_tau(k, c)
            for t in range(args.trials):
                w = random_game_vector(rng, k, GAME_FAMILIES[t % 3], high=tau + 2)
                try:
                    tr = play_noiseless(w, tau)
                    adv = worst_case_adversary if t % 2 else RandomAdversary(int(rng.integers(1 << 31)))
                    viol += tr.violations + play_noisy(w, tau, adv).violations
                    ratio = max(ratio, tr.n_moves / math.log2(k))
                except StrategyError:
                    fails += 1
        print(f"c={c:<5} strategy_failures={fails:<5} violations={viol:<3} max_moves/log2k={ratio:.3f}")


if __name__ == "__main__":
    main()
