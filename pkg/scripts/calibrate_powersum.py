"""Smallest constant C for which the power-sum lower bound held on random and
LP-adversarial instances.  Seeds are disjoint from the suite's."""
import argparse

import numpy as np

from relulearn.powersum import adversarial_weights, powersum_witness, random_instance


def needed_C(inst) -> float:
    """C at which the bound is tight for this instance (0 when it holds with C = 0)."""
    w0 = powersum_witness(inst, C=0.0)
    slope = inst.R * inst.k * (inst.k_prime - 1) * inst.beta
    if w0.value >= w0.bound or slope == 0:
        return 0.0
    return (w0.bound - w0.value) / slope


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=9001)
    ap.add_argument("--kmax", type=int, default=6)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    for k in range(1, args.kmax + 1):
        rand = adv = 0.0
        for _ in range(args.trials):
            inst = random_instance(rng, k)
            rand = max(rand, needed_C(inst))
            adv = max(adv, needed_C(adversarial_weights(inst)))
        print(f"k={k}  needed C: random={rand:.3g}  adversarial={adv:.3g}")


if __name__ == "__main__":
    main()
