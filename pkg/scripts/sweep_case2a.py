"""Net coverage of the planted gapped neuron as the net granularity varies.

For each upsilon, runs the subspace-plus-net trial on a range of seeds and
prints the covered fraction and the worst folded distance over 2*upsilon.
"""
import argparse
import math

from relulearn.harness import case2a_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--upsilon", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=5000)
    ap.add_argument("--n", type=int, default=1_000_000)
    args = ap.parse_args()
    print(f"{'upsilon':>8} {'planted':>8} {'covered':>8} {'worst/2u':>9} dims")
    for u in args.upsilon:
        rows = [case2a_trial(args.seed + t, u, args.n) for t in range(args.trials)]
        planted = [r for r in rows if r["planted"]]
        worst = max((r["distance"] for r in planted), default=math.inf)
        dims = sorted({r.get("basis_dim", 0) for r in planted})
        print(f"{u:8.3f} {len(planted):8d} {sum(r['covered'] for r in planted):8d} {worst / (2 * u):9.3f} {dims}")


if __name__ == "__main__":
    main()
