"""Oracle learner on the two end-to-end instances over several seeds.

Prints squared distance to the truth, stage count, and validation loss per run,
optionally with label noise.
"""
import argparse

from relulearn.harness import MOMENT_N, _oracle_run, acceptance_instances


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--n", type=int, default=MOMENT_N)
    ap.add_argument("--instance", choices=("well_separated", "line_multiscale"), nargs="+",
                    default=["well_separated", "line_multiscale"])
    args = ap.parse_args()
    insts = acceptance_instances()
    for name in args.instance:
        truth, scale = insts[name]
        for s in range(args.seeds):
            _, info = _oracle_run(truth, scale, s, args.noise, args.n)
            print(f"{name:16s} seed={s} l2_sq={info['l2_sq']:.4g} stages={info['stages']} "
                  f"bound={info['stage_bound']:.2f} val_loss={info['validation_loss']:.4g} complete={info['complete']}")


if __name__ == "__main__":
    main()
