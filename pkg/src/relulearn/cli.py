"""Command-line entry point: ``relulearn <subcommand> [--config PATH] [--seed N] [--out PATH] [--profile P]``.

Exit status is 0 when every selected check passes, 1 when one fails and 2 on
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .clumping import (GAME_FAMILIES, NOISY_PHI, RandomAdversary, from_projection, null_adversary, play_noiseless,
                       play_noisy, random_game_vector, worst_case_adversary)
from .moments import estimate_moments, exact_moment_tensor
from .network import ReluNetwork, dump_network, load_network, sample_labeled, to_abs_form, unit_vector
from .powersum import parse_instance_line, powersum_witness
from .scales import ScaleTrace, check_anticoncentration, find_gapped_scale, project

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="INI experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--profile", choices=harness.PROFILES, help="suite sizes (default: ci)")
    return p


def _instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("well_separated", "random_sphere", "line_multiscale"))
    p.add_argument("--k", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--sep", type=float)
    p.add_argument("--ladder", help="comma-separated gaps for line_multiscale")
    p.add_argument("--signs", choices=("random", "positive", "alternating"))
    p.add_argument("--noise-variance", type=float, dest="noise_variance")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="relulearn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a planted network")
    _instance_flags(g)

    m = sub.add_parser("estimate-moments", parents=[common], help="estimate moment tensors from samples")
    _instance_flags(m)
    m.add_argument("--network", metavar="PATH", help="network file (default: the configured instance)")
    m.add_argument("--orders", type=int, nargs="+", default=[2, 4])
    m.add_argument("--n", type=int, default=harness.MOMENT_N)

    ps = sub.add_parser("powersum-check", parents=[common], help="power-sum and Vandermonde checks")
    ps.add_argument("--instances", metavar="PATH", help="file of instance lines; default runs the suites")

    c = sub.add_parser("clump-sim", parents=[common], help="play the clumping game")
    c.add_argument("--w", help="comma-separated game vector (default: random)")
    c.add_argument("--k", type=int, default=64)
    c.add_argument("--family", choices=GAME_FAMILIES, default="uniform")
    c.add_argument("--tau", type=float)
    c.add_argument("--adversary", choices=("none", "null", "worst", "random"), default="none")

    s = sub.add_parser("scales-trace", parents=[common], help="gapped-scale search on a projection")
    _instance_flags(s)
    s.add_argument("--network", metavar="PATH")

    le = sub.add_parser("learn", parents=[common], help="run the learner and write a report")
    _instance_flags(le)
    le.add_argument("--branch-mode", choices=("oracle", "beam", "exhaustive"), dest="branch_mode")
    le.add_argument("--n-samples", type=int, dest="n_samples")

    su = sub.add_parser("suite", parents=[common], help="run acceptance suites and write a report")
    su.add_argument("suites", nargs="*", help=f"any of {list(harness.SUITES)} (default: config or all)")
    su.add_argument("--csv", metavar="PATH", help="also write the csv summary here")

    r = sub.add_parser("report", parents=[common], help="re-emit a stored report")
    r.add_argument("path")
    r.add_argument("--format", choices=harness.REPORT_FORMATS, default="json")
    return ap


# -- helpers ------------------------------------------------------------------------------------

def _config(args, suites=None) -> harness.ExperimentConfig:
    if args.config:
        cfg = harness.load_config(args.config, args.seed, args.profile)
    else:
        cfg = harness.default_config(seed=args.seed or 0, profile=args.profile or "ci")
    inst = cfg.instance
    overrides = {k: getattr(args, k) for k in ("kind", "k", "d", "R", "sep", "signs", "noise_variance")
                 if getattr(args, k, None) is not None}
    if getattr(args, "ladder", None):
        overrides["ladder"] = tuple(float(x) for x in args.ladder.split(","))
    if overrides:
        inst = replace(inst, **overrides)
        learner = None
    else:
        learner = cfg.learner
    cfg = harness.ExperimentConfig(inst, learner, tuple(suites) if suites is not None else cfg.suites,
                                   cfg.seed, cfg.profile, cfg.out)
    lk = {k: getattr(args, k) for k in ("branch_mode", "n_samples") if getattr(args, k, None) is not None}
    if lk:
        cfg = replace(cfg, learner=replace(cfg.learner, **lk))
    return cfg


def _write(args, data: bytes | str, cfg: harness.ExperimentConfig | None = None) -> None:
    if isinstance(data, str):
        data = data.encode("utf-8")
    path = args.out or (cfg.out if cfg is not None else None)
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _json(obj) -> str:
    return json.dumps(harness._plain(obj), sort_keys=True, indent=2) + "\n"


def _network(args, cfg):
    if getattr(args, "network", None):
        with open(args.network, encoding="utf-8") as fh:
            return load_network(fh.read())
    return cfg.instance.build()


def _progress(name: str, seconds: float) -> None:
    print(f"  {name}: {seconds:.1f}s", file=sys.stderr)


# -- subcommands --------------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _config(args)
    _write(args, dump_network(cfg.instance.build()), cfg)
    return EXIT_OK


def cmd_estimate_moments(args) -> int:
    cfg = _config(args)
    net = _network(args, cfg)
    s = sample_labeled(net, args.n, cfg.instance.noise_variance, cfg.seed)
    out = {"n": args.n, "seed": cfg.seed, "orders": {}}
    for l in args.orders:
        est = estimate_moments(s, l)
        entry = {"estimate": est.values if l > 1 else est}
        if l == 1 or l % 2 == 0:
            exact = exact_moment_tensor(net, l)
            err = est - exact
            entry["frobenius_err"] = float(np.linalg.norm(err)) if l == 1 else err.frobenius_norm()
        out["orders"][str(l)] = entry
    _write(args, _json(out), cfg)
    return EXIT_OK


def cmd_powersum_check(args) -> int:
    cfg = _config(args)
    if args.instances:
        rows, ok = [], True
        with open(args.instances, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                w = powersum_witness(parse_instance_line(line))
                rows.append({"line": n, "l_star": w.l_star, "value": w.value, "bound": w.bound, "holds": w.holds})
                ok &= w.holds
        _write(args, _json({"instances": rows, "all_hold": ok}), cfg)
        return EXIT_OK if ok else EXIT_FAIL
    report = harness.run_experiment(replace(cfg, suites=("powersum", "vandermonde")))
    _write(args, harness.emit_report(report), cfg)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_clump_sim(args) -> int:
    cfg = _config(args)
    rng = np.random.default_rng(cfg.seed)
    w = [float(x) for x in args.w.split(",")] if args.w else random_game_vector(rng, args.k, args.family)
    if args.adversary == "none":
        tr = play_noiseless(w, args.tau)
    else:
        adv = {"null": null_adversary, "worst": worst_case_adversary,
               "random": RandomAdversary(cfg.seed)}[args.adversary]
        tr = play_noisy(w, args.tau, adv, phi=NOISY_PHI)
    d = tr.as_dict()
    _write(args, _json(d), cfg)
    return EXIT_OK if tr.violations == 0 and tr.final.w == (0.0,) else EXIT_FAIL


def cmd_scales_trace(args) -> int:
    cfg = _config(args)
    net = _network(args, cfg)
    net = to_abs_form(net) if isinstance(net, ReluNetwork) else net
    p = cfg.learner.scale
    if p.d != net.d or p.k != net.k:
        p = replace(p, d=net.d, k=net.k)
    rng = np.random.default_rng(cfg.seed)
    g = unit_vector(rng, net.d)
    proj = project(net, g)
    trace = ScaleTrace()
    find_gapped_scale(proj, p, trace)
    game = from_projection(proj, p)
    anti = check_anticoncentration(net.directions, g, p.anti_c, p.anti_c_prime)
    out = {"g": g, "projections": proj.v, "order": proj.order, "anticoncentration": anti.holds,
           "search": trace.as_dict(), "game": {"w": list(game.state.w), "tau": game.tau},
           "plan": [m.as_list() for m in play_noiseless(game.state, game.tau).moves()]}
    _write(args, _json(out), cfg)
    return EXIT_OK


def cmd_learn(args) -> int:
    cfg = _config(args)
    report = harness.run_experiment(cfg, learn=True, progress=_progress)
    _write(args, harness.emit_report(report), cfg)
    learned = report.traces[-1]
    print(f"selected {learned['selected']!r}: validation loss {learned['validation_loss']:.4g}, "
          f"squared distance to truth {learned['l2_sq_to_truth']:.4g}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_suite(args) -> int:
    names = args.suites or None
    cfg = _config(args, names)
    if not cfg.suites:
        cfg = replace(cfg, suites=tuple(harness.SUITES))
    report = harness.run_experiment(cfg, progress=_progress)
    for r in sorted(report.results, key=lambda x: x.criterion):
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.criterion:2d} {r.name}" + (f"  ({r.notes})" if r.notes else ""),
              file=sys.stderr)
    _write(args, harness.emit_report(report), cfg)
    if args.csv:
        with open(args.csv, "wb") as fh:
            fh.write(harness.emit_report(report, "csv_summary"))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_report(args) -> int:
    with open(args.path, "rb") as fh:
        report = harness.read_report(fh.read())
    _write(args, harness.emit_report(report, args.format))
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "generate": cmd_generate,
    "estimate-moments": cmd_estimate_moments,
    "powersum-check": cmd_powersum_check,
    "clump-sim": cmd_clump_sim,
    "scales-trace": cmd_scales_trace,
    "learn": cmd_learn,
    "suite": cmd_suite,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (harness.ConfigError, harness.SchemaVersionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
