"""Experiment configuration, acceptance suites and deterministic reports.

Configs are INI files read with :mod:`configparser`.  Every suite draws its
randomness from ``SeedSequence([seed, criterion])`` so a report depends only on
the config.  Reports carry no wall-clock fields; callers that want timings
measure them outside the report.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e
from scipy import integrate

from . import __version__
from .clumping import (GAME_FAMILIES, GAME_MOVES_C, GAME_TAU_C, NOISY_PHI, ClumpState, Move, RandomAdversary,
                       apply_move, move_budget, play_noiseless, play_noisy, random_game_vector,
                       worst_case_adversary)
from .hermite import HermiteBasisCache, relu_hermite_coeff, relu_hermite_coeff_normalized
from .learner import (DEFAULT_NET_CAP, NOISE_Z, Candidate, CandidateNet, LearnerConfig, folded_distance,
                      moment_subspace, recursive_learn, residual_moments, stage_count, validate_select)
from .moments import estimate_moments, estimate_residual_moments, exact_moment_tensor
from .network import (AbsNetwork, InstanceParams, ReluNetwork, SampleSource, gen_instance, l2_dist,
                      sample_labeled, to_abs_form, unit_vector)
from .powersum import (POWERSUM_C, power_correlation, powersum_witness, random_instance,
                       tightness_correlation_exact, tightness_instance, vandermonde_solve, vieta_check)
from .scales import (ANTI_C, ANTI_C_PRIME, LEVEL_STEP, OBSERVATION_MARGIN_K, Projection, ScaleParams, T_of,
                     check_anticoncentration, close_far_sets, find_gapped_scale, level, level_inverse, project)

SCHEMA_VERSION = "1"
PROFILES = ("ci", "full")
REPORT_FORMATS = ("json", "csv_summary")

# Frobenius tolerances at N = 1e6, fixed by scripts/calibrate_moments.py
MOMENT_TOL = {2: 0.02, 4: 0.05}
MOMENT_N = 1_000_000


class SchemaVersionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceSpec:
    kind: str = "well_separated"
    k: int = 2
    d: int = 4
    R: float = 2.0
    seed: int = 0
    sep: float = 1.0
    ladder: tuple = ()
    signs: str = "random"
    noise_variance: float = 0.0

    def build(self) -> ReluNetwork:
        params = InstanceParams(sep=self.sep, ladder=tuple(self.ladder), signs=self.signs)
        return gen_instance(self.kind, self.k, self.d, self.R, params, self.seed)


@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceSpec = field(default_factory=InstanceSpec)
    learner: LearnerConfig | None = None
    suites: tuple = ()
    seed: int = 0
    profile: str = "ci"
    out: str | None = None

    def __post_init__(self):
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suites {unknown}; known: {list(SUITES)}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an explicit integer")
        if self.learner is None:
            scale = ScaleParams.for_problem(self.instance.d, self.instance.k, R=self.instance.R)
            object.__setattr__(self, "learner", LearnerConfig(scale=scale, seed=self.seed))

    def echo(self) -> dict:
        lc = asdict(self.learner)
        return {"instance": asdict(self.instance), "learner": lc, "suites": list(self.suites),
                "seed": self.seed, "profile": self.profile}


def _coerce(text: str, like):
    if isinstance(like, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, tuple):
        return tuple(float(x) for x in text.replace(",", " ").split())
    return text.strip()


def _section(parser, name: str, cls, base: dict | None = None) -> dict:
    out = dict(base or {})
    if not parser.has_section(name):
        return out
    known = {f.name: f for f in fields(cls) if f.default is not MISSING}
    for key, raw in parser.items(name):
        if key not in known:
            raise ConfigError(f"unknown or derived key {key!r} in [{name}]")
        default = known[key].default
        if raw.strip().lower() == "none":
            out[key] = None
        elif default is None:
            out[key] = float(raw)
        else:
            out[key] = _coerce(raw, default)
    return out


def parse_config(text: str, seed: int | None = None, profile: str | None = None) -> ExperimentConfig:
    """Parse an INI config; ``seed`` and ``profile`` override the file."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for sec in cp.sections():
        if sec not in ("experiment", "instance", "scale", "learner"):
            raise ConfigError(f"unknown section [{sec}]")
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    try:
        inst = InstanceSpec(**_section(cp, "instance", InstanceSpec))
        s = int(exp.get("seed", 0)) if seed is None else seed
        scale_kw = _section(cp, "scale", ScaleParams)
        eps = float(cp.get("learner", "eps", fallback="0.05"))
        scale = ScaleParams.for_problem(inst.d, inst.k, R=inst.R, eps=eps, **scale_kw)
        learn_kw = _section(cp, "learner", LearnerConfig)
        learn_kw.setdefault("seed", s)
        learner = LearnerConfig(scale=scale, **learn_kw)
        suites = tuple(x.strip() for x in exp.get("suites", "").replace(",", " ").split() if x.strip())
        return ExperimentConfig(inst, learner, suites, s, profile or exp.get("profile", "ci"),
                                exp.get("out") or None)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str, seed: int | None = None, profile: str | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), seed, profile)


def default_config(suites=(), seed: int = 0, profile: str = "ci") -> ExperimentConfig:
    return ExperimentConfig(suites=tuple(suites), seed=seed, profile=profile)


# -- reports -------------------------------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    criterion: int
    passed: bool
    measured: dict
    bounds: dict
    samples: int = 0
    notes: str = ""


@dataclass
class Report:
    schema_version: str
    config: dict
    constants: dict
    results: list
    traces: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def _plain(x):
    """JSON-ready copy with Python scalars; tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (frozenset, set)):
        return sorted(_plain(v) for v in x)
    return x


def report_dict(r: Report) -> dict:
    return _plain({"schema_version": r.schema_version, "config": r.config, "constants": r.constants,
                   "results": [asdict(x) for x in r.results], "traces": r.traces})


def emit_report(r: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report_dict(r), sort_keys=True, indent=2) + "\n").encode("utf-8")
    if fmt == "csv_summary":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["criterion", "suite", "passed", "samples", "measured", "bounds", "notes"])
        for x in sorted(r.results, key=lambda x: x.criterion):
            w.writerow([x.criterion, x.name, "PASS" if x.passed else "FAIL", x.samples,
                        json.dumps(_plain(x.measured), sort_keys=True),
                        json.dumps(_plain(x.bounds), sort_keys=True), x.notes])
        return buf.getvalue().encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")


def read_report(data: bytes | str) -> Report:
    d = json.loads(data)
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"report schema {version!r} does not match {SCHEMA_VERSION!r}")
    return Report(version, d["config"], d["constants"], [SuiteResult(**x) for x in d["results"]],
                  d.get("traces", []))


def frozen_constants() -> dict:
    p = ScaleParams(d=4, k=2)
    return {
        "package_version": __version__,
        "powersum_C": POWERSUM_C,
        "game_tau_c": GAME_TAU_C,
        "game_moves_C": GAME_MOVES_C,
        "noisy_phi": NOISY_PHI,
        "level_step": LEVEL_STEP,
        "observation_margin_K": OBSERVATION_MARGIN_K,
        "anti_c": ANTI_C,
        "anti_c_prime": ANTI_C_PRIME,
        "c_T": p.c_T,
        "lambda_power": p.lambda_power,
        "Lambda": p.Lambda,
        "omega_rule": "sqrt(eps_prime)",
        "upsilon_default": LearnerConfig(scale=p).upsilon,
        "noise_floor_z": NOISE_Z,
        "span_tol": LearnerConfig(scale=p).span_tol,
        "net_cap": DEFAULT_NET_CAP,
        "moment_tol": {str(k): v for k, v in MOMENT_TOL.items()},
    }


# -- suites ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteContext:
    profile: str
    seed: int

    @property
    def full(self) -> bool:
        return self.profile == "full"

    def rng(self, criterion: int, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, criterion, stream]))

    def int_seed(self, criterion: int, stream: int) -> int:
        return int(np.random.SeedSequence([self.seed, criterion, stream]).generate_state(1)[0])

    def pick(self, ci, full):
        return full if self.full else ci


@dataclass(frozen=True)
class Suite:
    name: str
    criterion: int
    title: str
    run: Callable[[SuiteContext], SuiteResult]


def _gaussian_expect(f) -> float:
    g = lambda z: f(z) * math.exp(-z * z / 2)
    kw = dict(epsabs=1e-12, epsrel=1e-12, limit=200)
    return (integrate.quad(g, -np.inf, 0.0, **kw)[0] + integrate.quad(g, 0.0, np.inf, **kw)[0]) / math.sqrt(2 * math.pi)


def suite_hermite(ctx: SuiteContext) -> SuiteResult:
    nodes, weights = hermite_e.hermegauss(40)
    weights = weights / math.sqrt(2 * math.pi)
    table = HermiteBasisCache(12).eval_all_normalized(12, nodes)
    ortho = float(np.max(np.abs((table * weights) @ table.T - np.eye(13))))
    coef = 0.0
    for l in range(13):
        ref = _gaussian_expect(lambda z: max(z, 0.0) * HermiteBasisCache(12).eval_normalized(l, z))
        coef = max(coef, abs(relu_hermite_coeff_normalized(l) - ref))
    exact = (relu_hermite_coeff(0) == 1 / math.sqrt(2 * math.pi) and relu_hermite_coeff(1) == 0.5
             and relu_hermite_coeff(3) == 0.0)
    ok = ortho <= 1e-8 and coef <= 1e-8 and exact
    return SuiteResult("hermite", 1, ok, {"orthonormality_err": ortho, "relu_coeff_err": coef,
                                          "closed_forms_exact": exact},
                       {"orthonormality_err": 1e-8, "relu_coeff_err": 1e-8})


def suite_moments(ctx: SuiteContext) -> SuiteResult:
    n_seeds = ctx.pick(5, 20)
    need = math.ceil(0.9 * n_seeds)
    hits = {f"{kind}_l{l}": 0 for kind in ("plain", "residual") for l in MOMENT_TOL}
    worst = {key: 0.0 for key in hits}
    for t in range(n_seeds):
        net = to_abs_form(gen_instance("well_separated", 2, 4, R=1.0, seed=ctx.int_seed(2, t)))
        learned = net.drop([0])
        s = sample_labeled(net, MOMENT_N, seed=ctx.int_seed(2, 1000 + t))
        for l, tol in MOMENT_TOL.items():
            T = exact_moment_tensor(net, l)
            errs = {"plain": (estimate_moments(s, l) - T).frobenius_norm(),
                    "residual": (estimate_residual_moments(s, learned, l)
                                 - (T - exact_moment_tensor(learned, l))).frobenius_norm()}
            for kind, e in errs.items():
                key = f"{kind}_l{l}"
                hits[key] += e <= tol
                worst[key] = max(worst[key], e)
    ok = all(h >= need for h in hits.values())
    return SuiteResult("moments", 2, ok, {"seeds_within_tol": hits, "max_frobenius_err": worst, "seeds": n_seeds},
                       {"min_seeds": need, "tol": {f"l{l}": t for l, t in MOMENT_TOL.items()}},
                       samples=n_seeds * MOMENT_N)


def suite_powersum(ctx: SuiteContext) -> SuiteResult:
    rng = ctx.rng(3)
    n = ctx.pick(1000, 10_000)
    fails, slack = 0, math.inf
    for t in range(n):
        inst = random_instance(rng, 1 + t % 6)
        w = powersum_witness(inst)
        fails += not w.holds
        slack = min(slack, w.value - w.bound)
    tight_zero, tight_rel = 0.0, 0.0
    for k in range(2, 7):
        for gamma in (0.05, 0.1, 0.15):
            v, q = tightness_instance(k, gamma)
            for l in range(0, 2 * k - 2, 2):
                tight_zero = max(tight_zero, abs(power_correlation(v, q, l)))
            exact = tightness_correlation_exact(k, Fraction(gamma), 2 * k - 2)
            got = power_correlation(v, q, 2 * k - 2)
            tight_rel = max(tight_rel, abs(got - float(exact)) / abs(float(exact)))
    ok = fails == 0 and tight_zero <= 1e-9 and tight_rel <= 1e-9
    return SuiteResult("powersum", 3, ok, {"instances": n, "violations": fails, "min_slack": slack,
                                           "tightness_low_max": tight_zero, "tightness_first_rel_err": tight_rel},
                       {"violations": 0, "tightness_low_max": 1e-9, "tightness_first_rel_err": 1e-9})


def suite_vandermonde(ctx: SuiteContext) -> SuiteResult:
    rng = ctx.rng(4)
    n = ctx.pick(200, 1000)
    vieta = 0.0
    for t in range(n):
        vieta = max(vieta, vieta_check(rng.uniform(-1, 1, 1 + t % 10)))
    out_of_bound, worst_ratio = 0, 0.0
    for t in range(n):
        m = 2 + t % 5
        while True:
            nodes = np.sort(rng.uniform(0, 1, m))
            if np.min(np.diff(nodes)) >= 0.05:
                break
        sol = vandermonde_solve(nodes, rng.standard_normal(m))
        out_of_bound += not sol.within_bound
        worst_ratio = max(worst_ratio, sol.norm / sol.bound)
    ok = vieta <= 1e-10 and out_of_bound == 0
    return SuiteResult("vandermonde", 4, ok, {"vieta_max_residual": vieta, "bound_violations": out_of_bound,
                                              "max_norm_over_bound": worst_ratio, "trials": n},
                       {"vieta_max_residual": 1e-10, "bound_violations": 0})


MERGE_W = (0, 3.1, 2, 2, 3.1, 1, 1, 3.1, 2, 2, 3.1, 0)
MERGE_MOVE = ((1, 3), (4, 6), (7, 9), (10, 12))
MERGE_RESULT = (0, 1, 1, 0)


def suite_clumping(ctx: SuiteContext) -> SuiteResult:
    rng = ctx.rng(5)
    fig = apply_move(ClumpState(MERGE_W), Move(MERGE_MOVE), tau=3).w
    fig_ok = fig == MERGE_RESULT and play_noiseless(MERGE_W, tau=3).final.w == (0.0,)
    per_k = ctx.pick(100, 1000)
    noisy_per_k = ctx.pick(20, 100)
    bad_end = over_budget = 0
    ratio = 0.0
    violations = 0
    for k in (8, 64, 512, 1024):
        budget = move_budget(k)
        for t in range(per_k):
            w = random_game_vector(rng, k, GAME_FAMILIES[t % 3])
            tr = play_noiseless(w)
            bad_end += tr.final.w != (0.0,)
            over_budget += tr.n_moves > budget
            ratio = max(ratio, tr.n_moves / math.log2(k))
            if t < noisy_per_k:
                violations += play_noisy(w, adversary=worst_case_adversary).violations
                violations += play_noisy(w, adversary=RandomAdversary(int(rng.integers(1 << 31)))).violations
    ok = fig_ok and bad_end == 0 and over_budget == 0 and violations == 0
    return SuiteResult("clumping", 5, ok, {"merge_example_result": list(fig), "games_per_k": per_k,
                                           "not_terminated": bad_end, "over_budget": over_budget,
                                           "max_moves_over_log2k": ratio, "noisy_games_per_k": 2 * noisy_per_k,
                                           "legality_violations": violations},
                       {"merge_example_result": list(MERGE_RESULT), "moves_over_log2k": GAME_MOVES_C,
                        "legality_violations": 0})


def _projection_of(v) -> Projection:
    v = np.asarray(v, dtype=float)
    order = np.argsort(v, kind="stable")
    return Projection(np.zeros(1), v[order], order, np.ones(len(v)), np.ones(len(v)))


def suite_scales(ctx: SuiteContext) -> SuiteResult:
    rng = ctx.rng(6)
    p = ScaleParams(d=4, k=3, R=2.0)
    ident = max(abs(level(T_of(g, p), p) - level(g, p) - LEVEL_STEP) for g in 10 ** rng.uniform(-40, 0, 100))
    pf = ScaleParams(d=4, k=6)
    fig = _projection_of([0.0, 0.15, 0.30, 0.50, 0.70, 0.75])
    gapped = [bool(close_far_sets(fig, i, 0.1, pf)[2]) for i in range(6)]
    fig_ok = gapped[3] and not gapped[4] and not gapped[5]
    pn = ScaleParams(d=4, k=6, eps_prime=0.01)
    mismatch = 0
    for _ in range(1000):
        k = int(rng.integers(1, 7))
        spread = 10 ** rng.uniform(-4, 0)
        proj = _projection_of(rng.uniform(0, 1, k) * spread + rng.uniform(0, 1 - spread))
        mismatch += (find_gapped_scale(proj, pn) is None) != (proj.spread <= pn.eps_prime)
    d, k = 50, 8
    us = np.array([unit_vector(rng, d) for _ in range(k)])
    trials = ctx.pick(2000, 10_000)
    pairs = floors = 0
    for _ in range(trials):
        res = check_anticoncentration(us, unit_vector(rng, d))
        pairs += res.holds_pairs
        floors += res.holds_floor
    ok = ident <= 1e-9 and fig_ok and mismatch == 0 and pairs / trials >= 0.8 and floors / trials >= 0.9
    return SuiteResult("scales", 6, ok, {"level_identity_err": ident, "gap_example": gapped,
                                         "none_iff_small_spread_mismatches": mismatch,
                                         "anti_pairs_freq": pairs / trials, "anti_floor_freq": floors / trials},
                       {"level_identity_err": 1e-9, "gap_example_expected": [4], "anti_pairs_freq": 0.8,
                        "anti_floor_freq": 0.9})


def case2a_trial(seed: int, upsilon: float = 0.05, n_samples: int = MOMENT_N) -> dict:
    """Plant an instance with a detectable gapped neuron and test its net coverage.

    Even seeds use well-separated directions; odd seeds a same-sign clump of two
    nearly equal directions plus a far neuron.  ``k`` and ``d`` cycle through
    ``{2, 3}`` and ``{4, 5, 6}``.
    """
    k, d = 2 + (seed // 2) % 2, 4 + seed % 3
    rng = np.random.default_rng(seed)
    if seed % 2 == 0:
        net = to_abs_form(gen_instance("well_separated", k, d, R=1.0, params=InstanceParams(sep=0.5),
                                       seed=int(rng.integers(1 << 31))))
    else:
        k = 3
        net = to_abs_form(gen_instance("line_multiscale", 3, d, R=2.0,
                                       params=InstanceParams(ladder=(0.8, 1e-6), signs="positive"),
                                       seed=int(rng.integers(1 << 31))))
    p = ScaleParams.for_problem(d, k, R=1.0 if seed % 2 == 0 else 2.0)
    for tries in range(1, 11):
        g = unit_vector(rng, d)
        if check_anticoncentration(net.directions, g, p.anti_c, p.anti_c_prime).holds:
            break
    rec = find_gapped_scale(project(net, g), p)
    out = {"seed": seed, "k": k, "d": d, "g_tries": tries}
    if rec is None or not rec.detectable:
        return {**out, "planted": False, "covered": False}
    cfg = LearnerConfig(scale=p, upsilon=upsilon, n_samples=n_samples)
    mom = residual_moments(sample_labeled(net, n_samples, seed=int(rng.integers(1 << 31))), None,
                           cfg.orders(k, d))
    basis = moment_subspace(mom, g, k, cfg)
    u = net.directions[rec.index]
    if basis.shape[1] == 0:
        return {**out, "planted": True, "basis_dim": 0, "covered": False, "distance": math.inf}
    e = CandidateNet(basis, upsilon, k, p.R).covering_element(u)
    dist = folded_distance(e, u)
    return {**out, "planted": True, "index": rec.index, "close": sorted(rec.close),
            "basis_dim": int(basis.shape[1]), "distance": dist, "covered": dist <= 2 * upsilon}


def suite_case2a(ctx: SuiteContext) -> SuiteResult:
    n = ctx.pick(10, 100)
    trials = [case2a_trial(ctx.int_seed(7, t)) for t in range(n)]
    planted = [t for t in trials if t["planted"]]
    covered = sum(t["covered"] for t in planted)
    need = math.ceil(0.95 * len(planted))
    ok = len(planted) == n and covered >= need
    worst = max((t["distance"] for t in planted), default=math.inf)
    return SuiteResult("case2a", 7, ok, {"trials": n, "planted": len(planted), "covered": covered,
                                         "max_distance": worst,
                                         "basis_dims": sorted({t.get("basis_dim", 0) for t in planted})},
                       {"min_covered": need, "distance": 0.1}, samples=n * MOMENT_N)


def acceptance_instances() -> dict:
    """The two oracle end-to-end instances with their scale parameters."""
    ws = gen_instance("well_separated", 2, 4, R=2.0, seed=0)
    line = gen_instance("line_multiscale", 3, 4, R=2.0, params=InstanceParams(ladder=(0.3, 1e-15)), seed=0)
    base = ScaleParams(d=4, k=3, R=2.0)
    return {
        "well_separated": (ws, ScaleParams.for_problem(4, 2, R=2.0)),
        "line_multiscale": (line, replace(base, gamma_floor=level_inverse(1.0, base))),
    }


def _decoys(net: AbsNetwork, rng, count: int) -> list:
    out = []
    for _ in range(count):
        extra = AbsNetwork(np.zeros(net.d), [rng.uniform(0.4, 1.0) * rng.choice([-1, 1])], [unit_vector(rng, net.d)])
        out.append(net.combine(extra))
    return out


def _oracle_run(truth, scale, seed: int, noise: float, n_samples: int) -> tuple[Candidate, dict]:
    cfg = LearnerConfig(scale=scale, n_samples=n_samples, seed=seed)
    (cand,) = recursive_learn(SampleSource(truth, noise, seed), cfg, truth)
    k = truth.k
    info = {"l2_sq": l2_dist(cand.network, truth) ** 2, "stages": stage_count(cand),
            "stage_bound": GAME_MOVES_C * max(1.0, math.log2(k)), "complete": cand.complete,
            "validation_loss": cand.loss, "samples": stage_count(cand) * n_samples + cfg.n_validation}
    return cand, info


def _end_to_end(ctx: SuiteContext, criterion: int, noise: float, eps: float, names) -> SuiteResult:
    measured, traces = {}, []
    ok = True
    trials = ctx.pick(20, 100)
    for j, name in enumerate(names):
        truth, scale = acceptance_instances()[name]
        cand, info = _oracle_run(truth, scale, ctx.int_seed(criterion, j), noise, MOMENT_N)
        picks = 0
        for t in range(trials):
            rng = ctx.rng(criterion, 100 * (j + 1) + t)
            cands = [Candidate(d, 0.0, f"decoy{i}") for i, d in enumerate(_decoys(cand.network, rng, 4))]
            cands.insert(int(rng.integers(len(cands) + 1)), cand)
            val = sample_labeled(truth, 100_000, noise, int(rng.integers(1 << 31)))
            picks += validate_select(cands, val, eps, truth_R(truth)).candidate.label == cand.label
        info["selection_wins"] = picks
        info["selection_trials"] = trials
        ok &= info["l2_sq"] <= eps and info["stages"] <= info["stage_bound"] and picks == trials and info["complete"]
        measured[name] = info
        traces.append({"instance": name, **cand.trace[0]})
    if criterion == 8:
        counts = _stage_counts(ctx)
        measured["random_instance_stages"] = counts
        ok &= all(c["stages"] <= c["stage_bound"] for c in counts)
    samples = sum(measured[n]["samples"] + trials * 100_000 for n in names)
    res = SuiteResult("end_to_end" if criterion == 8 else "noise", criterion, bool(ok), measured,
                      {"l2_sq": eps, "selection_wins": trials, "stage_bound_C": GAME_MOVES_C}, samples=samples)
    return res, traces


def truth_R(net) -> float:
    return float(np.sum(np.abs(net.weights)))


def _stage_counts(ctx: SuiteContext) -> list:
    out = []
    for t in range(ctx.pick(3, 10)):
        k = 2 + t % 2
        seed = ctx.int_seed(8, 5000 + t)
        truth = gen_instance("well_separated", k, 4, R=2.0, params=InstanceParams(sep=0.5), seed=seed)
        _, info = _oracle_run(truth, ScaleParams.for_problem(4, k, R=2.0), seed, 0.0, 200_000)
        out.append({"k": k, "stages": info["stages"], "stage_bound": info["stage_bound"]})
    return out


def suite_end_to_end(ctx: SuiteContext):
    return _end_to_end(ctx, 8, 0.0, 0.05, ("well_separated", "line_multiscale"))


def suite_noise(ctx: SuiteContext):
    return _end_to_end(ctx, 9, 0.1, 0.1, ("well_separated",))


def suite_determinism(ctx: SuiteContext, cache: dict | None = None) -> SuiteResult:
    """Rerun every other suite at the ci profile and compare the emitted bytes."""
    cache = cache or {}
    ci = replace(ctx, profile="ci")
    same = {}
    for name, suite in SUITES.items():
        if name == "determinism":
            continue
        first = cache.get(name) or _result_bytes(_run_one(suite, ci))
        second = _result_bytes(_run_one(suite, ci))
        same[name] = first == second
    return SuiteResult("determinism", 10, all(same.values()), {"byte_identical": same}, {"byte_identical": True})


def _result_bytes(item) -> bytes:
    res, traces = item
    return (json.dumps(_plain({"r": asdict(res), "t": traces}), sort_keys=True) + "\n").encode()


def _run_one(suite: Suite, ctx: SuiteContext):
    try:
        out = suite.run(ctx)
    except Exception as exc:  # recorded, not raised
        return SuiteResult(suite.name, suite.criterion, False, {}, {}, notes=f"{type(exc).__name__}: {exc}"), []
    return out if isinstance(out, tuple) else (out, [])


SUITES = {s.name: s for s in (
    Suite("hermite", 1, "Hermite basis and relu coefficients", suite_hermite),
    Suite("moments", 2, "moment and residual-moment estimation", suite_moments),
    Suite("powersum", 3, "power-sum lower bound and tightness", suite_powersum),
    Suite("vandermonde", 4, "Vieta identity and Vandermonde bound", suite_vandermonde),
    Suite("clumping", 5, "clumping game", suite_clumping),
    Suite("scales", 6, "levels, gapped scales, anti-concentration", suite_scales),
    Suite("case2a", 7, "subspace plus net recovery", suite_case2a),
    Suite("end_to_end", 8, "oracle learner and selection", suite_end_to_end),
    Suite("noise", 9, "oracle learner under label noise", suite_noise),
    Suite("determinism", 10, "byte-identical reruns", suite_determinism),
)}


# -- orchestration --------------------------------------------------------------------------

def learn_trace(cfg: ExperimentConfig) -> dict:
    """Run the configured learner on the configured instance and summarise it."""
    truth = cfg.instance.build()
    lc = cfg.learner
    source = SampleSource(truth, cfg.instance.noise_variance, cfg.seed)
    cands = recursive_learn(source, lc, truth if lc.branch_mode == "oracle" else None)
    val = sample_labeled(truth, lc.n_validation, cfg.instance.noise_variance,
                         int(np.random.SeedSequence([cfg.seed, 99]).generate_state(1)[0]))
    sel = validate_select(cands, val, lc.eps, lc.scale.R)
    return {
        "instance": asdict(cfg.instance),
        "branch_mode": lc.branch_mode,
        "n_candidates": len(cands),
        "selected": sel.candidate.label,
        "selected_index": sel.index,
        "validation_loss": sel.loss,
        "confidence_radius": sel.radius,
        "l2_sq_to_truth": l2_dist(sel.candidate.network, truth) ** 2,
        "complete": sel.candidate.complete,
        "network": {"w": sel.candidate.network.w, "weights": sel.candidate.network.weights,
                    "directions": sel.candidate.network.directions},
        "candidates": [{"label": c.label, "loss": c.loss} for c in cands],
        "trace": list(sel.candidate.trace),
    }


def run_experiment(cfg: ExperimentConfig, learn: bool = False, progress: Callable[[str, float], None] | None = None
                   ) -> Report:
    """Run the selected suites (and optionally the learner) into a report.

    ``progress`` receives ``(suite name, seconds)`` after each suite; timings
    never enter the report.
    """
    ctx = SuiteContext(cfg.profile, cfg.seed)
    results, traces, cache = [], [], {}
    ordered = sorted(cfg.suites, key=lambda s: SUITES[s].criterion)
    for name in ordered:
        t0 = time.perf_counter()
        if name == "determinism":
            try:
                res, tr = suite_determinism(ctx, cache if ctx.profile == "ci" else None), []
            except Exception as exc:
                res, tr = SuiteResult("determinism", 10, False, {}, {}, notes=f"{type(exc).__name__}: {exc}"), []
        else:
            res, tr = _run_one(SUITES[name], ctx)
            cache[name] = _result_bytes((res, tr))
        results.append(res)
        traces.extend({"suite": name, **t} for t in tr)
        if progress is not None:
            progress(name, time.perf_counter() - t0)
    if learn:
        traces.append({"suite": "learn", **learn_trace(cfg)})
    return Report(SCHEMA_VERSION, cfg.echo(), frozen_constants(), results, traces)


__all__ = [
    "ConfigError", "ExperimentConfig", "InstanceSpec", "MOMENT_TOL", "PROFILES", "Report", "SCHEMA_VERSION",
    "SUITES", "SchemaVersionError", "Suite", "SuiteContext", "SuiteResult", "acceptance_instances",
    "case2a_trial", "default_config", "emit_report", "frozen_constants", "learn_trace", "load_config",
    "parse_config", "read_report", "report_dict", "run_experiment",
]
