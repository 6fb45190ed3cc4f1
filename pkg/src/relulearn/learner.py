"""Stage-wise recursive learner for absolute-value networks.

Each stage estimates moments of the residual ``y - f_learned(x)``, contracts
them along a fixed random direction ``g`` and either fits a two-ReLU
hypothesis (all remaining projections clustered) or learns whole clumps from a
net over the top singular subspaces.  The nondeterministic choices are resolved
by one of three branch modes:

``oracle``      consults the planted network and follows the clumping-game plan;
``beam``        keeps the best ``beam_width`` branches by held-out loss;
``exhaustive``  keeps every branch, refusing to run past ``max_paths``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .clumping import apply_move_map, block_points, certify, from_projection, plan
from .hermite import CapacityError
from .moments import estimate_moments, estimate_residual_moments, exact_moment_tensor
from .network import AbsNetwork, Network, ReluNetwork, SampleSource, Samples, evaluate, to_abs_form, unit_vector
from .scales import (ScaleParams, check_anticoncentration, close_far_sets, level_inverse,
                     project)
from .tensors import contract, entry_count, multi_indices

BRANCH_MODES = ("exhaustive", "oracle", "beam")
DEFAULT_NET_CAP = 1_000_000
# all-ones weights keep the beam's moment score order-agnostic
MOMENT_SCORE_ORDERS = (2, 4)


@dataclass(frozen=True)
class LearnerConfig:
    scale: ScaleParams
    upsilon: float = 0.05
    n_samples: int = 200_000
    n_validation: int = 100_000
    branch_mode: str = "oracle"
    beam_width: int = 4
    beam_seed: int = 0
    max_stages: int | None = None
    eps: float = 0.05
    omega: float | None = None
    max_order: int = 8
    sv_floor: float | None = None
    span_tol: float = 0.1
    net_cap: int = DEFAULT_NET_CAP
    max_paths: int = 20_000
    g_retries: int = 10
    mass_multiple: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if not self.upsilon > 0:
            raise ValueError("net granularity must be positive")
        if self.n_samples < 1 or self.n_validation < 1:
            raise ValueError("sample budgets must be at least 1")
        if self.branch_mode not in BRANCH_MODES:
            raise ValueError(f"branch_mode must be one of {BRANCH_MODES}")
        if self.beam_width < 1:
            raise ValueError("beam width must be at least 1")

    @property
    def k(self) -> int:
        return self.scale.k

    @property
    def stage_limit(self) -> int:
        return self.max_stages if self.max_stages is not None else self.k + 1

    @property
    def omega_value(self) -> float:
        return math.sqrt(self.scale.eps_prime) if self.omega is None else self.omega

    @property
    def floor_value(self) -> float | None:
        """Fixed singular-value floor, or ``None`` for the split-half noise floor."""
        return self.sv_floor

    def orders(self, k_res: int, d: int) -> tuple[int, ...]:
        top = min(2 * max(k_res, 1) + 2, self.max_order)
        return tuple(l for l in range(2, top + 1, 2) if entry_count(d, l) <= DEFAULT_NET_CAP)

    def theoretical_upsilon(self, xi_prime: float, C1: float, C2: float) -> float:
        """The granularity the analysis asks for, reported next to the configured one."""
        return math.sqrt(xi_prime / C1) + (C2 / C1) ** 0.25


@dataclass
class LearnerState:
    learned: AbsNetwork
    R: float
    mass_multiple: float = 4.0
    stage: int = 0
    log: list = field(default_factory=list)
    residual_error: float | None = None

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        if float(np.sum(np.abs(self.learned.weights))) > self.mass_multiple * self.R * (1 + 1e-9):
            raise ValueError("learned weight mass exceeds the configured budget")

    def add(self, net: AbsNetwork) -> None:
        self.learned = _plus(self.learned, net)
        self.check()


@dataclass(frozen=True)
class Candidate:
    network: AbsNetwork
    loss: float
    label: str = ""
    complete: bool = True
    trace: tuple = ()

    def __post_init__(self):
        if not self.loss >= 0:
            raise ValueError("candidate loss must be non-negative")


def _plus(a: AbsNetwork, b: AbsNetwork) -> AbsNetwork:
    return AbsNetwork(a.w + b.w, np.concatenate([a.weights, b.weights]),
                      np.vstack([a.directions, b.directions]), math.inf)


def _neurons(lams, dirs, d: int) -> AbsNetwork:
    lams = np.asarray(lams, dtype=float)
    dirs = np.asarray(dirs, dtype=float).reshape(len(lams), d)
    return AbsNetwork(np.zeros(d), lams, dirs, math.inf)


# -- moments of the residual -----------------------------------------------------------

# eigenvalues below this many split-half noise norms are treated as noise
NOISE_Z = 4.0


@dataclass(frozen=True)
class ResidualMoments:
    w: np.ndarray
    tensors: dict  # order -> SymTensor
    spread: dict = field(default_factory=dict)  # order -> half the split-half difference

    def matrices(self, g) -> list:
        return [contract(self.tensors[l], g) for l in sorted(self.tensors)]

    def floors(self, g, z: float = NOISE_Z) -> list:
        """Per-order noise floor ``z * ||contract(spread, g)||_op`` (zero without a split)."""
        out = []
        for l in sorted(self.tensors):
            D = self.spread.get(l)
            out.append(0.0 if D is None else z * float(np.linalg.norm(contract(D, g).matrix, 2)))
        return out

    def minus(self, net: AbsNetwork) -> "ResidualMoments":
        """Subtract the exact moments of ``net`` (used when branching on one batch)."""
        tensors = {l: T - exact_moment_tensor(net, l) for l, T in self.tensors.items()}
        return ResidualMoments(self.w - net.w, tensors, self.spread)


def residual_moments(samples: Samples, learned: AbsNetwork | None, orders: Sequence[int]) -> ResidualMoments:
    """Residual moment estimates; the two halves of the batch also give a noise scale."""
    if learned is not None and learned.k == 0 and not np.any(learned.w):
        learned = None

    def est(s, l):
        return estimate_moments(s, l) if learned is None else estimate_residual_moments(s, learned, l)

    w = est(samples, 1)
    if len(samples) < 2:
        return ResidualMoments(w, {l: est(samples, l) for l in orders})
    a, b = samples.split(len(samples) // 2)
    fa, fb = len(a) / len(samples), len(b) / len(samples)
    tensors, spread = {}, {}
    for l in orders:
        Ta, Tb = est(a, l), est(b, l)
        tensors[l] = Ta * fa + Tb * fb
        spread[l] = (Ta - Tb) * 0.5
    return ResidualMoments(w, tensors, spread)


# -- Case 1 ------------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoNeuronFit:
    mu_plus: float
    mu_minus: float
    u: np.ndarray
    weak: bool
    zero: bool

    @property
    def network(self) -> AbsNetwork:
        d = len(self.u)
        if self.zero:
            return AbsNetwork.zero(d)
        relu = ReluNetwork(np.array([self.mu_plus, self.mu_minus]), np.vstack([self.u, -self.u]))
        return to_abs_form(relu, R=math.inf)


def two_neuron_from_moments(mom: ResidualMoments, g, omega: float, k: int = 1,
                            anti_c: float = 0.05) -> TwoNeuronFit:
    """``a = 2w`` is ``(mu+ - mu-) u`` and ``B = 2 T_2`` is ``(mu+ + mu-) u u^T``.

    ``u`` is the top left singular vector of ``[a | B]``; ``weak`` flags a
    contraction direction nearly orthogonal to it.
    """
    g = np.asarray(g, dtype=float)
    d = len(g)
    a = 2.0 * np.asarray(mom.w, dtype=float)
    B = 2.0 * contract(mom.tensors[2], g).matrix
    stack = np.column_stack([a, B])
    if not np.any(stack):
        return TwoNeuronFit(0.0, 0.0, g.copy(), False, True)
    u = np.linalg.svd(stack, full_matrices=False)[0][:, 0]
    u = _orient(u, g)
    weak = abs(float(u @ g)) < anti_c / (max(k, 1) * math.sqrt(d))
    s = float(u @ B @ u)
    t = float(a @ u)
    mu_p, mu_m = (s + t) / 2, (s - t) / 2
    zero = max(abs(mu_p), abs(mu_m)) <= omega
    return TwoNeuronFit(mu_p, mu_m, u, weak, zero)


def _orient(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    c = float(u @ g)
    if c < 0 or c == 0 and _fold(u)[0] != u[0]:
        return -u
    return u


def two_neuron_fit(samples: Samples, learned: AbsNetwork | None, cfg: LearnerConfig, g) -> TwoNeuronFit:
    mom = residual_moments(samples, learned, (2,))
    return two_neuron_from_moments(mom, g, cfg.omega_value, cfg.k, cfg.scale.anti_c)


# -- Case 2a: subspace and nets -----------------------------------------------------------

def pca_subspace(matrices, k: int, sv_floor=1e-10, span_tol: float = 0.1) -> np.ndarray:
    """Orthonormal basis (columns) of the joint top-``k`` singular subspaces.

    ``sv_floor`` is one threshold for all matrices or one per matrix.
    """
    floors = np.broadcast_to(np.asarray(sv_floor, dtype=float), (len(matrices),))
    vecs = []
    for M, floor in zip(matrices, floors):
        A = M.matrix if hasattr(M, "matrix") else np.asarray(M, dtype=float)
        vals, V = np.linalg.eigh((A + A.T) / 2)
        top = np.argsort(-np.abs(vals), kind="stable")[:k]
        vecs.extend(V[:, j] for j in top if abs(vals[j]) > max(floor, 1e-12))
    if not vecs:
        d = (matrices[0].matrix if hasattr(matrices[0], "matrix") else np.asarray(matrices[0])).shape[0] if matrices else 0
        return np.zeros((d, 0))
    U, s, _ = np.linalg.svd(np.column_stack(vecs), full_matrices=False)
    return U[:, s >= span_tol]


def moment_subspace(mom: ResidualMoments, g, k: int, cfg: LearnerConfig) -> np.ndarray:
    floor = cfg.floor_value if cfg.floor_value is not None else mom.floors(g)
    return pca_subspace(mom.matrices(g), k, floor, cfg.span_tol)


def weight_grid(R: float, upsilon: float) -> np.ndarray:
    j = math.floor(R / upsilon + 1e-9)
    pts = {round(i * upsilon, 12) for i in range(-j, j + 1)} | {-R, R}
    return np.array(sorted(pts))


def round_to_grid(x: float, R: float, upsilon: float) -> float:
    """Floor to the grid ``upsilon * Z`` and clip to ``[-R, R]``."""
    return float(min(max(math.floor(x / upsilon + 1e-9) * upsilon, -R), R))


def _fold(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(c) > 0)
    return -c if len(nz) and c[nz[0]] < 0 else c


def folded_distance(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


class CandidateNet:
    """Sign-folded net of unit vectors over ``span(basis)`` plus a weight grid.

    Lattice points of spacing ``h = upsilon / sqrt(m)`` whose norm lies in
    ``[1 - upsilon/2, 1 + upsilon/2]`` are normalized; rounding any unit vector
    of the span to the lattice lands in that shell, which makes the net an
    ``upsilon``-cover.
    """

    def __init__(self, basis, upsilon: float, k_max: int, R: float, cap: int = DEFAULT_NET_CAP):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] == 0:
            raise ValueError("net needs a nonempty basis")
        self.basis = basis
        self.m = basis.shape[1]
        self.upsilon = float(upsilon)
        self.k_max = int(k_max)
        self.R = float(R)
        self.h = self.upsilon / math.sqrt(self.m)
        self.cap = cap
        self._coords = None

    def check_capacity(self) -> None:
        """Raise before materializing a net larger than the cap (rounding alone never needs it)."""
        est = self.estimated_size(self.m, self.upsilon)
        if est > self.cap:
            raise CapacityError(f"net over a {self.m}-dim span at upsilon={self.upsilon} has about {est:.3g} "
                                f"elements; upsilon >= {self.required_upsilon(self.m, self.cap):.3g} "
                                f"fits the cap {self.cap}")

    @staticmethod
    def estimated_size(m: int, upsilon: float) -> float:
        h = upsilon / math.sqrt(m)
        ball = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
        shell = ball * ((1 + upsilon / 2) ** m - max(1 - upsilon / 2, 0) ** m)
        return max(shell / h**m / 2, 1.0)

    @classmethod
    def required_upsilon(cls, m: int, cap: int) -> float:
        lo, hi = 1e-6, 4.0
        for _ in range(80):
            mid = math.sqrt(lo * hi)
            lo, hi = (mid, hi) if cls.estimated_size(m, mid) > cap else (lo, mid)
        return hi

    def _lattice(self) -> np.ndarray:
        if self._coords is None:
            self.check_capacity()
            r = int(math.ceil((1 + self.upsilon / 2) / self.h))
            axis = np.arange(-r, r + 1)
            lo, hi = (1 - self.upsilon / 2) / self.h, (1 + self.upsilon / 2) / self.h
            out = []
            for head in itertools.product(axis, repeat=max(self.m - 2, 0)):
                head = np.asarray(head, dtype=float)
                if head @ head > hi * hi:
                    continue
                tail = np.array(list(itertools.product(axis, repeat=min(self.m, 2))), dtype=float)
                pts = np.hstack([np.broadcast_to(head, (len(tail), len(head))), tail])
                n = np.linalg.norm(pts, axis=1)
                pts = pts[(n >= lo) & (n <= hi)]
                first = np.array([p[np.flatnonzero(p)[0]] for p in pts]) if len(pts) else np.zeros(0)
                out.append(pts[first > 0])
            coords = np.vstack(out) if out else np.zeros((0, self.m))
            self._coords = coords / np.linalg.norm(coords, axis=1, keepdims=True)
        return self._coords

    def directions(self) -> np.ndarray:
        """All net elements as unit vectors in the ambient space, one per row."""
        return self._lattice() @ self.basis.T

    def __len__(self) -> int:
        return len(self._lattice())

    def weights(self) -> np.ndarray:
        return weight_grid(self.R, self.upsilon)

    def covering_element(self, x) -> np.ndarray:
        """The net element obtained by rounding ``x`` (projected onto the span) to the lattice."""
        c = self.basis.T @ np.asarray(x, dtype=float)
        n = np.linalg.norm(c)
        if n == 0:
            raise ValueError("vector is orthogonal to the net's span")
        lat = _fold(np.round(c / n / self.h))
        return self.basis @ (lat / np.linalg.norm(lat))

    def __iter__(self) -> Iterator[tuple[tuple, tuple]]:
        dirs = self.directions()
        grid = self.weights()
        for m in range(1, self.k_max + 1):
            for idx in itertools.combinations_with_replacement(range(len(dirs)), m):
                for lams in itertools.product(grid, repeat=m):
                    yield tuple(dirs[i] for i in idx), lams


def candidate_net(basis, upsilon: float, k_max: int, R: float, cap: int = DEFAULT_NET_CAP) -> CandidateNet:
    net = CandidateNet(basis, upsilon, k_max, R, cap)
    net.check_capacity()
    return net


# -- selection ----------------------------------------------------------------------------

def empirical_loss(net: Network, samples: Samples) -> float:
    r = samples.y - evaluate(net, samples.X)
    return float(np.mean(r * r))


def confidence_radius(n: int, R: float, k: int, mean: float = 0.0, delta: float = 0.05) -> float:
    """Deviation ``t`` with ``n ~ (mean + 4 R^2 k)^2 log(1/delta) / t^2`` solved for ``t``."""
    return (abs(mean) + 4 * R * R * k) * math.sqrt(math.log(1 / delta) / n)


@dataclass(frozen=True)
class Selection:
    candidate: Candidate
    index: int
    loss: float
    radius: float
    losses: tuple


def validate_select(candidates: Sequence[Candidate], samples: Samples, eps: float = 0.05,
                    R: float = 1.0, delta: float = 0.05) -> Selection:
    if not candidates:
        raise ValueError("no candidates to select from")
    losses = tuple(empirical_loss(c.network, samples) for c in candidates)
    best = int(np.argmin(losses))
    k = max(1, max(c.network.k for c in candidates))
    chosen = replace(candidates[best], loss=losses[best])
    return Selection(chosen, best, losses[best], confidence_radius(len(samples), R, k, delta=delta), losses)


# -- direction of the contraction ---------------------------------------------------------

def draw_direction(rng: np.random.Generator, d: int, truth: AbsNetwork | None, p: ScaleParams,
                   retries: int) -> tuple[np.ndarray, int, bool]:
    """Random unit ``g``; with a known network, redraw until anti-concentration holds."""
    g = unit_vector(rng, d)
    if truth is None or truth.k < 2:
        return g, 1, truth is not None
    for attempt in range(1, retries + 1):
        if check_anticoncentration(truth.directions, g, p.anti_c, p.anti_c_prime).holds:
            return g, attempt, True
        g = unit_vector(rng, d)
    return g, retries + 1, False


# -- oracle mode ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ClumpChoice:
    index: int
    gamma: float
    close: frozenset
    weight: float
    detectable: bool
    verified: bool
    kind: str


def _interval_clumps(kind: str, i: int, j: int, w, points, proj, p: ScaleParams) -> list[ClumpChoice]:
    """Clumps (with scales) behind one good interval ``[i, j]`` of a game move."""
    ranks = list(range(i - 1, j - 1))
    lam = {int(o): float(x) for o, x in zip(proj.order, proj.weights)}
    if kind in ("vacuous", "low"):
        out = []
        for r in ranks:
            idx = points[r]
            close, far, ok = close_far_sets(proj, idx, p.gamma_floor, p)
            out.append(ClumpChoice(idx, p.gamma_floor, close, sum(lam[c] for c in close),
                                   abs(sum(lam[c] for c in close)) > p.Lambda, ok and close == {idx}, kind))
        return out
    left, right = w[i - 1], w[j - 1]
    gamma = level_inverse(max(left, right), p)
    members = frozenset(points[r] for r in ranks)
    idx = points[ranks[0]] if left >= right else points[ranks[-1]]
    close, far, ok = close_far_sets(proj, idx, gamma, p)
    verified = ok and close == members
    if not verified:
        # fall back to any member and ladder rung that isolates exactly this clump
        for cand in sorted(members):
            for g in _ladder_around(gamma, p):
                c2, _, ok2 = close_far_sets(proj, cand, g, p)
                if ok2 and c2 == members:
                    idx, gamma, verified = cand, g, True
                    break
            if verified:
                break
    weight = sum(lam[c] for c in members)
    return [ClumpChoice(idx, gamma, members, weight, abs(weight) > p.Lambda, verified, kind)]


def _ladder_around(gamma: float, p: ScaleParams):
    for f in (0.5, 0.25, 2.0, 0.1, 4.0, 1e-2, 1e-3):
        if p.gamma_floor <= gamma * f < 1:
            yield gamma * f


def _oracle_direction(basis: np.ndarray, members, truth: AbsNetwork, cfg: LearnerConfig, k_res: int):
    if basis.shape[1] == 0:
        return None, math.inf
    net = CandidateNet(basis, cfg.upsilon, k_res, cfg.scale.R, cfg.net_cap)
    best, dist = None, math.inf
    for j in sorted(members):
        e = net.covering_element(truth.directions[j])
        dj = folded_distance(e, truth.directions[j])
        if dj < dist:
            best, dist = e, dj
    return best, dist


def _oracle_learn(source: SampleSource, cfg: LearnerConfig, truth: Network) -> list[Candidate]:
    truth = to_abs_form(truth, R=math.inf) if isinstance(truth, ReluNetwork) else truth
    p = cfg.scale
    d = truth.d
    g, tries, anti_ok = draw_direction(np.random.default_rng(cfg.seed), d, truth, p, cfg.g_retries)
    proj0 = project(truth, g)
    game = from_projection(proj0, p)
    moves = [m for _, m in plan(game.state, game.tau)[0]]
    state = LearnerState(AbsNetwork.zero(d), p.R, cfg.mass_multiple)
    points = [int(i) for i in proj0.order]
    planned = game.state
    header = {"g": g.tolist(), "g_tries": tries, "anticoncentration": anti_ok, "tau": game.tau,
              "initial_game": list(game.state.w), "planned_moves": [m.as_list() for m in moves]}
    complete = True
    for move in moves:
        if state.stage + 1 > cfg.stage_limit:
            complete = False
            break
        active = project(truth, g, active=points)
        if len(move.intervals) == 1 and move.intervals[0] == (1, len(points) + 1) and active.spread <= p.eps_prime:
            break  # a single full-range move is the two-ReLU case
        state.stage += 1
        actual = from_projection(active, p).state
        cert = certify(actual, move, game.tau, 0.99)
        kinds = certify(planned, move, game.tau, 1.0)
        clumps = []
        for (i, j), kind in zip(move.intervals, kinds):
            clumps += _interval_clumps(kind or "low", i, j, actual.w, points, active, p)
        samples = source.draw(cfg.n_samples)
        mom = residual_moments(samples, state.learned, cfg.orders(len(points), d))
        basis = moment_subspace(mom, g, len(points), cfg)
        learned, rec = [], []
        for c in clumps:
            entry = {"index": c.index, "gamma": c.gamma, "close": sorted(c.close), "weight": c.weight,
                     "detectable": c.detectable, "verified": c.verified, "kind": c.kind}
            if c.detectable:
                e, dist = _oracle_direction(basis, c.close, truth, cfg, len(points))
                entry["direction_error"] = dist
                if e is not None:
                    lam = round_to_grid(c.weight, p.R, cfg.upsilon)
                    learned.append((lam, e))
                    entry["learned_weight"] = lam
            rec.append(entry)
        if learned:
            state.add(_neurons([l for l, _ in learned], [e for _, e in learned], d))
        swallowed = {r for blk in block_points(move) for r in blk}
        points = [pt for r, pt in enumerate(points) if r not in swallowed]
        planned = apply_move_map(planned, move)[0]
        state.log.append({"stage": state.stage, "case": "2", "move": move.as_list(),
                          "certificate_0.99": list(cert), "legal": all(x is not None for x in cert),
                          "basis_dim": int(basis.shape[1]), "clumps": rec, "remaining": list(points)})
    state.stage += 1
    samples = source.draw(cfg.n_samples)
    fit = two_neuron_fit(samples, state.learned, cfg, g)
    final = _plus(state.learned, fit.network)
    state.log.append({"stage": state.stage, "case": "1", "mu_plus": fit.mu_plus, "mu_minus": fit.mu_minus,
                      "u": fit.u.tolist(), "weak": fit.weak, "zero": fit.zero, "remaining": list(points)})
    val = source.draw(cfg.n_validation)
    loss = empirical_loss(final, val)
    state.residual_error = loss
    trace = ({"mode": "oracle", **header, "stages": state.log, "stage_count": state.stage},)
    return [Candidate(final, loss, "oracle", complete, trace)]


# -- beam / exhaustive --------------------------------------------------------------------------

def _moment_gains(mom: ResidualMoments, dirs: np.ndarray) -> np.ndarray:
    """Least-squares weight of ``e^{(x) l}`` against the residual tensors, per direction."""
    num = np.zeros(len(dirs))
    orders = [l for l in MOMENT_SCORE_ORDERS if l in mom.tensors]
    for l in orders:
        T = mom.tensors[l]
        mi = multi_indices(T.dim, l)
        mono = np.prod(dirs[:, None, :] ** mi.exponents[None, :, :], axis=2)
        num += mono @ (mi.multiplicity * T.values)
    return num / max(len(orders), 1)


@dataclass
class _Branch:
    learned: AbsNetwork
    choices: tuple = ()


def _search(source: SampleSource, cfg: LearnerConfig, d: int, width: int | None) -> list[Candidate]:
    p = cfg.scale
    g, _, _ = draw_direction(np.random.default_rng(cfg.seed), d, None, p, cfg.g_retries)
    shard = source.draw(cfg.n_validation)
    branches = [_Branch(AbsNetwork.zero(d))]
    out: list[Candidate] = []
    grid = weight_grid(p.R, cfg.upsilon)
    for stage in range(1, cfg.stage_limit + 1):
        samples = source.draw(cfg.n_samples)
        base = residual_moments(samples, None, cfg.orders(cfg.k, d))
        expansions = []
        for b in branches:
            mom = base.minus(b.learned)
            fit = two_neuron_from_moments(mom, g, cfg.omega_value, cfg.k, p.anti_c)
            final = _plus(b.learned, fit.network)
            out.append(Candidate(final, empirical_loss(final, shard), f"stage{stage}:" + "/".join(b.choices),
                                 True, ({"mode": cfg.branch_mode, "stage": stage, "choices": list(b.choices)},)))
            k_res = cfg.k - b.learned.k
            if k_res <= 0 or stage == cfg.stage_limit:
                continue
            basis = moment_subspace(mom, g, k_res, cfg)
            if basis.shape[1] == 0:
                continue
            net = CandidateNet(basis, cfg.upsilon, k_res, p.R, cfg.net_cap)
            dirs = net.directions()
            if width is None:
                picks = [(e, lam) for e in dirs for lam in grid if lam != 0]
            else:
                gains = _moment_gains(mom, dirs)
                order = np.argsort(-np.abs(gains), kind="stable")[:width]
                picks = [(dirs[t], round_to_grid(gains[t], p.R, cfg.upsilon)) for t in order]
                picks = [(e, lam) for e, lam in picks if lam != 0]
            for e, lam in picks:
                if np.sum(np.abs(b.learned.weights)) + abs(lam) > cfg.mass_multiple * p.R:
                    continue
                nxt = _plus(b.learned, _neurons([lam], [e], d))
                expansions.append(_Branch(nxt, b.choices + (f"{lam:+.3g}@{np.round(e, 3).tolist()}",)))
        if not expansions:
            break
        if width is None:
            if len(out) + len(expansions) > cfg.max_paths:
                raise CapacityError(f"exhaustive search would exceed {cfg.max_paths} paths at stage {stage}")
            branches = expansions
        else:
            scored = []
            for t, b in enumerate(expansions):
                mom = base.minus(b.learned)
                fit = two_neuron_from_moments(mom, g, cfg.omega_value, cfg.k, p.anti_c)
                scored.append((empirical_loss(_plus(b.learned, fit.network), shard), t))
            scored.sort()
            branches = [expansions[t] for _, t in scored[:width]]
    return out


def recursive_learn(source: SampleSource, cfg: LearnerConfig, truth: Network | None = None) -> list[Candidate]:
    """Run the staged learner and return every terminal candidate in generation order."""
    d = source.net.d if truth is None else truth.d
    if cfg.branch_mode == "oracle":
        if truth is None:
            raise ValueError("oracle mode needs the planted network")
        return _oracle_learn(source, cfg, truth)
    if cfg.branch_mode == "exhaustive":
        if cfg.k > 2:
            raise CapacityError("exhaustive mode is limited to k <= 2")
        return _search(source, cfg, d, None)
    return _search(source, cfg, d, cfg.beam_width)


def stage_count(candidate: Candidate) -> int:
    return int(candidate.trace[0].get("stage_count", 0)) if candidate.trace else 0


__all__ = [
    "BRANCH_MODES", "Candidate", "CandidateNet", "ClumpChoice", "LearnerConfig", "LearnerState",
    "ResidualMoments", "Selection", "TwoNeuronFit", "candidate_net", "confidence_radius", "draw_direction",
    "empirical_loss", "folded_distance", "moment_subspace", "pca_subspace", "recursive_learn", "residual_moments",
    "round_to_grid", "stage_count", "two_neuron_fit", "two_neuron_from_moments", "validate_select",
    "weight_grid",
]
