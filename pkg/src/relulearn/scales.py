"""Projections along a random direction and the multi-scale gap calculus.

Scales are compared through ``T(gamma) = (Lam^p / R^2) (gamma / d)^(c_T k)``.
A neuron ``i`` has a gapped scale ``gamma`` when every other projection is
either within ``T(gamma)`` of ``v_i`` or at least ``gamma`` away.  The level
function ``L`` re-parametrizes scales so that ``L(T(gamma)) = L(gamma) + 0.9``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import AbsNetwork, ReluNetwork, to_abs_form

LEVEL_STEP = 0.9
# Entries for coincident projections; any value above every game threshold works.
MAX_LEVEL = 1e6
# Frozen by scripts/calibrate_scales.py: L(gamma_s) - L(sum) <= K / (k ln d).
OBSERVATION_MARGIN_K = 1.0
ANTI_C = 0.05
ANTI_C_PRIME = 3.0


@dataclass(frozen=True)
class ScaleParams:
    d: int
    k: int
    R: float = 1.0
    eps_prime: float = 0.01
    Lambda: float = 0.05
    gamma_floor: float = 1e-300
    c_T: float = 1.0
    lambda_power: float = 2.0
    xi: float = 0.01
    xi_prime: float = 0.01
    anti_c: float = ANTI_C
    anti_c_prime: float = ANTI_C_PRIME

    def __post_init__(self):
        if self.d < 1 or self.k < 1:
            raise ValueError("need d >= 1 and k >= 1")
        for name in ("R", "eps_prime", "Lambda", "gamma_floor", "c_T", "lambda_power", "xi", "xi_prime"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.gamma_floor < self.eps_prime < 1:
            raise ValueError("need gamma_floor < eps_prime < 1")
        if self.Lambda > 1:
            raise ValueError("Lambda must be at most 1")

    @classmethod
    def for_problem(cls, d: int, k: int, R: float = 1.0, eps: float = 0.05, C0: float = 1.0,
                    **overrides) -> "ScaleParams":
        """Desk defaults: ``eps' = eps / (C0 d^2 k^3 R)`` unless overridden."""
        overrides.setdefault("eps_prime", min(eps / (C0 * d * d * k**3 * R), 0.5))
        return cls(d=d, k=k, R=R, **overrides)

    @property
    def exponent(self) -> float:
        return self.c_T * self.k

    @property
    def prefactor(self) -> float:
        return self.Lambda**self.lambda_power / self.R**2


def T_of(gamma: float, p: ScaleParams) -> float:
    if gamma <= 0:
        raise ValueError("scale must be positive")
    return p.prefactor * (gamma / p.d) ** p.exponent


# -- level function ------------------------------------------------------------

def _level_denominator(p: ScaleParams) -> float:
    n = p.exponent
    B = n * math.log(p.d) + math.log(1 / p.prefactor) + (n - 1) * math.log(1 / p.eps_prime)
    if B <= 0:
        raise ValueError("scale constants give a non-positive level normalizer")
    return B


def level(gamma: float, p: ScaleParams) -> float:
    """Level of a scale: zero at ``eps'``, growing by 0.9 per application of ``T``."""
    if gamma <= 0:
        raise ValueError("level is undefined at zero separation")
    n, B = p.exponent, _level_denominator(p)
    x = math.log(p.eps_prime / gamma)
    if abs(n - 1) < 1e-12:
        return LEVEL_STEP * x / B
    arg = 1 + (n - 1) * x / B
    if arg <= 0:
        raise ValueError(f"scale {gamma!r} lies outside the level function's domain")
    return LEVEL_STEP / math.log(n) * math.log(arg)


def level_inverse(L: float, p: ScaleParams) -> float:
    """The scale whose level is ``L``."""
    n, B = p.exponent, _level_denominator(p)
    if abs(n - 1) < 1e-12:
        x = L * B / LEVEL_STEP
    else:
        x = B * (math.exp(L * math.log(n) / LEVEL_STEP) - 1) / (n - 1)
    return p.eps_prime * math.exp(-x)


def gap_level(gap: float, p: ScaleParams) -> float:
    """Game entry for a separation: ``MAX_LEVEL`` when zero, never below 0."""
    if gap <= 0:
        return MAX_LEVEL
    if gap >= p.eps_prime:
        return 0.0
    return min(max(level(gap, p), 0.0), MAX_LEVEL)


# -- projections ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Projection:
    """Folded projections ``|<u_i, g>|`` in increasing order.

    ``order[r]`` is the original neuron index at sorted rank ``r``; ``weights``
    and ``signs`` are aligned with the sorted order.
    """

    g: np.ndarray
    v: np.ndarray
    order: np.ndarray
    weights: np.ndarray
    signs: np.ndarray

    @property
    def k(self) -> int:
        return len(self.v)

    @property
    def spread(self) -> float:
        return float(self.v[-1] - self.v[0]) if self.k else 0.0

    def rank_of(self, index: int) -> int:
        return int(np.flatnonzero(self.order == index)[0])


def _unit(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if abs(np.linalg.norm(g) - 1) > 1e-9:
        raise ValueError("projection direction must be a unit vector")
    return g


def project(net: AbsNetwork | ReluNetwork, g, active=None) -> Projection:
    net = to_abs_form(net) if isinstance(net, ReluNetwork) else net
    g = _unit(g)
    idx = np.arange(net.k) if active is None else np.asarray(sorted(active), dtype=np.intp)
    raw = net.directions[idx] @ g if len(idx) else np.zeros(0)
    folded = np.abs(raw)
    perm = np.argsort(folded, kind="stable")
    return Projection(g.copy(), folded[perm], idx[perm], net.weights[idx][perm],
                      np.where(raw[perm] < 0, -1.0, 1.0))


@dataclass(frozen=True)
class AntiConcentration:
    holds_pairs: bool
    holds_floor: bool

    @property
    def holds(self) -> bool:
        return self.holds_pairs and self.holds_floor


def check_anticoncentration(us, g, c: float = ANTI_C, c_prime: float = ANTI_C_PRIME) -> AntiConcentration:
    us = np.atleast_2d(np.asarray(us, dtype=float))
    g = _unit(g)
    k, d = us.shape
    lo = c / (math.sqrt(d) * k * k)
    hi = c_prime * math.sqrt(math.log(k)) / math.sqrt(d) if k > 1 else math.inf
    iu, ju = np.triu_indices(k, 1)
    sums = np.vstack([us[iu] + us[ju], us[iu] - us[ju]])
    norms = np.linalg.norm(sums, axis=1)
    keep = norms >= 1e-12  # coincident directions carry no pair condition
    ratio = np.abs(sums[keep] @ g) / norms[keep]
    pairs = bool(np.all((ratio >= lo) & (ratio <= hi)))
    floor = bool(np.all(np.abs(us @ g) >= c / (k * math.sqrt(d))))
    return AntiConcentration(pairs, floor)


# -- gapped scales -------------------------------------------------------------------

@dataclass(frozen=True)
class GapRecord:
    index: int
    gamma: float
    close: frozenset
    far: frozenset
    detectable: bool
    clump_weight: float


def close_far_sets(proj: Projection, i: int, gamma: float, p: ScaleParams) -> tuple[frozenset, frozenset, bool]:
    """Close and far sets (original indices) of neuron ``i`` at scale ``gamma``."""
    r = proj.rank_of(i)
    dist = np.abs(proj.v - proj.v[r])
    close = frozenset(proj.order[dist <= T_of(gamma, p)].tolist())
    far = frozenset(proj.order[dist >= gamma].tolist())
    gapped = len(close) + len(far) == proj.k and gamma >= p.gamma_floor
    return close, far, gapped


def _record(proj: Projection, i: int, gamma: float, close, far, p: ScaleParams) -> GapRecord:
    ranks = [proj.rank_of(j) for j in close]
    weight = float(np.sum(proj.weights[ranks]))
    return GapRecord(i, gamma, close, far, abs(weight) > p.Lambda, weight)


def gap_record(proj: Projection, i: int, gamma: float, p: ScaleParams) -> GapRecord | None:
    close, far, gapped = close_far_sets(proj, i, gamma, p)
    return _record(proj, i, gamma, close, far, p) if gapped else None


def descent_ladder(p: ScaleParams, k_res: int):
    """``eps'/k_res``, then ``gamma <- T(gamma / k_res) / k_res`` while above the floor."""
    gamma = p.eps_prime / k_res
    while gamma >= p.gamma_floor and gamma > 0:
        yield gamma
        gamma = T_of(gamma / k_res, p) / k_res


@dataclass
class ScaleTrace:
    rungs: list = field(default_factory=list)  # (gamma, T(gamma), gapped indices)
    result: GapRecord | None = None

    def as_dict(self) -> dict:
        return {
            "rungs": [{"gamma": g, "T": t, "gapped": list(ix)} for g, t, ix in self.rungs],
            "result": None if self.result is None else {
                "index": self.result.index,
                "gamma": self.result.gamma,
                "close": sorted(self.result.close),
                "far": sorted(self.result.far),
                "detectable": self.result.detectable,
                "clump_weight": self.result.clump_weight,
            },
        }


def find_gapped_scale(proj: Projection, p: ScaleParams, trace: ScaleTrace | None = None) -> GapRecord | None:
    """First rung of the descent ladder at which some neuron is gapped.

    Returns ``None`` when the spread is at most ``eps'``.  Among gapped neurons
    at that rung the smallest original index wins.
    """
    if proj.k == 0:
        raise ValueError("no active neurons")
    if proj.spread <= p.eps_prime:
        return None
    for gamma in descent_ladder(p, proj.k):
        hits = [i for i in sorted(proj.order.tolist()) if close_far_sets(proj, i, gamma, p)[2]]
        if trace is not None:
            trace.rungs.append((gamma, T_of(gamma, p), hits))
        if hits:
            rec = gap_record(proj, hits[0], gamma, p)
            if trace is not None:
                trace.result = rec
            return rec
    return None


def all_gapped(proj: Projection, gamma: float, p: ScaleParams) -> list[GapRecord]:
    """Every neuron gapped at ``gamma``, one record per distinct close set."""
    out, seen = [], set()
    for i in sorted(proj.order.tolist()):
        rec = gap_record(proj, i, gamma, p)
        if rec is not None and rec.close not in seen:
            seen.add(rec.close)
            out.append(rec)
    return out


def detectable(gap: GapRecord, p: ScaleParams) -> bool:
    return abs(gap.clump_weight) > p.Lambda


def signed_difference_bounds(a: float, b: float) -> tuple[float, float, float]:
    """``(min_s |a - s b|^2, |a^2 - b^2|, 2 min_s |a - s b|)``: distance before and after squaring."""
    m = min(abs(a - b), abs(a + b))
    return m * m, abs(a * a - b * b), 2 * m
