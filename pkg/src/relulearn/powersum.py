"""Power-sum separation, its tightness family, Vieta's identity and Vandermonde solves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import linalg, optimize

# Frozen by scripts/calibrate_powersum.py; see README "Calibrated constants".
POWERSUM_C = 2.0


@dataclass(frozen=True)
class PowerSumInstance:
    """Coordinates ``0..k_prime-1`` form the close group around ``v[0]``."""

    v: np.ndarray
    q: np.ndarray
    k_prime: int
    alpha: float
    beta: float
    gamma: float
    tau: float
    R: float

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(-1))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(-1))
        object.__setattr__(self, "k_prime", int(self.k_prime))
        for name in ("alpha", "beta", "gamma", "tau", "R"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def k(self) -> int:
        return len(self.v)

    def violations(self, tol: float = 1e-12) -> list[str]:
        v, q, kp = self.v, self.q, self.k_prime
        out = []
        if len(q) != len(v):
            out.append("v and q differ in length")
            return out
        if not 1 <= kp <= len(v):
            out.append("k_prime out of range")
            return out
        for name in ("alpha", "beta", "gamma"):
            if not 0 < getattr(self, name) < 1:
                out.append(f"{name} must lie in (0, 1)")
        if np.any(np.abs(v) > 1 + tol):
            out.append("v outside [-1, 1]")
        if abs(v[0]) < self.alpha - tol:
            out.append("|v_1| < alpha")
        if np.any(np.abs(v[:kp] - v[0]) > self.beta + tol):
            out.append("close group wider than beta")
        if kp < len(v) and np.min(np.abs(v[:kp, None] - v[None, kp:])) < self.gamma - tol:
            out.append("far coordinate closer than gamma")
        if abs(q[:kp].sum()) < self.tau - tol:
            out.append("|sum of close weights| < tau")
        if np.max(np.abs(q)) > self.R + tol:
            out.append("||q||_inf > R")
        return out

    def validate(self) -> "PowerSumInstance":
        bad = self.violations()
        if bad:
            raise ValueError("invalid power-sum instance: " + "; ".join(bad))
        return self


@dataclass(frozen=True)
class Witness:
    l_star: int
    value: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.value >= self.bound


def power_correlation(v, q, l: int) -> float:
    """``sum_i q_i v_i^l``."""
    v = np.asarray(v, dtype=float)
    q = np.asarray(q, dtype=float)
    if v.shape != q.shape:
        raise ValueError("v and q differ in length")
    if l < 0:
        raise ValueError("power must be non-negative")
    return float(q @ v**l)


def powersum_bound(inst: PowerSumInstance, C: float = POWERSUM_C) -> float:
    k, kp = inst.k, inst.k_prime
    base = (inst.tau / (2 * k)) * (inst.alpha**2 * inst.gamma**2 / (4 * k)) ** k
    return base - C * inst.R * k * (kp - 1) * inst.beta


def powersum_witness(inst: PowerSumInstance, C: float = POWERSUM_C) -> Witness:
    """Largest ``|<v^l, q>|`` over even ``l <= 2k`` and the bound it is compared against."""
    inst.validate()
    vals = [abs(power_correlation(inst.v, inst.q, l)) for l in range(0, 2 * inst.k + 1, 2)]
    best = int(np.argmax(vals))
    return Witness(2 * best, vals[best], powersum_bound(inst, C))


def random_instance(rng: np.random.Generator, k: int, R: float = 1.0) -> PowerSumInstance:
    """A random valid instance with non-negative ``v`` (the folded-projection setting)."""
    kp = int(rng.integers(1, k + 1))
    alpha = rng.uniform(0.05, 0.95)
    gamma = rng.uniform(0.02, 0.5)
    beta = rng.uniform(1e-4, 0.1) * gamma
    center = rng.uniform(alpha, 1.0)
    close = np.clip(center + rng.uniform(-beta / 2, beta / 2, kp), 0.0, 1.0)
    close[0] = center
    lo, hi = close.min(), close.max()
    # far coordinates avoid the gamma-neighbourhood of the close group
    left, right = max(lo - gamma, 0.0), max(1.0 - (hi + gamma), 0.0)
    if left + right <= 0:
        close = np.concatenate([close, np.full(k - kp, center)])
        kp, far = k, np.zeros(0)
    else:
        x = rng.uniform(0.0, left + right, k - kp)
        far = np.where(x < left, x, hi + gamma + (x - left))
    q = rng.uniform(-R, R, k)
    tau = abs(q[:kp].sum())
    if tau < 1e-3:
        q[0] = R if q[0] >= 0 else -R
        tau = abs(q[:kp].sum())
    beta_eff = max(float(np.max(np.abs(close - center))), 1e-12)
    return PowerSumInstance(np.concatenate([close, far]), q, kp, alpha, min(beta_eff, 0.999),
                            gamma, tau, R).validate()


def adversarial_weights(inst: PowerSumInstance) -> PowerSumInstance:
    """Same ``v`` with ``q`` chosen by LP to minimize the largest even correlation.

    The LP keeps ``sum_{i < k'} q_i = tau`` and ``|q_i| <= R``, so the result is
    still a valid instance and is the hardest one for the given ``v``.
    """
    k, kp = inst.k, inst.k_prime
    A = np.array([inst.v**l for l in range(0, 2 * k + 1, 2)])
    ones = np.ones((len(A), 1))
    res = optimize.linprog(
        np.r_[np.zeros(k), 1.0],
        A_ub=np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])]),
        b_ub=np.zeros(2 * len(A)),
        A_eq=np.r_[np.ones(kp), np.zeros(k - kp), 0.0][None, :],
        b_eq=[math.copysign(inst.tau, inst.q[:kp].sum() or 1.0)],
        bounds=[(-inst.R, inst.R)] * k + [(0, None)],
        method="highs",
    )
    if not res.success:
        return inst
    q = np.clip(res.x[:k], -inst.R, inst.R)
    # solver tolerance can move the close-group sum slightly; re-read tau from q
    return PowerSumInstance(inst.v, q, kp, inst.alpha, inst.beta, inst.gamma,
                            abs(float(q[:kp].sum())), inst.R)


# -- tightness family ----------------------------------------------------------

def tightness_instance(k: int, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """``v_i^2 = 1 - i gamma`` and alternating binomial weights, ``i = 0..k-1``."""
    if k < 1 or not (0 < gamma and (k - 1) * gamma < 1):
        raise ValueError("need k >= 1 and 0 < (k - 1) * gamma < 1")
    i = np.arange(k)
    v = np.sqrt(1.0 - i * gamma)
    q = np.array([(-1) ** j * math.comb(k - 1, j) for j in range(k)], dtype=float)
    return v, q


def tightness_correlation_exact(k: int, gamma, l: int) -> Fraction:
    """``<v^l, q>`` of the tightness instance in exact arithmetic (``l`` even)."""
    if l % 2:
        raise ValueError("exact path needs even l")
    g = Fraction(gamma)
    return sum(((-1) ** i * math.comb(k - 1, i) * (1 - i * g) ** (l // 2) for i in range(k)), Fraction(0))


def first_nonzero_even_power(k: int, gamma) -> tuple[int, Fraction]:
    for l in range(0, 2 * k + 1, 2):
        val = tightness_correlation_exact(k, gamma, l)
        if val != 0:
            return l, val
    raise AssertionError("tightness instance has no nonzero even power up to 2k")


# -- Vieta -----------------------------------------------------------------------

def elementary_symmetric(z) -> np.ndarray:
    """``[e_0, ..., e_K]`` from the monic polynomial with roots ``z``."""
    coeffs = np.poly(np.asarray(z, dtype=float))
    return coeffs * (-1.0) ** np.arange(len(coeffs))


def vieta_terms(z) -> tuple[np.ndarray, np.ndarray]:
    """Per coordinate: ``z_i^K`` and the terms of ``sum_s (-1)^(K-s+1) e_{K-s} z_i^s``."""
    z = np.asarray(z, dtype=float)
    K = len(z)
    e = elementary_symmetric(z)
    s = np.arange(K)
    signs = (-1.0) ** (K - s + 1)
    terms = signs * e[K - s] * z[:, None] ** s
    return z**K, terms


def vieta_check(z) -> float:
    """Largest relative residual of ``z_i^K`` against its Vieta expansion."""
    lhs, terms = vieta_terms(z)
    scale = np.abs(lhs) + np.sum(np.abs(terms), axis=1)
    resid = np.abs(lhs - terms.sum(axis=1))
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(resid / scale))


def vieta_check_exact(z) -> Fraction:
    """Vieta residual in rational arithmetic; zero for any input."""
    z = [Fraction(x) for x in z]
    K = len(z)
    e = [Fraction(1)] + [Fraction(0)] * K
    for x in z:
        for j in range(K, 0, -1):
            e[j] += e[j - 1] * x
    worst = Fraction(0)
    for x in z:
        rhs = sum(((-1) ** (K - s + 1) * e[K - s] * x**s for s in range(K)), Fraction(0))
        worst = max(worst, abs(x**K - rhs))
    return worst


# -- Vandermonde -----------------------------------------------------------------

@dataclass(frozen=True)
class VandermondeSolution:
    alpha: np.ndarray
    residual: float
    norm: float
    bound: float
    min_gap: float

    @property
    def within_bound(self) -> bool:
        return self.norm <= self.bound


def vandermonde_solve(nodes, c) -> VandermondeSolution:
    """Solve ``sum_j alpha_j nodes_i^j = c_i`` by column-pivoted QR."""
    nodes = np.asarray(nodes, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    m = len(nodes)
    if len(c) != m:
        raise ValueError("nodes and right-hand side differ in length")
    gaps = np.diff(np.sort(nodes))
    min_gap = float(gaps.min()) if m > 1 else math.inf
    if min_gap == 0:
        raise ValueError("duplicate Vandermonde nodes")
    V = np.vander(nodes, m, increasing=True)
    Q, Rm, piv = linalg.qr(V, pivoting=True)
    alpha = np.empty(m)
    alpha[piv] = linalg.solve_triangular(Rm, Q.T @ c)
    resid = float(np.linalg.norm(V @ alpha - c))
    norm_c = float(np.linalg.norm(c))
    bound = m * (1 / min_gap) ** (2 * m - 2) * norm_c if m > 1 else norm_c
    return VandermondeSolution(alpha, resid, float(np.linalg.norm(alpha)), bound, min_gap)


def sign_pattern_coeffs(nodes, signs) -> np.ndarray:
    """Coefficients of the polynomial in ``nodes`` that takes the value ``signs``."""
    signs = np.asarray(signs, dtype=float)
    if not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be +1 or -1")
    return vandermonde_solve(nodes, signs).alpha


# -- line format for batch checks --------------------------------------------------

def parse_instance_line(line: str) -> PowerSumInstance:
    """``k' alpha beta gamma tau R ; v_1 .. v_k ; q_1 .. q_k``."""
    head, v, q = (part.split() for part in line.split(";"))
    if len(head) != 6:
        raise ValueError(f"expected 6 header fields, got {len(head)}")
    kp = int(head[0])
    a, b, g, t, R = (float(x) for x in head[1:])
    return PowerSumInstance([float(x) for x in v], [float(x) for x in q], kp, a, b, g, t, R)


def format_instance_line(inst: PowerSumInstance) -> str:
    head = f"{inst.k_prime} {inst.alpha!r} {inst.beta!r} {inst.gamma!r} {inst.tau!r} {inst.R!r}"
    return " ; ".join([head, " ".join(map(repr, inst.v.tolist())), " ".join(map(repr, inst.q.tolist()))])
