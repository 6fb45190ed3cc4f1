"""Network representations, Gaussian L2 distances, sampling and synthetic instances.

Two parametrizations are used throughout:

* ``ReluNetwork``: ``f(x) = sum_i mu_i relu(<u_i, x>)``
* ``AbsNetwork``:  ``f(x) = <w, x> + sum_i lam_i |<u_i, x>|``

and ``to_abs_form`` maps the first onto the second using
``relu(z) = (|z| + z) / 2``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .hermite import CapacityError

UNIT_TOL = 1e-12
MAX_PERM_WIDTH = 9


def _as_directions(directions, k: int | None = None) -> np.ndarray:
    u = np.asarray(directions, dtype=float)
    if u.ndim == 1:
        u = u[None, :] if u.size else u.reshape(0, 0)
    if k is not None and u.shape[0] != k:
        raise ValueError(f"expected {k} directions, got {u.shape[0]}")
    if u.size and np.max(np.abs(np.linalg.norm(u, axis=1) - 1.0)) > UNIT_TOL:
        raise ValueError("directions must be unit vectors")
    return u


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


def unit_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    weights: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.weights, dtype=float).reshape(-1)
        u = _as_directions(self.directions, len(mu))
        object.__setattr__(self, "weights", mu)
        object.__setattr__(self, "directions", u)
        _freeze(mu, u)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def __call__(self, x) -> np.ndarray | float:
        return evaluate(self, x)


@dataclass(frozen=True, eq=False)
class AbsNetwork:
    w: np.ndarray
    weights: np.ndarray
    directions: np.ndarray
    R: float = math.inf

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        lam = np.asarray(self.weights, dtype=float).reshape(-1)
        u = _as_directions(self.directions, len(lam)) if len(lam) else np.zeros((0, len(w)))
        if u.shape[1] != len(w):
            raise ValueError("w and directions disagree on dimension")
        mass = float(np.sum(np.abs(lam)))
        if np.linalg.norm(w) > mass * (1 + 1e-9) + 1e-12:
            raise ValueError("linear term exceeds total neuron weight")
        if mass > self.R * (1 + 1e-9):
            raise ValueError(f"weight mass {mass:.6g} exceeds budget R={self.R}")
        for name, val in (("w", w), ("weights", lam), ("directions", u)):
            object.__setattr__(self, name, val)
        _freeze(w, lam, u)

    @classmethod
    def zero(cls, d: int, R: float = math.inf) -> "AbsNetwork":
        return cls(np.zeros(d), np.zeros(0), np.zeros((0, d)), R)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return len(self.w)

    def __call__(self, x) -> np.ndarray | float:
        return evaluate(self, x)

    def combine(self, other: "AbsNetwork") -> "AbsNetwork":
        """Sum of the two functions, neurons concatenated."""
        return AbsNetwork(
            self.w + other.w,
            np.concatenate([self.weights, other.weights]),
            np.vstack([self.directions, other.directions]),
            self.R + other.R,
        )

    def drop(self, keep: Sequence[int]) -> "AbsNetwork":
        """Sub-network on the neurons ``keep``; the linear term is dropped."""
        keep = list(keep)
        return AbsNetwork(np.zeros(self.d), self.weights[keep], self.directions[keep], self.R)


Network = ReluNetwork | AbsNetwork


def to_abs_form(net: ReluNetwork, R: float | None = None) -> AbsNetwork:
    lam = net.weights / 2.0
    w = lam @ net.directions if net.k else np.zeros(net.d)
    if R is None:
        R = max(1.0, float(np.sum(np.abs(lam))))
    return AbsNetwork(w, lam, net.directions, R)


def evaluate(net: Network, x) -> np.ndarray | float:
    """Evaluate at one point ``(d,)`` or a batch ``(N, d)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != net.d:
        raise ValueError(f"input dimension {X.shape[1]} does not match network dimension {net.d}")
    z = X @ net.directions.T
    if isinstance(net, ReluNetwork):
        out = np.maximum(z, 0.0) @ net.weights
    else:
        out = X @ net.w + np.abs(z) @ net.weights
    return float(out[0]) if single else out


# -- distances ---------------------------------------------------------------

def _params(net) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(net, (ReluNetwork, AbsNetwork)):
        return net.weights, net.directions
    lam, u = net
    return np.asarray(lam, dtype=float), np.atleast_2d(np.asarray(u, dtype=float))


@lru_cache(maxsize=None)
def _permutations(k: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(k))), dtype=np.intp).reshape(-1, k)


def param_dist(a, b) -> float:
    """``min_pi max_i |lam_i - lam'_pi(i)| + ||u_i - u'_pi(i)||`` by brute force over pi."""
    la, ua = _params(a)
    lb, ub = _params(b)
    k = len(la)
    if len(lb) != k:
        raise ValueError("param_dist needs equal widths")
    if k > MAX_PERM_WIDTH:
        raise CapacityError(f"width {k} exceeds brute-force limit {MAX_PERM_WIDTH}")
    if k == 0:
        return 0.0
    cost = np.abs(la[:, None] - lb[None, :]) + np.linalg.norm(ua[:, None, :] - ub[None, :, :], axis=2)
    perms = _permutations(k)
    return float(np.min(np.max(cost[np.arange(k), perms], axis=1)))


def abs_kernel(rho):
    """``E|<u,x>||<v,x>|`` for unit u, v with ``<u,v> = rho``."""
    rho = np.clip(rho, -1.0, 1.0)
    return (2.0 / np.pi) * (np.sqrt(1.0 - rho**2) + rho * np.arcsin(rho))


def _as_abs(net: Network) -> AbsNetwork:
    return to_abs_form(net) if isinstance(net, ReluNetwork) else net


def l2_norm_sq(net: Network) -> float:
    net = _as_abs(net)
    lam, u = net.weights, net.directions
    # linear/abs cross terms vanish by symmetry
    quad = lam @ abs_kernel(u @ u.T) @ lam if len(lam) else 0.0
    return max(0.0, float(net.w @ net.w + quad))


def difference(a: Network, b: Network) -> AbsNetwork:
    a, b = _as_abs(a), _as_abs(b)
    if a.d != b.d:
        raise ValueError("networks have different input dimension")
    return AbsNetwork(
        a.w - b.w,
        np.concatenate([a.weights, -b.weights]),
        np.vstack([a.directions, b.directions]),
    )


def mc_sq_dist(a: Network, b: Network, n_samples: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo ``E[(f_a - f_b)^2]`` and its standard error."""
    if a.d != b.d:
        raise ValueError("networks have different input dimension")
    rng = np.random.default_rng(seed)
    sq = np.empty(n_samples)
    chunk = 200_000
    for start in range(0, n_samples, chunk):
        X = rng.standard_normal((min(chunk, n_samples - start), a.d))
        sq[start : start + len(X)] = (evaluate(a, X) - evaluate(b, X)) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf


def l2_dist(a: Network, b: Network, method: str = "closed_form", n_samples: int = 100_000,
            seed: int = 0) -> float:
    if method == "closed_form":
        return math.sqrt(l2_norm_sq(difference(a, b)))
    if method == "monte_carlo":
        return math.sqrt(mc_sq_dist(a, b, n_samples, seed)[0])
    raise ValueError(f"unknown distance method {method!r}")


# -- sampling ----------------------------------------------------------------

@dataclass(frozen=True)
class LabeledSample:
    x: np.ndarray
    y: float
    noise_variance: float = 0.0


@dataclass(frozen=True, eq=False)
class Samples:
    """A batch of labeled samples held as arrays; iterates as ``LabeledSample``."""

    X: np.ndarray
    y: np.ndarray
    noise_variance: float = 0.0

    def __len__(self) -> int:
        return len(self.y)

    def __iter__(self) -> Iterator[LabeledSample]:
        for x, y in zip(self.X, self.y):
            yield LabeledSample(x, float(y), self.noise_variance)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def split(self, n_first: int) -> tuple["Samples", "Samples"]:
        return (Samples(self.X[:n_first], self.y[:n_first], self.noise_variance),
                Samples(self.X[n_first:], self.y[n_first:], self.noise_variance))

    def with_labels(self, y) -> "Samples":
        return Samples(self.X, np.asarray(y, dtype=float), self.noise_variance)


def sample_labeled(net: Network, n: int, noise_variance: float = 0.0, seed: int = 0) -> Samples:
    if n < 1:
        raise ValueError("need at least one sample")
    if noise_variance < 0:
        raise ValueError("noise variance must be non-negative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, net.d))
    y = evaluate(net, X)
    if noise_variance > 0:
        y = y + math.sqrt(noise_variance) * rng.standard_normal(n)
    return Samples(X, y, noise_variance)


@dataclass
class SampleSource:
    """Fresh, independent sample batches on demand; batch ``j`` depends only on (seed, j)."""

    net: Network
    noise_variance: float = 0.0
    seed: int = 0
    draws: int = field(default=0, init=False)

    def draw(self, n: int) -> Samples:
        child = np.random.SeedSequence(self.seed, spawn_key=(self.draws,))
        self.draws += 1
        return sample_labeled(self.net, n, self.noise_variance,
                              int(child.generate_state(1, dtype=np.uint64)[0]))


# -- instances ---------------------------------------------------------------

@dataclass(frozen=True)
class InstanceParams:
    sep: float = 1.0
    ladder: tuple[float, ...] = ()
    weight_range: tuple[float, float] = (0.5, 1.0)
    signs: str = "random"  # random | positive | alternating
    max_tries: int = 10_000


def _draw_weights(rng, k: int, R: float, p: InstanceParams) -> np.ndarray:
    lo, hi = p.weight_range
    mags = rng.uniform(lo, hi, size=k)
    if p.signs == "positive":
        signs = np.ones(k)
    elif p.signs == "alternating":
        signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    elif p.signs == "random":
        signs = rng.choice([-1.0, 1.0], size=k)
    else:
        raise ValueError(f"unknown sign pattern {p.signs!r}")
    mu = signs * mags
    mass = np.sum(np.abs(mu))
    return mu * (R / mass) if mass > R else mu


def _min_pair_sep(u: np.ndarray) -> float:
    best = math.inf
    for i, j in itertools.combinations(range(len(u)), 2):
        best = min(best, np.linalg.norm(u[i] - u[j]), np.linalg.norm(u[i] + u[j]))
    return best


def gen_instance(kind: str, k: int, d: int, R: float = 1.0, params: InstanceParams | None = None,
                 seed: int = 0) -> ReluNetwork:
    if k < 1 or d < 2 or R < 1:
        raise ValueError("need k >= 1, d >= 2, R >= 1")
    p = params or InstanceParams()
    rng = np.random.default_rng(seed)
    if kind == "random_sphere":
        u = np.array([unit_vector(rng, d) for _ in range(k)])
    elif kind == "well_separated":
        for _ in range(p.max_tries):
            u = np.array([unit_vector(rng, d) for _ in range(k)])
            if _min_pair_sep(u) >= p.sep:
                break
        else:
            raise ValueError(f"could not separate {k} directions by {p.sep} in dimension {d}")
    elif kind == "line_multiscale":
        ladder = tuple(p.ladder)
        if len(ladder) != k - 1:
            raise ValueError(f"ladder needs {k - 1} gaps, got {len(ladder)}")
        if any(not 0 < g < 2 for g in ladder):
            raise ValueError("ladder gaps must lie in (0, 2)")
        # points on one great circle; chord length 2 sin(dtheta/2) equals the gap
        e1 = unit_vector(rng, d)
        e2 = rng.standard_normal(d)
        e2 -= (e2 @ e1) * e1
        e2 /= np.linalg.norm(e2)
        theta = np.concatenate([[0.0], np.cumsum([2 * math.asin(g / 2) for g in ladder])])
        if theta[-1] >= math.pi:
            raise ValueError("ladder wraps past the antipode")
        u = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    return ReluNetwork(_draw_weights(rng, k, R, p), u)


# -- serialization -----------------------------------------------------------

def dump_network(net: Network) -> str:
    if isinstance(net, ReluNetwork):
        kind, R = "relu", max(1.0, float(np.sum(np.abs(net.weights))))
    else:
        kind, R = "abs", net.R
    lines = [f"# kind {kind}", f"{net.d} {net.k} {R!r}"]
    for lam, u in zip(net.weights.tolist(), net.directions.tolist()):
        lines.append(" ".join(repr(v) for v in [lam, *u]))
    if kind == "abs":
        lines.append("w " + " ".join(repr(v) for v in net.w.tolist()))
    return "\n".join(lines) + "\n"


def load_network(text: str) -> Network:
    kind = "abs"
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["kind"] and len(parts) == 2:
                kind = parts[1]
            continue
        rows.append(line.split())
    d, k, R = int(rows[0][0]), int(rows[0][1]), float(rows[0][2])
    neurons = [r for r in rows[1:] if r[0] != "w"]
    w_rows = [r for r in rows[1:] if r[0] == "w"]
    if len(neurons) != k or any(len(r) != d + 1 for r in neurons):
        raise ValueError("neuron rows do not match header")
    lam = np.array([float(r[0]) for r in neurons])
    u = np.array([[float(v) for v in r[1:]] for r in neurons]).reshape(k, d)
    if kind == "relu":
        return ReluNetwork(lam, u)
    if kind != "abs":
        raise ValueError(f"unknown network kind {kind!r}")
    w = np.array([float(v) for v in w_rows[0][1:]]) if w_rows else np.zeros(d)
    return AbsNetwork(w, lam, u, R)
