"""Symmetric tensors stored by canonical (non-decreasing) multi-index.

An order-``l`` symmetric tensor over R^d is held as one value per multiset
of ``l`` coordinates, ``C(d+l-1, l)`` values in total.  Index tuples are
0-based and listed in the order of ``itertools.combinations_with_replacement``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .hermite import CapacityError

DEFAULT_MAX_ENTRIES = 5_000_000


def entry_count(d: int, l: int) -> int:
    return math.comb(d + l - 1, l)


@dataclass(frozen=True)
class MultiIndexSet:
    d: int
    l: int
    tuples: np.ndarray  # (E, l) int
    exponents: np.ndarray  # (E, d) int
    multiplicity: np.ndarray  # (E,) float, l! / alpha!
    position: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.tuples)

    def index_of(self, idx) -> int:
        return self.position[tuple(sorted(int(i) for i in idx))]


@lru_cache(maxsize=64)
def multi_indices(d: int, l: int) -> MultiIndexSet:
    if d < 1 or l < 0:
        raise ValueError(f"invalid tensor shape d={d}, l={l}")
    combos = list(itertools.combinations_with_replacement(range(d), l))
    tuples = np.array(combos, dtype=np.int64).reshape(len(combos), l)
    exps = np.zeros((len(tuples), d), dtype=np.int64)
    for j in range(l):
        np.add.at(exps, (np.arange(len(tuples)), tuples[:, j]), 1)
    fact = np.array([math.factorial(n) for n in range(l + 1)], dtype=float)
    mult = math.factorial(l) / np.prod(fact[exps], axis=1)
    position = {tuple(t): p for p, t in enumerate(tuples.tolist())}
    return MultiIndexSet(d, l, tuples, exps, mult, position)


@lru_cache(maxsize=64)
def _contraction_plan(d: int, l: int):
    """For each pair a <= b: positions of alpha containing {a, b} and the leftover exponents."""
    mi = multi_indices(d, l)
    lf = np.array([math.lgamma(n + 1) for n in range(l + 1)])
    plan = []
    for a in range(d):
        for b in range(a, d):
            beta = mi.exponents.copy()
            beta[:, a] -= 1
            beta[:, b] -= 1
            ok = np.all(beta >= 0, axis=1)
            beta = beta[ok]
            # (l-2)! / beta!
            weight = np.exp(math.lgamma(l - 1) - lf[beta].sum(axis=1))
            plan.append((a, b, np.flatnonzero(ok), beta, weight))
    return plan


class SymTensor:
    """Immutable order-``l`` symmetric tensor over R^d in multiset storage."""

    __slots__ = ("order", "dim", "_values")

    def __init__(self, order: int, dim: int, values):
        values = np.array(values, dtype=float)
        n = entry_count(dim, order)
        if values.shape != (n,):
            raise ValueError(f"expected {n} canonical entries, got shape {values.shape}")
        values.setflags(write=False)
        self.order = order
        self.dim = dim
        self._values = values

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def index_set(self) -> MultiIndexSet:
        return multi_indices(self.dim, self.order)

    def __len__(self) -> int:
        return len(self._values)

    def __getitem__(self, idx) -> float:
        if len(idx) != self.order:
            raise IndexError(f"need {self.order} indices")
        return float(self._values[self.index_set.index_of(idx)])

    def __repr__(self) -> str:
        return f"SymTensor(order={self.order}, dim={self.dim}, entries={len(self)})"

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymTensor":
        return cls(order, dim, np.zeros(entry_count(dim, order)))

    @classmethod
    def from_dense(cls, arr) -> "SymTensor":
        """Read the canonical entries of a dense array (assumed symmetric)."""
        arr = np.asarray(arr, dtype=float)
        l, d = arr.ndim, (arr.shape[0] if arr.ndim else 1)
        mi = multi_indices(d, l)
        vals = arr[tuple(mi.tuples.T)] if l else arr.reshape(1)
        return cls(l, d, vals)

    @classmethod
    def rank_one_sum(cls, weights, vectors, order: int) -> "SymTensor":
        """``sum_i weights[i] * vectors[i]^{(x) order}``."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        weights = np.asarray(weights, dtype=float)
        d = vectors.shape[1]
        mi = multi_indices(d, order)
        # prod_j u_j^{alpha_j} for each neuron
        mono = np.prod(vectors[:, None, :] ** mi.exponents[None, :, :], axis=2)
        return cls(order, d, weights @ mono)

    def to_dense(self) -> np.ndarray:
        if self.dim ** self.order > DEFAULT_MAX_ENTRIES:
            raise CapacityError("dense expansion too large")
        out = np.empty((self.dim,) * self.order)
        mi = self.index_set
        for idx in itertools.product(range(self.dim), repeat=self.order):
            out[idx] = self._values[mi.position[tuple(sorted(idx))]]
        return out

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.index_set.multiplicity * self._values**2)))

    def inner(self, other: "SymTensor") -> float:
        self._check_compatible(other)
        return float(np.sum(self.index_set.multiplicity * self._values * other._values))

    def full_contraction(self, z) -> float:
        """``<T, z^{(x) l}>``."""
        z = np.asarray(z, dtype=float)
        mi = self.index_set
        mono = np.prod(z[None, :] ** mi.exponents, axis=1)
        return float(np.sum(mi.multiplicity * self._values * mono))

    def contract(self, g) -> "ContractedMatrix":
        return contract(self, g)

    def _check_compatible(self, other: "SymTensor") -> None:
        if (self.order, self.dim) != (other.order, other.dim):
            raise ValueError("tensor shapes differ")

    def __add__(self, other: "SymTensor") -> "SymTensor":
        self._check_compatible(other)
        return SymTensor(self.order, self.dim, self._values + other._values)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        self._check_compatible(other)
        return SymTensor(self.order, self.dim, self._values - other._values)

    def __mul__(self, c: float) -> "SymTensor":
        return SymTensor(self.order, self.dim, self._values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor":
        return self * -1.0


@dataclass(frozen=True)
class ContractedMatrix:
    """``T(g, ..., g, :, :)`` together with the order and direction it came from."""

    matrix: np.ndarray
    order: int
    g: np.ndarray


def contract(T: SymTensor, g, tol: float = 1e-9) -> ContractedMatrix:
    """Contract all but the last two modes of ``T`` with the unit vector ``g``."""
    if T.order < 2:
        raise ValueError("contraction needs order >= 2")
    g = np.asarray(g, dtype=float)
    if g.shape != (T.dim,):
        raise ValueError("direction has wrong dimension")
    if abs(np.linalg.norm(g) - 1.0) > tol:
        raise ValueError("contraction direction must be a unit vector")
    d = T.dim
    M = np.zeros((d, d))
    vals = T.values
    for a, b, pos, beta, weight in _contraction_plan(d, T.order):
        mono = np.prod(g[None, :] ** beta, axis=1)
        M[a, b] = M[b, a] = float(np.sum(vals[pos] * weight * mono))
    return ContractedMatrix(M, T.order, g.copy())


def dump_tensor(T: SymTensor) -> str:
    """Text dump: header ``l d`` then ``i_1 .. i_l value`` per canonical entry (0-based)."""
    lines = [f"{T.order} {T.dim}"]
    for idx, v in zip(T.index_set.tuples.tolist(), T.values.tolist()):
        lines.append(" ".join(str(i) for i in idx) + f" {v!r}")
    return "\n".join(lines) + "\n"


def load_tensor(text: str) -> SymTensor:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    l, d = int(rows[0][0]), int(rows[0][1])
    mi = multi_indices(d, l)
    vals = np.zeros(len(mi))
    seen = 0
    for row in rows[1:]:
        if len(row) != l + 1:
            raise ValueError(f"malformed tensor row: {' '.join(row)}")
        vals[mi.index_of([int(t) for t in row[:l]])] = float(row[l])
        seen += 1
    if seen != len(mi):
        raise ValueError(f"expected {len(mi)} entries, found {seen}")
    return SymTensor(l, d, vals)
