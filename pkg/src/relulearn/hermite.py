"""Probabilist's Hermite polynomials, Hermite tensors and ReLU Hermite coefficients.

Conventions
-----------
``H_n`` is the probabilist's Hermite polynomial (``H_2(x) = x^2 - 1``) and
``Hn_hat = H_n / sqrt(n!)`` its normalized version, orthonormal under N(0, 1).

``relu_hermite_coeff(l)`` is the coefficient ``c_l`` in ``relu(z) = sum_l c_l H_l(z)``
(unnormalized basis), so ``c_l = E[relu(z) H_l(z)] / l!``.  The coefficient with
respect to the normalized basis is ``c_l * sqrt(l!)`` and is returned by
``relu_hermite_coeff_normalized``.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

DEFAULT_MAX_DEGREE = 24


class CapacityError(ValueError):
    """Raised when a request exceeds a configured size limit."""


class HermiteBasisCache:
    """Coefficient tables for ``H_n`` and ``Hn_hat`` up to ``max_degree``.

    The integer tables are built with the exact three-term recurrence
    ``H_{n+1} = x H_n - n H_{n-1}`` and converted to floats once.
    """

    def __init__(self, max_degree: int = DEFAULT_MAX_DEGREE):
        if max_degree < 0:
            raise ValueError("max_degree must be non-negative")
        self.max_degree = max_degree
        table: list[list[int]] = [[1], [0, 1]]
        for n in range(1, max_degree):
            prev, cur = table[n - 1], table[n]
            nxt = [0] + cur  # x * H_n
            for j, c in enumerate(prev):
                nxt[j] -= n * c
            table.append(nxt)
        self.int_coefficients: tuple[tuple[int, ...], ...] = tuple(
            tuple(row) for row in table[: max_degree + 1]
        )
        self.coefficients = np.zeros((max_degree + 1, max_degree + 1))
        for n, row in enumerate(self.int_coefficients):
            self.coefficients[n, : len(row)] = row
        norms = np.array([math.sqrt(math.factorial(n)) for n in range(max_degree + 1)])
        self.normalized_coefficients = self.coefficients / norms[:, None]

    def _check(self, n: int) -> None:
        if n < 0:
            raise ValueError(f"degree must be non-negative, got {n}")
        if n > self.max_degree:
            raise CapacityError(f"degree {n} exceeds cache capacity {self.max_degree}")

    def eval(self, n: int, x):
        """``H_n(x)``; evaluated by the float recurrence (stable for moderate |x|)."""
        self._check(n)
        return self.eval_all(n, x)[n]

    def eval_normalized(self, n: int, x):
        self._check(n)
        return self.eval(n, x) / math.sqrt(math.factorial(n))

    def eval_all(self, n: int, x) -> np.ndarray:
        """Stack ``[H_0(x), ..., H_n(x)]`` along a new leading axis."""
        self._check(n)
        x = np.asarray(x, dtype=float)
        out = np.empty((n + 1,) + x.shape)
        out[0] = 1.0
        if n >= 1:
            out[1] = x
        for m in range(1, n):
            out[m + 1] = x * out[m] - m * out[m - 1]
        return out

    def eval_all_normalized(self, n: int, x) -> np.ndarray:
        out = self.eval_all(n, x)
        for m in range(2, n + 1):
            out[m] /= math.sqrt(math.factorial(m))
        return out


_DEFAULT_CACHE = HermiteBasisCache()


def default_cache() -> HermiteBasisCache:
    return _DEFAULT_CACHE


def hermite_eval(n: int, x):
    return _DEFAULT_CACHE.eval(n, x)


def hermite_normalized_eval(n: int, x):
    return _DEFAULT_CACHE.eval_normalized(n, x)


def _double_factorial(n: int) -> int:
    # (-1)!! = 1 by convention
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@lru_cache(maxsize=None)
def relu_hermite_coeff(l: int) -> float:
    """Coefficient of ``H_l`` in the expansion of ``relu``.

    c_0 = 1/sqrt(2 pi), c_1 = 1/2, c_{2m+1} = 0 for m >= 1 and
    c_{2m} = (-1)^{m+1} (2m-3)!! / (sqrt(2 pi) (2m)!) for m >= 1.
    """
    if l < 0:
        raise ValueError("degree must be non-negative")
    if l == 0:
        return 1.0 / math.sqrt(2 * math.pi)
    if l == 1:
        return 0.5
    if l % 2 == 1:
        return 0.0
    m = l // 2
    sign = 1 if (m + 1) % 2 == 0 else -1
    return sign * _double_factorial(2 * m - 3) / (math.sqrt(2 * math.pi) * math.factorial(l))


def relu_hermite_coeff_normalized(l: int) -> float:
    """``E[relu(z) Hn_hat_l(z)]``, the coefficient in the orthonormal basis."""
    return relu_hermite_coeff(l) * math.sqrt(math.factorial(l))


def abs_hermite_coeff(l: int) -> float:
    """Coefficient of ``H_l`` for ``|z| = relu(z) + relu(-z)``: ``2 c_l`` for even l, else 0."""
    return 2.0 * relu_hermite_coeff(l) if l % 2 == 0 else 0.0


def hermite_tensor(l: int, x):
    """Normalized Hermite tensor ``S_l(x)`` in canonical multiset storage.

    Entry at multi-index ``(i_1..i_l)`` is ``prod_j Hn_hat_{n_j}(x_j)`` with
    ``n_j`` the multiplicity of coordinate ``j``.
    """
    from .tensors import SymTensor, multi_indices

    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    exps = multi_indices(d, l).exponents
    table = _DEFAULT_CACHE.eval_all_normalized(l, x)  # (l+1, d)
    vals = np.prod(table[exps, np.arange(d)], axis=1)
    return SymTensor(l, d, vals)
