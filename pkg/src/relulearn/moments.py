"""Exact and empirical moment tensors of absolute-value networks.

For ``f(x) = <w, x> + sum_i lam_i |<u_i, x>|`` and Gaussian ``x``,
``E[f(x) He_alpha(x)] = l! * a_l * sum_i lam_i u_i^alpha`` for every multi-index
of size ``l >= 2``, where ``He_alpha = prod_j H_{alpha_j}(x_j)`` and
``a_l = 2 c_l`` is the Hermite coefficient of ``|z|``.  Dividing the empirical
correlation by ``l! a_l`` therefore gives an unbiased estimate of
``T_l = sum_i lam_i u_i^{(x) l}``.  For ``l = 1`` the correlation ``E[f(x) x]``
is exactly ``w``.
"""
from __future__ import annotations

import math

import numpy as np

from .hermite import CapacityError, default_cache, relu_hermite_coeff
from .network import Network, ReluNetwork, Samples, evaluate, to_abs_form
from .tensors import DEFAULT_MAX_ENTRIES, SymTensor, contract, entry_count, multi_indices

__all__ = [
    "contract",
    "estimate_moments",
    "estimate_residual_moments",
    "exact_moment_tensor",
    "hermite_correlations",
    "raw_to_unbiased",
]

DEFAULT_CHUNK = 65_536


def _check_order(l: int) -> None:
    if l < 1 or (l > 1 and l % 2 == 1):
        raise ValueError(f"moment order must be 1 or even, got {l}")


def _check_budget(d: int, l: int, max_entries: int) -> None:
    if entry_count(d, l) > max_entries:
        raise CapacityError(f"order-{l} tensor over R^{d} needs {entry_count(d, l)} entries")


def exact_moment_tensor(net: Network, l: int, max_entries: int = DEFAULT_MAX_ENTRIES):
    """``w`` for ``l = 1``; ``sum_i lam_i u_i^{(x) l}`` for even ``l``."""
    _check_order(l)
    net = to_abs_form(net) if isinstance(net, ReluNetwork) else net
    if l == 1:
        return net.w.copy()
    _check_budget(net.d, l, max_entries)
    if net.k == 0:
        return SymTensor.zeros(l, net.d)
    return SymTensor.rank_one_sum(net.weights, net.directions, l)


def hermite_correlations(X: np.ndarray, y: np.ndarray, l: int, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """``sum_a y_a He_alpha(x_a)`` for every canonical multi-index of size ``l``.

    Products are built coordinate by coordinate over a tree of exponent prefixes,
    so each canonical entry costs one vector multiply per chunk.  Chunks are
    reduced in sample order, which keeps results bit-identical per input.
    """
    n, d = X.shape
    mi = multi_indices(d, l)
    acc = np.zeros(len(mi))
    cache = default_cache()
    exps = np.zeros(d, dtype=np.int64)

    for start in range(0, n, chunk):
        Xc = X[start : start + chunk]
        table = cache.eval_all(l, Xc.T)  # (l+1, d, B)
        part = np.zeros(len(mi))

        def walk(j: int, remaining: int, prefix: np.ndarray) -> None:
            if j == d - 1:
                exps[j] = remaining
                pos = mi.position[_tuple_of(exps)]
                part[pos] = prefix @ table[remaining, j] if remaining else prefix.sum()
                return
            for e in range(remaining, -1, -1):
                exps[j] = e
                walk(j + 1, remaining - e, prefix * table[e, j] if e else prefix)

        walk(0, l, np.asarray(y[start : start + chunk], dtype=float))
        acc += part
    return acc


def _tuple_of(exps: np.ndarray) -> tuple:
    return tuple(i for i, e in enumerate(exps.tolist()) for _ in range(e))


def estimate_moments(samples: Samples, l: int, raw: bool = False,
                     max_entries: int = DEFAULT_MAX_ENTRIES, chunk: int = DEFAULT_CHUNK):
    """Empirical moment of order ``l`` from labeled Gaussian samples.

    By default returns the unbiased estimate of ``T_l`` (or of ``w`` for ``l = 1``).
    With ``raw=True`` returns the plain correlation ``mean_a y_a S_l(x_a)`` against
    the normalized Hermite tensor, without the coefficient correction.
    """
    _check_order(l)
    n = len(samples)
    if n < 1:
        raise ValueError("no samples")
    d = samples.d
    _check_budget(d, l, max_entries)
    if l == 1:
        return samples.y @ samples.X / n
    corr = hermite_correlations(samples.X, samples.y, l, chunk) / n
    mi = multi_indices(d, l)
    if raw:
        fact = np.array([math.factorial(e) for e in range(l + 1)], dtype=float)
        return SymTensor(l, d, corr / np.sqrt(np.prod(fact[mi.exponents], axis=1)))
    return SymTensor(l, d, corr / (2.0 * math.factorial(l) * relu_hermite_coeff(l)))


def estimate_residual_moments(samples: Samples, learned: Network, l: int, raw: bool = False,
                              max_entries: int = DEFAULT_MAX_ENTRIES, chunk: int = DEFAULT_CHUNK):
    """``estimate_moments`` on labels with the learned network's predictions subtracted."""
    resid = samples.with_labels(samples.y - evaluate(learned, samples.X))
    return estimate_moments(resid, l, raw=raw, max_entries=max_entries, chunk=chunk)


def raw_to_unbiased(raw: SymTensor) -> SymTensor:
    """Convert a raw normalized-Hermite correlation into the unbiased ``T_l`` estimate."""
    l, d = raw.order, raw.dim
    mi = multi_indices(d, l)
    fact = np.array([math.factorial(e) for e in range(l + 1)], dtype=float)
    scale = np.sqrt(np.prod(fact[mi.exponents], axis=1)) / (2.0 * math.factorial(l) * relu_hermite_coeff(l))
    return SymTensor(l, d, raw.values * scale)

