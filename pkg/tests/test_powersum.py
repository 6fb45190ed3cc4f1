import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relulearn.moments import contract, exact_moment_tensor
from relulearn.network import AbsNetwork, unit_vector
from relulearn.powersum import (
    POWERSUM_C,
    PowerSumInstance,
    adversarial_weights,
    elementary_symmetric,
    first_nonzero_even_power,
    format_instance_line,
    parse_instance_line,
    power_correlation,
    powersum_witness,
    random_instance,
    sign_pattern_coeffs,
    tightness_correlation_exact,
    tightness_instance,
    vandermonde_solve,
    vieta_check,
    vieta_check_exact,
)

seeds = st.integers(0, 2**32 - 1)


def test_power_correlation_basics():
    q = np.array([0.3, -1.2, 2.0])
    assert power_correlation([0.1, 0.5, 0.9], q, 0) == pytest.approx(q.sum())
    for l in range(6):
        assert power_correlation(np.ones(3), q, l) == pytest.approx(q.sum())
    assert power_correlation([1.0, -1.0], [1.0, 1.0], 3) == 0.0
    with pytest.raises(ValueError):
        power_correlation([1.0], [1.0, 2.0], 2)


def test_single_coordinate_witness():
    inst = PowerSumInstance([0.5], [1.0], 1, alpha=0.5, beta=0.01, gamma=0.1, tau=1.0, R=1.0)
    w = powersum_witness(inst)
    # l = 0 gives 1, the largest value; the l = 2 value 0.25 also clears the bound
    assert w.holds and w.l_star == 0
    assert power_correlation(inst.v, inst.q, 2) == 0.25 > w.bound


def test_invalid_instance_rejected():
    with pytest.raises(ValueError):
        powersum_witness(PowerSumInstance([0.5, 0.52], [1.0, 1.0], 1, 0.5, 0.01, 0.1, 1.0, 1.0))


def test_signed_projections_break_the_bound():
    # v and -v are indistinguishable to even powers, so the bound needs |v| separation
    inst = PowerSumInstance([0.5, -0.5], [1.0, -1.0], 1, 0.5, 0.01, 0.5, 1.0, 1.0)
    assert inst.violations() == []
    assert powersum_witness(inst, C=POWERSUM_C).value == 0.0
    assert not powersum_witness(inst).holds


@settings(max_examples=300, deadline=None)
@given(seeds, st.integers(1, 6))
def test_bound_holds_on_random_instances(seed, k):
    inst = random_instance(np.random.default_rng(seed), k)
    assert powersum_witness(inst).holds


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(2, 6))
def test_bound_holds_on_adversarial_weights(seed, k):
    inst = adversarial_weights(random_instance(np.random.default_rng(seed), k))
    assert inst.violations() == []
    assert powersum_witness(inst).holds


def test_tightness_instance_construction():
    v, q = tightness_instance(2, 0.5)
    np.testing.assert_allclose(v**2, [1.0, 0.5])
    assert q.tolist() == [1.0, -1.0]


@pytest.mark.parametrize("k", range(2, 7))
def test_tightness_kills_low_even_powers(k):
    gamma = 0.1
    v, q = tightness_instance(k, gamma)
    for l in range(0, 2 * k - 3, 2):
        assert abs(power_correlation(v, q, l)) <= 1e-9
    l0, val = first_nonzero_even_power(k, gamma)
    assert l0 == 2 * k - 2
    assert power_correlation(v, q, l0) == pytest.approx(float(val), rel=1e-9)
    # finite-difference oracle: (k-1)-th difference of (1 - x gamma)^(k-1)
    assert val == math.factorial(k - 1) * Fraction(gamma) ** (k - 1)
    assert all(tightness_correlation_exact(k, gamma, l) != 0 for l in range(l0, 2 * k + 1, 2))


def test_tightness_at_three_tenths():
    v, q = tightness_instance(3, 0.1)
    assert power_correlation(v, q, 4) == pytest.approx(0.02, rel=1e-9)


def test_vieta_small_cases():
    assert vieta_check([2.0, 3.0]) == 0.0
    assert vieta_check([1.7]) == 0.0
    np.testing.assert_allclose(elementary_symmetric([2.0, 3.0]), [1.0, 5.0, 6.0])


def _newton_elementary(z):
    K = len(z)
    p = [np.sum(np.asarray(z) ** j) for j in range(K + 1)]
    e = [1.0]
    for j in range(1, K + 1):
        e.append(sum((-1) ** (i - 1) * e[j - i] * p[i] for i in range(1, j + 1)) / j)
    return np.array(e)


@settings(max_examples=200)
@given(seeds, st.integers(1, 10))
def test_vieta_random(seed, K):
    z = np.random.default_rng(seed).uniform(-1, 1, K)
    np.testing.assert_allclose(elementary_symmetric(z), _newton_elementary(z), atol=1e-12)
    assert vieta_check(z) <= 1e-10


@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=50), min_size=1, max_size=5))
def test_vieta_exact(z):
    assert vieta_check_exact(z) == 0


def test_vandermonde_trivial():
    np.testing.assert_allclose(vandermonde_solve([0, 1], [1, 1]).alpha, [1, 0], atol=1e-15)
    np.testing.assert_allclose(vandermonde_solve([0, 1], [0, 1]).alpha, [0, 1], atol=1e-15)
    with pytest.raises(ValueError):
        vandermonde_solve([0.5, 0.5], [1, 2])


def test_vandermonde_bound_fails_outside_unit_interval():
    # nodes outside [0, 1] are not covered by the norm bound
    sol = vandermonde_solve([-1.0, 1.0], [1.0, 0.0])
    assert sol.residual <= 1e-12
    assert sol.norm > sol.bound


def well_separated_nodes(rng, m, floor=0.05):
    while True:
        nodes = rng.uniform(0, 1, m)
        if m == 1 or np.min(np.diff(np.sort(nodes))) >= floor:
            return nodes


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(1, 6))
def test_vandermonde_random(seed, m):
    rng = np.random.default_rng(seed)
    nodes = well_separated_nodes(rng, m)
    c = rng.standard_normal(m)
    sol = vandermonde_solve(nodes, c)
    assert sol.residual <= 1e-8 * np.linalg.norm(c)
    assert sol.within_bound


def test_sign_pattern_two_nodes():
    a = sign_pattern_coeffs([0.25, 1.0], [1, -1])
    assert a[0] + a[1] * 0.25 == pytest.approx(1.0)
    assert a[0] + a[1] * 1.0 == pytest.approx(-1.0)
    ones = sign_pattern_coeffs([0.1, 0.4, 0.7], [1, 1, 1])
    np.testing.assert_allclose(ones, [1, 0, 0], atol=1e-12)


def test_sign_pattern_recovers_absolute_weights():
    rng = np.random.default_rng(12)
    d, m = 5, 4
    while True:
        us = np.array([unit_vector(rng, d) for _ in range(m)])
        g = unit_vector(rng, d)
        nodes = (us @ g) ** 2
        if np.min(np.diff(np.sort(nodes))) > 0.02:
            break
    lam = rng.choice([-1.0, 1.0], m) * rng.uniform(0.3, 1.0, m)
    net = AbsNetwork(np.zeros(d), lam, us)
    alpha = sign_pattern_coeffs(nodes, np.sign(lam))
    combo = sum(a * contract(exact_moment_tensor(net, 2 * (s + 1)), g).matrix for s, a in enumerate(alpha))
    target = sum(abs(l) * np.outer(u, u) for l, u in zip(lam, us))
    np.testing.assert_allclose(combo, target, atol=1e-8)


@settings(max_examples=30)
@given(seeds, st.integers(1, 5))
def test_instance_line_round_trip(seed, k):
    inst = random_instance(np.random.default_rng(seed), k)
    back = parse_instance_line(format_instance_line(inst))
    assert back.v.tolist() == inst.v.tolist() and back.q.tolist() == inst.q.tolist()
    assert (back.k_prime, back.tau, back.R) == (inst.k_prime, inst.tau, inst.R)
