import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from relulearn.clumping import (
    GAME_FAMILIES,
    MAX_LEVEL,
    ClumpState,
    IllegalMove,
    InvalidPerturbation,
    Move,
    RandomAdversary,
    StrategyError,
    apply_move,
    block_points,
    default_tau,
    from_projection,
    is_legal,
    move_budget,
    null_adversary,
    perturb,
    play_noiseless,
    play_noisy,
    random_game_vector,
    separated_partition,
    strategy_step,
    worst_case_adversary,
    zero_entry_ok,
)
from relulearn.scales import Projection, ScaleParams, T_of, level

FIG_W = (0, 3.1, 2, 2, 3.1, 1, 1, 3.1, 2, 2, 3.1, 0)
FIG_MOVE = Move(((1, 3), (4, 6), (7, 9), (10, 12)))


def proj_of(v):
    v = np.asarray(v, dtype=float)
    order = np.argsort(v, kind="stable")
    return Projection(np.zeros(1), v[order], order, np.ones(len(v)), np.ones(len(v)))


def game_vectors(max_k=24):
    inner = st.lists(st.floats(0, 8, allow_nan=False), min_size=0, max_size=max_k - 2)
    return inner.map(lambda xs: ClumpState((0.0, *xs, 0.0)))


# -- legality and application ---------------------------------------------------------

def test_vacuous_interval_is_legal():
    assert is_legal(ClumpState((0, 0)), Move(((1, 2),)), tau=0, phi=1)


def test_four_interval_move_is_legal_and_leaves_three_points():
    s = ClumpState(FIG_W)
    assert is_legal(s, FIG_MOVE, tau=3, phi=1)
    out = apply_move(s, FIG_MOVE, tau=3)
    # four blocks [1,3] [4,6] [7,9] [10,12] are pairwise disjoint, so four entries remain,
    # i.e. three points with two unit-level gaps between them
    assert out.w == (0, 1, 1, 0)
    assert sum(len(r) for r in block_points(FIG_MOVE)) == 8


def test_mixed_interior_is_illegal():
    s = ClumpState(FIG_W)
    assert not is_legal(s, Move(((1, 5), (5, 12))), tau=3, phi=1)
    assert not is_legal(ClumpState((0, 3.1, 2, 2, 1, 0)), Move(((1, 5), (5, 6))), tau=3, phi=1)
    with pytest.raises(IllegalMove):
        apply_move(s, Move(((1, 5), (5, 12))), tau=3)


def test_high_interior_needs_margin():
    s = ClumpState((0, 2.0, 1.0, 0))
    assert not is_legal(s, Move(((1, 3), (3, 4))), tau=1.5, phi=1.0)
    s = ClumpState((0, 2.5, 1.0, 0))
    assert is_legal(s, Move(((1, 3), (3, 4))), tau=1.5, phi=1.0)
    assert not is_legal(s, Move(((1, 3), (3, 4))), tau=1.5, phi=1.6)


def test_full_interval_collapses_to_zero():
    assert apply_move(ClumpState((0, 1, 2, 0)), Move(((1, 4),)), tau=3).w == (0.0,)


def test_touching_intervals_merge():
    s = ClumpState((0, 1, 0.5, 1, 0, 2, 0))
    out = apply_move(s, Move(((1, 3), (3, 5))), tau=3)
    assert out.w == (0, 2, 0)


def test_move_validation():
    with pytest.raises(ValueError):
        Move(())
    with pytest.raises(ValueError):
        Move(((2, 2),))
    with pytest.raises(ValueError):
        Move(((1, 4), (3, 5)))
    with pytest.raises(ValueError):
        is_legal(ClumpState((0, 0)), Move(((1, 3),)), 1)


def test_state_validation():
    with pytest.raises(ValueError):
        ClumpState((0, 1))
    with pytest.raises(ValueError):
        ClumpState((0, -1, 0))
    with pytest.raises(ValueError):
        ClumpState(())


@given(game_vectors(), st.data())
@settings(max_examples=200, deadline=None)
def test_legal_moves_keep_boundary_zeros(s, data):
    k = s.k
    assume(k >= 2)
    cuts = sorted(set(data.draw(st.lists(st.integers(1, k), min_size=2, max_size=6))))
    assume(len(cuts) >= 2)
    iv = [(a, b) for a, b in zip(cuts, cuts[1:]) if data.draw(st.booleans())] or [(cuts[0], cuts[1])]
    m = Move(tuple(iv))
    tau = data.draw(st.floats(0, 8))
    if is_legal(s, m, tau):
        out = apply_move(s, m, tau)
        assert out.w[0] == 0 and out.w[-1] == 0
        assert out.k == k - sum(j - i for i, j in m.blocks())


# -- strategy ------------------------------------------------------------------------------

def test_strategy_single_high_interval():
    tr = play_noiseless((0, 5, 0), tau=3)
    assert [m.intervals for m in tr.moves()] == [((1, 3),)]
    assert tr.turns[0].certificate == ("high",)
    assert tr.final.w == (0.0,)


def test_strategy_all_zero():
    tr = play_noiseless((0, 0, 0))
    assert tr.n_moves == 1 and tr.final.w == (0.0,)


def test_trivial_games():
    assert play_noiseless((0,)).n_moves == 0
    assert play_noiseless((0, 0)).n_moves == 1


def test_separated_partition_halves():
    rng = np.random.default_rng(5)
    for _ in range(300):
        r = int(rng.integers(1, 40))
        u = rng.uniform(0, 2, r)
        u[0] = u[-1] = 0
        parts = separated_partition(u, 1.0)
        assert len(parts) <= math.ceil(r / 2)
        assert parts[0][0] == 0 and parts[-1][1] == r - 1


@pytest.mark.parametrize("family", GAME_FAMILIES)
def test_tracked_subsequence_halves_each_round(family):
    rng = np.random.default_rng(11)
    for _ in range(50):
        s = random_game_vector(rng, 64, family)
        tau, tracked, r = default_tau(64), None, 0
        while not s.done:
            before = s.k if tracked is None else len(tracked)
            step = strategy_step(s, tau, r, tracked)
            assert len(step.tracked) <= math.ceil(before / 2)
            untracked = set(range(step.state.k)) - set(step.tracked)
            assert all(step.state.w[t] > tau - r for t in untracked)
            s, tracked, r = step.state, step.tracked, r + 1


def test_threshold_too_small_raises():
    s = ClumpState((0, 1, 0, 1, 0, 1, 0, 1, 0))
    with pytest.raises(StrategyError):
        play_noiseless(s, tau=0.5)


@pytest.mark.parametrize("k", [8, 64, 512, 1024])
def test_random_games_within_budget(k):
    rng = np.random.default_rng(1000 + k)
    budget = move_budget(k)
    for t in range(1000):
        tr = play_noiseless(random_game_vector(rng, k, GAME_FAMILIES[t % 3]))
        assert tr.final.w == (0.0,)
        assert tr.violations == 0
        assert tr.n_moves <= budget
        assert all(zero_entry_ok(x) for x in tr.states())


def test_transcript_json():
    tr = play_noiseless(FIG_W, tau=3)
    d = json.loads(json.dumps(tr.as_dict()))
    assert d["final"] == [0.0]
    assert all(m["legal"] for m in d["moves"])
    assert d["n_moves"] == tr.n_moves


# -- noisy game --------------------------------------------------------------------------------

def test_perturb_rules():
    s = ClumpState((0, 0.5, 2.0, 0))
    assert perturb(s, s.w, 0.01) == s
    assert perturb(s, (0, 0, 2.0, 0), 0.01).w == (0, 0, 2.0, 0)
    with pytest.raises(InvalidPerturbation):
        perturb(s, (0, 0.5, 2.0 - 0.02, 0), 0.01)
    with pytest.raises(InvalidPerturbation):
        perturb(s, (0, 0.6, 2.0, 0), 0.01)


def test_null_adversary_matches_noiseless():
    rng = np.random.default_rng(3)
    for family in GAME_FAMILIES:
        w = random_game_vector(rng, 40, family)
        a, b = play_noiseless(w), play_noisy(w, adversary=null_adversary)
        assert a.moves() == b.moves()
        assert [t.result for t in a.turns] == [t.result for t in b.turns]


def test_worst_case_adversary():
    rng = np.random.default_rng(4)
    for k in (8, 64, 256):
        for t in range(60):
            w = random_game_vector(rng, k, GAME_FAMILIES[t % 3])
            tr = play_noisy(w, adversary=worst_case_adversary)
            assert tr.violations == 0
            assert tr.final.w == (0.0,)
            assert tr.n_moves <= move_budget(k)


def test_random_adversaries_no_violations():
    rng = np.random.default_rng(6)
    bad = 0
    for t in range(500):
        k = int(rng.integers(2, 257))
        w = random_game_vector(rng, k, GAME_FAMILIES[t % 3])
        bad += play_noisy(w, adversary=RandomAdversary(t)).violations
    assert bad == 0


def test_bad_adversary_rejected():
    with pytest.raises(InvalidPerturbation):
        play_noisy((0, 5, 5, 0), adversary=lambda s, d: s.as_array() - 1.0)


@given(game_vectors(16), st.data())
@settings(max_examples=300, deadline=None)
def test_monotone_conversion(s, data):
    k = s.k
    assume(k >= 2)
    cuts = sorted(set(data.draw(st.lists(st.integers(1, k), min_size=2, max_size=6))))
    assume(len(cuts) >= 2)
    m = Move(tuple(zip(cuts, cuts[1:])))
    tau = data.draw(st.floats(0, 8))
    assume(is_legal(s, m, tau, 1.0))
    delta = data.draw(st.floats(0, 0.5))
    w = s.as_array()
    frac = np.array(data.draw(st.lists(st.floats(0, 1), min_size=k, max_size=k)))
    lo = np.where(w > 1, w - delta, 0.0)
    p = perturb(s, lo + frac * (w - lo), delta)
    assert is_legal(p, m, tau, 1.0 - delta)


# -- projection bridge -------------------------------------------------------------------------

def test_coincident_projection_gives_one_move_game():
    p = ScaleParams(d=4, k=3)
    g = from_projection(proj_of([0.3, 0.3, 0.3]), p)
    assert g.state.w == (0, MAX_LEVEL, MAX_LEVEL, 0)
    assert g.tau == pytest.approx(level(p.gamma_floor, p))
    tr = play_noiseless(g.state, g.tau)
    assert tr.n_moves == 1 and tr.turns[0].move.intervals == ((1, 4),)


def test_ladder_projection_levels():
    p = ScaleParams(d=4, k=3)
    t1 = T_of(p.eps_prime, p)
    t2 = T_of(t1, p)
    g = from_projection(proj_of([0.0, t2, t2 + t1, t2 + t1 + p.eps_prime]), p)
    assert g.state.k == 5
    assert np.allclose(g.state.w, (0, 1.8, 0.9, 0, 0), atol=1e-6)


def test_two_clusters_regression():
    p = ScaleParams(d=4, k=4)
    g = from_projection(proj_of([0.1, 0.1 + 1e-4, 0.5, 0.5 + 1e-4]), p)
    lv = level(1e-4, p)
    assert g.state.w == pytest.approx((0, lv, 0, lv, 0))
    B = 4 * math.log(4) + math.log(1 / 0.05**2) + 3 * math.log(100)
    assert lv == pytest.approx(0.9 / math.log(4) * math.log(1 + 3 * math.log(100) / B))
    assert lv == pytest.approx(0.2824, abs=1e-4)
