"""The interval clumping game, its halving strategy, and the noisy variant.

States are vectors ``w`` of non-negative reals with zero first and last entries.
A move is a list of 1-based closed intervals ``[i, j]`` with ``i < j`` that may
touch but not overlap.  Touching intervals are united into blocks and each
block collapses to its minimum entry.  The game ends at the single-entry state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .scales import MAX_LEVEL, Projection, ScaleParams, gap_level, level

# tau = GAME_TAU_C * log2(k); frozen by scripts/calibrate_game.py
GAME_TAU_C = 1.0
# move budget GAME_MOVES_C * log2(k); frozen by scripts/calibrate_game.py
GAME_MOVES_C = 3.0
NOISY_PHI = 0.99


class IllegalMove(ValueError):
    pass


class InvalidPerturbation(ValueError):
    pass


class StrategyError(RuntimeError):
    """The threshold ran out before the game ended (``tau`` too small for ``k``)."""


@dataclass(frozen=True)
class ClumpState:
    w: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        if not w:
            raise ValueError("empty game vector")
        if any(not x >= 0 for x in w):
            raise ValueError("game entries must be non-negative")
        if w[0] != 0 or w[-1] != 0:
            raise ValueError("first and last entries must be zero")
        object.__setattr__(self, "w", w)

    @property
    def k(self) -> int:
        return len(self.w)

    @property
    def done(self) -> bool:
        return self.k == 1

    def __len__(self) -> int:
        return len(self.w)

    def as_array(self) -> np.ndarray:
        return np.array(self.w)


@dataclass(frozen=True)
class Move:
    intervals: tuple

    def __post_init__(self):
        iv = tuple((int(i), int(j)) for i, j in self.intervals)
        if not iv:
            raise ValueError("a move needs at least one interval")
        for i, j in iv:
            if i >= j:
                raise ValueError(f"interval [{i}, {j}] must have i < j")
        for (_, j), (i2, _) in zip(iv, iv[1:]):
            if i2 < j:
                raise ValueError("intervals must be ordered and may only touch at endpoints")
        object.__setattr__(self, "intervals", iv)

    def check_fits(self, k: int) -> None:
        if self.intervals[0][0] < 1 or self.intervals[-1][1] > k:
            raise ValueError(f"move {list(self.intervals)} does not fit a vector of length {k}")

    def blocks(self) -> list[tuple[int, int]]:
        """Union of the intervals as subsets of the line, as closed blocks."""
        out = [list(self.intervals[0])]
        for i, j in self.intervals[1:]:
            if i == out[-1][1]:
                out[-1][1] = j
            else:
                out.append([i, j])
        return [tuple(b) for b in out]

    def as_list(self) -> list:
        return [list(t) for t in self.intervals]


def interval_kind(w: Sequence[float], i: int, j: int, tau: float, phi: float) -> str | None:
    """Why ``[i, j]`` is good: ``'vacuous'``, ``'low'`` or ``'high'``; ``None`` if it is not."""
    a, b = w[i - 1], w[j - 1]
    if a > tau or b > tau:
        return None
    inner = w[i : j - 1]
    if not inner:
        return "vacuous"
    if all(x <= tau for x in inner):
        return "low"
    if all(x > max(a, b) + phi for x in inner):
        return "high"
    return None


def certify(s: ClumpState, m: Move, tau: float, phi: float = 1.0) -> list:
    m.check_fits(s.k)
    return [interval_kind(s.w, i, j, tau, phi) for i, j in m.intervals]


def is_legal(s: ClumpState, m: Move, tau: float, phi: float = 1.0) -> bool:
    return all(kind is not None for kind in certify(s, m, tau, phi))


def apply_move_map(s: ClumpState, m: Move) -> tuple[ClumpState, list[int], list[int]]:
    """Apply ``m`` without a legality check.

    Returns the new state, the new 0-based position of every old entry, and for
    each new entry the old position it came from (leftmost minimizer of its block).
    """
    m.check_fits(s.k)
    w = s.w
    new_w, where, origin = [], [0] * s.k, []
    blocks = iter(m.blocks())
    nxt = next(blocks, None)
    pos = 0
    while pos < s.k:
        if nxt is not None and pos == nxt[0] - 1:
            lo, hi = nxt[0] - 1, nxt[1]
            seg = w[lo:hi]
            arg = lo + min(range(len(seg)), key=seg.__getitem__)
            for t in range(lo, hi):
                where[t] = len(new_w)
            new_w.append(w[arg])
            origin.append(arg)
            pos = hi
            nxt = next(blocks, None)
        else:
            where[pos] = len(new_w)
            new_w.append(w[pos])
            origin.append(pos)
            pos += 1
    return ClumpState(tuple(new_w)), where, origin


def apply_move(s: ClumpState, m: Move, tau: float | None = None, phi: float = 1.0) -> ClumpState:
    """Collapse each block of ``m`` to its minimum; checks legality when ``tau`` is given."""
    if tau is not None and not is_legal(s, m, tau, phi):
        raise IllegalMove(f"move {m.as_list()} is not {phi}-legal at tau={tau}")
    return apply_move_map(s, m)[0]


# -- strategy ------------------------------------------------------------------------

def default_tau(k: int, c: float = GAME_TAU_C) -> float:
    return c * math.log2(k) if k > 1 else 0.0


def move_budget(k: int, C: float = GAME_MOVES_C) -> float:
    return C * math.log2(k) if k > 1 else 0.0


def separated_partition(u: Sequence[float], threshold: float) -> list[tuple[int, int]]:
    """Maximal runs (0-based, inclusive) of entries ``<= threshold``."""
    runs, start = [], None
    for t, x in enumerate(u):
        if x <= threshold:
            if start is None:
                start = t
        elif start is not None:
            runs.append((start, t - 1))
            start = None
    if start is not None:
        runs.append((start, len(u) - 1))
    return runs


@dataclass(frozen=True)
class StrategyStep:
    moves: tuple
    partition: tuple  # blocks of the tracked subsequence, 0-based
    tracked: tuple  # tracked positions after the moves, 0-based
    state: ClumpState  # state after the moves


def strategy_step(s: ClumpState, tau: float, round_idx: int, tracked: Sequence[int] | None = None) -> StrategyStep:
    """One round of the halving strategy.

    ``tracked`` holds the positions of the tracked subsequence (all positions at
    round 0); every untracked entry must exceed ``tau - round_idx + 1``.
    """
    tracked = tuple(range(s.k)) if tracked is None else tuple(tracked)
    if s.done:
        return StrategyStep((), (), tracked, s)
    thr = tau - round_idx
    if thr < 0:
        raise StrategyError(f"threshold exhausted at round {round_idx} with {s.k} entries left")
    w = s.w
    u = [w[t] for t in tracked]
    parts = separated_partition(u, thr)
    spans = [[tracked[a], tracked[b]] for a, b in parts]
    keep = [tracked[a + min(range(b - a + 1), key=lambda r: u[a + r])] for a, b in parts]

    first = []
    for lo, hi in spans:
        t = lo + 1
        while t < hi:
            if w[t] > thr:
                r = t
                while w[t] > thr:
                    t += 1
                first.append((r, t + 1))  # 0-based [r-1, t] in 1-based form
            t += 1
    moves, cur = [], s
    for intervals in (first, None):
        if intervals is None:
            intervals = [(lo + 1, hi + 1) for lo, hi in spans if lo < hi]
        if not intervals:
            continue
        m = Move(tuple(intervals))
        cur, where, _ = apply_move_map(cur, m)
        moves.append(m)
        spans = [[where[lo], where[hi]] for lo, hi in spans]
        keep = [where[t] for t in keep]
    return StrategyStep(tuple(moves), tuple(parts), tuple(keep), cur)


@dataclass(frozen=True)
class Turn:
    state: ClumpState
    move: Move
    result: ClumpState
    round: int
    phi: float
    certificate: tuple

    @property
    def legal(self) -> bool:
        return all(c is not None for c in self.certificate)


@dataclass
class Transcript:
    initial: ClumpState
    tau: float
    turns: list = field(default_factory=list)
    partition_sizes: list = field(default_factory=list)  # (ground size, partition size) per round

    @property
    def final(self) -> ClumpState:
        return self.turns[-1].result if self.turns else self.initial

    @property
    def n_moves(self) -> int:
        return len(self.turns)

    @property
    def violations(self) -> int:
        return sum(not t.legal for t in self.turns)

    def states(self):
        yield self.initial
        for t in self.turns:
            yield t.result

    def moves(self) -> list[Move]:
        return [t.move for t in self.turns]

    def as_dict(self) -> dict:
        return {
            "initial": list(self.initial.w),
            "tau": self.tau,
            "moves": [
                {
                    "round": t.round,
                    "state": list(t.state.w),
                    "intervals": t.move.as_list(),
                    "result": list(t.result.w),
                    "phi": t.phi,
                    "certificate": list(t.certificate),
                    "legal": t.legal,
                }
                for t in self.turns
            ],
            "final": list(self.final.w),
            "n_moves": self.n_moves,
            "violations": self.violations,
        }


def zero_entry_ok(s: ClumpState) -> bool:
    """A state with exactly one zero entry must be the terminal one."""
    return sum(x == 0 for x in s.w) != 1 or s.k == 1


def _as_state(w) -> ClumpState:
    return w if isinstance(w, ClumpState) else ClumpState(tuple(w))


def plan(w, tau: float | None = None) -> tuple[list, list]:
    """Moves of the halving strategy as ``(round, Move)`` pairs, plus partition sizes."""
    s = _as_state(w)
    tau = default_tau(s.k) if tau is None else tau
    out, sizes, tracked, r = [], [], None, 0
    while not s.done:
        ground = s.k if tracked is None else len(tracked)
        step = strategy_step(s, tau, r, tracked)
        sizes.append((ground, len(step.partition)))
        out.extend((r, m) for m in step.moves)
        s, tracked, r = step.state, step.tracked, r + 1
    return out, sizes


def play_noiseless(w, tau: float | None = None) -> Transcript:
    s = _as_state(w)
    tau = default_tau(s.k) if tau is None else tau
    moves, sizes = plan(s, tau)
    tr = Transcript(s, tau, partition_sizes=sizes)
    for r, m in moves:
        cert = tuple(certify(s, m, tau, 1.0))
        nxt = apply_move_map(s, m)[0]
        tr.turns.append(Turn(s, m, nxt, r, 1.0, cert))
        s = nxt
    return tr


# -- noisy game -------------------------------------------------------------------------

def perturb(s: ClumpState, p, delta: float, tol: float = 1e-12) -> ClumpState:
    """Replace ``w`` by ``p`` after checking ``p <= w`` and ``p >= w - delta`` where ``w > 1``."""
    p = np.asarray(p, dtype=float)
    w = s.as_array()
    if p.shape != w.shape:
        raise InvalidPerturbation("perturbation has the wrong length")
    if np.any(p > w + tol):
        raise InvalidPerturbation("a perturbation may not increase entries")
    if np.any((w > 1) & (p < w - delta - tol)):
        raise InvalidPerturbation(f"an entry above 1 dropped by more than {delta}")
    if np.any(p < 0):
        raise InvalidPerturbation("entries must stay non-negative")
    return ClumpState(tuple(np.minimum(p, w)))


Adversary = Callable[[ClumpState, float], np.ndarray]


def null_adversary(s: ClumpState, delta: float) -> np.ndarray:
    return s.as_array()


def worst_case_adversary(s: ClumpState, delta: float) -> np.ndarray:
    return np.maximum(s.as_array() - delta, 0.0)


class RandomAdversary:
    """Uniform draws from the allowed box ``[w - delta, w]`` (``[0, w]`` where ``w <= 1``)."""

    def __init__(self, seed: int | None = None):
        self.rng = np.random.default_rng(seed)

    def __call__(self, s: ClumpState, delta: float) -> np.ndarray:
        w = s.as_array()
        lo = np.where(w > 1, w - delta, 0.0)
        return self.rng.uniform(lo, w)


def play_noisy(w, tau: float | None = None, adversary: Adversary = null_adversary,
               delta: float | None = None, phi: float = NOISY_PHI) -> Transcript:
    """Replay the noiseless strategy against adversarially perturbed states.

    Legality of each move is certified at ``phi`` against the perturbed state
    actually on the board; violations are recorded, not raised.
    """
    s = _as_state(w)
    tau = default_tau(s.k) if tau is None else tau
    delta = 1.0 / (100 * s.k) if delta is None else delta
    moves, sizes = plan(s, tau)
    tr = Transcript(s, tau, partition_sizes=sizes)
    for r, m in moves:
        cert = tuple(certify(s, m, tau, phi))
        moved = apply_move_map(s, m)[0]
        nxt = perturb(moved, adversary(moved, delta), delta)
        tr.turns.append(Turn(s, m, nxt, r, phi, cert))
        s = nxt
    return tr


GAME_FAMILIES = ("uniform", "ruler", "plateau")


def random_game_vector(rng: np.random.Generator, k: int, family: str = "uniform",
                       high: float | None = None) -> ClumpState:
    """Random start vector of length ``k`` with entries in ``[0, high]``.

    ``ruler`` stacks dyadic levels (the hierarchy that forces the most rounds)
    with jitter; ``plateau`` draws integer levels so ties and exact margins occur.
    """
    if k < 2:
        return ClumpState((0.0,) * max(k, 1))
    high = default_tau(k) + 2 if high is None else high
    n = k - 2
    if family == "uniform":
        inner = rng.uniform(0, high, n)
    elif family == "ruler":
        i = np.arange(1, n + 1)
        depth = np.log2(i & -i)
        step = high / max(math.log2(k), 1)
        inner = np.clip(depth * step + rng.uniform(-0.5, 0.5, n) * step, 0, high)
    elif family == "plateau":
        inner = rng.integers(0, int(high) + 1, n).astype(float)
    else:
        raise ValueError(f"unknown family {family!r}")
    return ClumpState((0.0, *inner.tolist(), 0.0))


# -- bridge from projections -----------------------------------------------------------

@dataclass(frozen=True)
class ProjectionGame:
    state: ClumpState
    tau: float
    order: np.ndarray  # neuron index behind each point, in projection order


def from_projection(proj: Projection, p: ScaleParams) -> ProjectionGame:
    """Game vector of length ``k + 1``: zeros at both ends, gap levels in between."""
    inner = [gap_level(float(b - a), p) for a, b in zip(proj.v[:-1], proj.v[1:])]
    return ProjectionGame(ClumpState((0.0, *inner, 0.0)), level(p.gamma_floor, p), proj.order.copy())


def block_points(m: Move) -> list[range]:
    """0-based point ranks swallowed by each block of ``m``: block ``[i, j]`` covers ranks ``i-1 .. j-2``."""
    return [range(i - 1, j - 1) for i, j in m.blocks()]


__all__ = [
    "ClumpState", "GAME_FAMILIES", "IllegalMove", "InvalidPerturbation", "MAX_LEVEL", "Move", "ProjectionGame",
    "RandomAdversary", "StrategyError", "StrategyStep", "Transcript", "Turn", "apply_move",
    "apply_move_map", "block_points", "certify", "default_tau", "from_projection", "interval_kind",
    "is_legal", "move_budget", "null_adversary", "perturb", "play_noiseless", "play_noisy", "plan", "random_game_vector",
    "separated_partition", "strategy_step", "worst_case_adversary", "zero_entry_ok",
]
