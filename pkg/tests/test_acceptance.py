"""Acceptance criteria at full-profile sizes.

Each criterion runs its suite once, checks the verdict and the wall-clock
budget, and prints a ``PASS``/``FAIL`` line.  Run standalone with
``python tests/test_acceptance.py`` for just the summary lines, or deselect
with ``pytest -m "not acceptance"``.
"""
import sys
import time

import pytest

from relulearn.harness import SUITES, SuiteContext, _result_bytes, _run_one, suite_determinism

PROFILE, SEED = "full", 0

BUDGET_S = {
    "hermite": 5,
    "moments": 120,
    "powersum": 30,
    "vandermonde": 10,
    "clumping": 120,
    "scales": 60,
    "case2a": 600,
    "end_to_end": 1200,
    "noise": 600,
}

_cache: dict = {}


def run_criterion(name: str):
    if name not in _cache:
        t0 = time.perf_counter()
        res, traces = _run_one(SUITES[name], SuiteContext(PROFILE, SEED))
        _cache[name] = res, traces, time.perf_counter() - t0
    return _cache[name]


def verdict_line(criterion: int, name: str, ok: bool, seconds: float, detail: str = "") -> str:
    return f"{'PASS' if ok else 'FAIL'} criterion {criterion:2d} {name:<12s} {seconds:7.1f}s {detail}".rstrip()


def _say(capsys, line: str) -> None:
    with capsys.disabled():
        print("\n" + line)


pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("name", list(BUDGET_S))
def test_criterion(name, capsys):
    res, _, seconds = run_criterion(name)
    in_budget = seconds < BUDGET_S[name]
    ok = res.passed and in_budget
    detail = res.notes or ("" if in_budget else f"over {BUDGET_S[name]}s budget")
    _say(capsys, verdict_line(res.criterion, name, ok, seconds, detail))
    assert res.passed, (res.notes, res.measured)
    assert in_budget, f"{name} took {seconds:.1f}s"


def test_criterion_determinism(capsys):
    """Byte-identical reruns: full-profile results of the cheap suites, plus every suite at ci."""
    t0 = time.perf_counter()
    same = {}
    for name in ("hermite", "moments", "powersum", "vandermonde", "clumping", "scales"):
        first = run_criterion(name)[:2]
        second = _run_one(SUITES[name], SuiteContext(PROFILE, SEED))
        same[f"{name}@full"] = _result_bytes(first) == _result_bytes(second)
    ci = suite_determinism(SuiteContext("ci", SEED))
    same.update({f"{k}@ci": v for k, v in ci.measured["byte_identical"].items()})
    ok = all(same.values())
    differing = ", ".join(k for k, v in same.items() if not v)
    _say(capsys, verdict_line(10, "determinism", ok, time.perf_counter() - t0, differing))
    assert ok, differing


def main() -> int:
    ok = True
    for name in BUDGET_S:
        res, _, seconds = run_criterion(name)
        good = res.passed and seconds < BUDGET_S[name]
        ok &= good
        print(verdict_line(res.criterion, name, good, seconds, res.notes), flush=True)
    t0 = time.perf_counter()
    det = suite_determinism(SuiteContext("ci", SEED))
    print(verdict_line(10, "determinism", det.passed, time.perf_counter() - t0), flush=True)
    return 0 if ok and det.passed else 1


if __name__ == "__main__":
    sys.exit(main())
