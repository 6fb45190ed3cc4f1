import csv
import io
import json
from dataclasses import replace

import pytest

from relulearn import harness
from relulearn.harness import (SCHEMA_VERSION, SUITES, ConfigError, ExperimentConfig, InstanceSpec, Report,
                               SchemaVersionError, SuiteContext, SuiteResult, default_config, emit_report,
                               parse_config, read_report, run_experiment)

CHEAP = ("hermite", "powersum", "clumping", "scales")

STAGED = """
[experiment]
seed = 3
suites = hermite, scales
profile = ci

[instance]
kind = line_multiscale
k = 3
d = 4
R = 2.0
ladder = 0.3, 1e-15

[scale]
eps_prime = 0.01
gamma_floor = 1.5e-13

[learner]
branch_mode = beam
n_samples = 5000
"""


def test_parse_full_config():
    cfg = parse_config(STAGED)
    assert cfg.seed == 3 and cfg.suites == ("hermite", "scales")
    assert cfg.instance.kind == "line_multiscale" and cfg.instance.ladder == (0.3, 1e-15)
    assert cfg.instance.R == 2.0
    assert cfg.learner.branch_mode == "beam" and cfg.learner.n_samples == 5000
    assert cfg.learner.scale.eps_prime == 0.01 and cfg.learner.scale.gamma_floor == 1.5e-13
    assert cfg.learner.seed == 3


def test_cli_overrides_win():
    cfg = parse_config(STAGED, seed=11, profile="full")
    assert cfg.seed == 11 and cfg.profile == "full" and cfg.learner.seed == 11


def test_empty_config_defaults():
    cfg = parse_config("")
    assert cfg == default_config()
    assert cfg.suites == ()


@pytest.mark.parametrize("text, fragment", [
    ("[bogus]\nx = 1\n", "unknown section"),
    ("[instance]\nwidth = 3\n", "width"),
    ("[scale]\nd = 5\n", "derived key .d."),
    ("[experiment]\nsuites = hermite, nope\n", "unknown suites"),
    ("[experiment]\nprofile = huge\n", "profile"),
    ("[instance]\nk = two\n", "two"),
    ("[learner]\nbranch_mode = guess\n", "branch_mode"),
    ("not an ini file", "header"),
])
def test_bad_configs(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_seed_must_be_int():
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=1.5)


def test_empty_suites_report_is_config_echo():
    cfg = default_config(seed=4)
    r = run_experiment(cfg)
    assert r.results == [] and r.traces == [] and r.passed
    d = json.loads(emit_report(r))
    assert d["schema_version"] == SCHEMA_VERSION
    assert d["config"]["seed"] == 4 and d["config"]["suites"] == []
    assert d["config"]["instance"]["kind"] == "well_separated"
    assert "noise_floor_z" in d["constants"]


def test_reports_are_byte_identical():
    cfg = default_config(CHEAP, seed=2)
    a = emit_report(run_experiment(cfg))
    b = emit_report(run_experiment(cfg))
    assert a == b
    assert b"seconds" not in a and b"time" not in a


def test_seed_changes_measurements():
    a = json.loads(emit_report(run_experiment(default_config(("powersum",), seed=0))))
    b = json.loads(emit_report(run_experiment(default_config(("powersum",), seed=1))))
    assert a["results"][0]["measured"] != b["results"][0]["measured"]


def test_json_round_trip():
    r = run_experiment(default_config(CHEAP))
    back = read_report(emit_report(r))
    assert emit_report(back) == emit_report(r)
    assert back.passed == r.passed


def test_csv_one_row_per_criterion():
    r = run_experiment(default_config(("scales", "hermite", "clumping")))
    rows = list(csv.reader(io.StringIO(emit_report(r, "csv_summary").decode())))
    assert rows[0][:3] == ["criterion", "suite", "passed"]
    assert [row[0] for row in rows[1:]] == ["1", "5", "6"]
    assert all(row[2] in ("PASS", "FAIL") for row in rows[1:])


def test_unknown_format():
    with pytest.raises(ValueError):
        emit_report(run_experiment(default_config()), "xml")


def test_schema_mismatch():
    d = json.loads(emit_report(run_experiment(default_config())))
    d["schema_version"] = "0"
    with pytest.raises(SchemaVersionError):
        read_report(json.dumps(d))


def test_suite_errors_are_recorded():
    boom = harness.Suite("hermite", 1, "x", lambda ctx: 1 / 0)
    res, tr = harness._run_one(boom, SuiteContext("ci", 0))
    assert not res.passed and "ZeroDivisionError" in res.notes and tr == []


def test_report_passed_flag():
    ok = SuiteResult("a", 1, True, {}, {})
    bad = SuiteResult("b", 2, False, {}, {})
    assert Report(SCHEMA_VERSION, {}, {}, [ok]).passed
    assert not Report(SCHEMA_VERSION, {}, {}, [ok, bad]).passed


def test_context_streams_are_independent():
    ctx = SuiteContext("ci", 0)
    assert ctx.rng(3).random() == SuiteContext("ci", 0).rng(3).random()
    assert ctx.rng(3).random() != ctx.rng(4).random()
    assert ctx.rng(3, 1).random() != ctx.rng(3, 0).random()
    assert ctx.pick(1, 2) == 1 and replace(ctx, profile="full").pick(1, 2) == 2


def test_registry_covers_criteria():
    assert sorted(s.criterion for s in SUITES.values()) == list(range(1, 11))


def test_learn_trace_small_instance():
    inst = InstanceSpec(kind="well_separated", k=1, d=3, R=1.0, seed=0)
    cfg = ExperimentConfig(inst)
    cfg = replace(cfg, learner=replace(cfg.learner, n_samples=200_000, n_validation=20_000))
    r = run_experiment(cfg, learn=True)
    t = r.traces[-1]
    assert t["suite"] == "learn" and t["complete"]
    assert t["l2_sq_to_truth"] < 0.05
