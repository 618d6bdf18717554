import json
import math
import os
import subprocess

import pytest

CLI = os.environ["SHAREDCTL_CLI"]
FIX = os.environ["SHAREDCTL_FIXTURES"]


def run(*args, check=None):
    p = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, timeout=300)
    if check is not None:
        assert p.returncode == check, p.stderr
    return p


def fields(line):
    return dict(kv.split("=", 1) for kv in line.split())


def two_stage(*rest):
    return ["--model", f"{FIX}/two_stage.json", "--template", "reach_avoid::target", *rest]


def test_synth_repairs_uniform_human():
    out = fields(run("synth", *two_stage("--beta", 0.3), check=0).stdout.splitlines()[0])
    want = (math.sqrt(0.3) - 0.5) / 0.2
    assert out["method"] == "qcp"
    assert abs(float(out["delta_hat"]) - want) <= 1e-4
    assert float(out["probability"]) >= 0.3


def test_methods_and_engines(tmp_path):
    greedy = fields(run("synth", *two_stage("--beta", 0.3, "--method", "greedy"), check=0).stdout)
    assert float(greedy["delta_hat"]) == pytest.approx(0.25, abs=1e-9)
    lp = fields(run("synth", *two_stage("--beta", 0.3, "--engine", "lp"), check=0).stdout.splitlines()[0])
    assert lp["engine"] == "lp"
    assert abs(float(lp["delta_hat"]) - 0.238647) <= 1e-4
    occ = fields(run("synth", *two_stage("--beta", 0.3, "--method", "occ-inf"), check=0).stdout.splitlines()[0])
    assert float(occ["probability"]) >= 0.3 - 1e-6


def test_infeasible_threshold_exit_code():
    p = run("synth", *two_stage("--beta", 0.5), check=3)
    assert "infeasible max=0.360000" in p.stdout


def test_result_file_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("synth", *two_stage("--beta", 0.3, "--out", a), check=0)
    run("synth", *two_stage("--beta", 0.3, "--out", b), check=0)
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["method"] == "qcp"
    assert "timings" not in doc


def test_model_checking():
    p = run("mc", *two_stage("--strategy", f"{FIX}/two_stage_sigma1.json", "--mode", "lower", "--beta", 0.3), check=0)
    assert p.stdout.split() == ["PASS", "0.360000"]
    p = run("mc", *two_stage("--strategy", f"{FIX}/two_stage_sigma1.json", "--mode", "lower", "--beta", 0.4), check=1)
    assert p.stdout.split() == ["FAIL", "0.360000"]
    p = run("mc", *two_stage("--strategy", f"{FIX}/two_stage_safe.json", "--mode", "upper", "--beta", 0.21), check=0)
    assert p.stdout.split() == ["PASS", "0.160000"]


def test_bound():
    assert run("bound", 0.01, 0.99, check=0).stdout.strip() == "26492"
    assert run("bound", "--gamma", 0.5, "--confidence", 0.5, check=0).stdout.strip() == "3"
    run("bound", 0, 0.5, check=2)


def test_gridworld_counts(tmp_path):
    out = run("gridworld", "--size", 4, "--obstacle-region", 2, "--deterministic-agent",
              "--out", tmp_path / "g.json", check=0).stdout
    assert fields(out) == {"states": "64", "transitions": "1024"}
    model = json.loads((tmp_path / "g.json").read_text())
    assert len(model["states"]) == 64


def test_demos_and_irl(tmp_path):
    scen = tmp_path / "s.json"
    run("gridworld", "--size", 4, "--obstacle-region", 2, "--scenario-out", scen, "--out", tmp_path / "g.json", check=0)
    demos = tmp_path / "d.json"
    run("demos", "--scenario", scen, "--episodes", 50, "--length", 6, "--seed", 3, "--out", demos, check=0)
    assert len(json.loads(demos.read_text())["episodes"]) == 50
    human = tmp_path / "h.json"
    run("irl", "--scenario", scen, "--demos", demos, "--features", "grid", "--out", human, check=0)
    strategy = json.loads(human.read_text())
    assert len(strategy) == 64
    for row in strategy.values():
        assert sum(row.values()) == pytest.approx(1.0)


def test_errors_exit_two(tmp_path):
    run("synth", "--model", tmp_path / "missing.json", "--beta", 0.3, check=2)
    run("synth", *two_stage("--beta", 0.3, "--method", "magic"), check=2)
    run("synth", *two_stage(), check=2)
    run("--bogus", check=2)
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    run("synth", "--model", bad, "--beta", 0.3, check=2)
    run("synth", *two_stage("--beta", 1.5), check=2)


def test_unsatisfiable_constraints_exit_code():
    p = run("synth", *two_stage("--beta", 0.1, "--reach", "target:0.5", "--cost", "target:0.5"), check=3)
    assert p.stdout.strip() == "infeasible constraints"
