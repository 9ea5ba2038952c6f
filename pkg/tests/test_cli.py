import json
import math
import subprocess
import sys

import numpy as np
import pytest

from stlpi2 import io
from stlpi2.cli import OUTPUT_ENV, RunConfig, main
from stlpi2.scenarios import analytic_optimum, shortest_path_length, simple_scenario
from stlpi2.stl import parse_formula, robustness

FAST = {"overrides": {"dt": 0.1}, "pi2": {"N": 6, "K": 2}}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "fast.json"
    path.write_text(json.dumps(FAST))
    return str(path)


RUN = ["--scenario", "simple", "--robot", "integrator", "--theta", "0.25", "--noise", "0", "--seed", "7",
       "--adapt", "on", "--combiner", "improved"]


def test_run_writes_schema(tmp_path, config, capsys):
    out = tmp_path / "r"
    assert main(["run", "--config", config, *RUN, "--output", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert math.isfinite(summary["C"]) and math.isfinite(summary["rho"]) and summary["seed"] == 7
    assert summary["config"]["theta"] == 0.25 and summary["config"]["pi2"] == {"N": 6, "K": 2}
    hist = io.read_history(out / "history.csv")
    assert tuple(hist) == io.HISTORY_COLUMNS and len(hist["k"]) == 2
    funnels = io.read_funnels(out / "funnels_k2.csv")
    assert list(funnels) == ["mu1", "mu2"]
    printed = json.loads(capsys.readouterr().out)
    assert printed["J"] == summary["J"]


def test_summary_rho_matches_reevaluation(tmp_path, config):
    out = tmp_path / "r"
    assert main(["run", "--config", config, *RUN, "--output", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    tr = io.read_trajectory(out / "solution_trajectory.csv", dt=summary["dt"])
    sc = simple_scenario(0.25, dt=0.1)
    rho = robustness(parse_formula(summary["formula"]), sc.registry, tr)
    assert rho == pytest.approx(summary["rho"], abs=1e-9)


def test_identical_runs_are_byte_identical(tmp_path, config):
    for name in ("a", "b"):
        assert main(["run", "--config", config, *RUN, "--noise", "0.04", "--output", str(tmp_path / name)]) == 0
    for f in ("history.csv", "solution_trajectory.csv", "funnels_k2.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sweep_aggregates_seeds(tmp_path, config):
    out = tmp_path / "s"
    assert main(["sweep", "--config", config, "--thetas", "0.25", "--seeds", "3", "--output", str(out)]) == 0
    header, data = io.read_table(out / "sweep.csv")
    assert header == ["theta", "runs", "p10", "median", "p90", "optimum"]
    assert data.shape == (1, 6) and data[0, 1] == 3
    assert data[0, 2] <= data[0, 3] <= data[0, 4]
    assert data[0, 5] == pytest.approx(4.37, abs=0.02)
    assert data[0, 5] == analytic_optimum(0.25, shortest_path_length(), 10.0)[1]
    J = [json.loads((out / "theta0.25" / f"seed{s}" / "summary.json").read_text())["J"] for s in range(3)]
    assert data[0, 3] == pytest.approx(np.median(J))


def test_parallel_sweep_matches_serial(tmp_path, config):
    args = ["sweep", "--config", config, "--thetas", "0.25", "0.6", "--seeds", "2"]
    assert main([*args, "--output", str(tmp_path / "a")]) == 0
    assert main([*args, "--jobs", "2", "--output", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_output_root_from_environment(tmp_path, config, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--config", config, *RUN]) == 0
    assert (tmp_path / "env" / "summary.json").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"pi2": {"bogus": 1}}))
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_unwritable_output_exits_3(tmp_path, config):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--config", config, *RUN, "--output", str(blocker / "sub")]) == 3


def test_check_passes_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["check", "--cases", "60", "--seed", "3", "--report", str(a)]) == 0
    assert main(["check", "--cases", "60", "--seed", "3", "--report", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert report["passed"] and set(report["suites"]) == {"stl", "controllers", "pi2", "adaptation"}


def test_check_single_suite_case_set_is_independent_of_selection(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["check", "--suite", "stl", "--cases", "50", "--seed", "3", "--report", str(a)]) == 0
    assert main(["check", "--suite", "pi2", "--suite", "stl", "--cases", "50", "--seed", "3", "--report", str(b)]) == 0
    assert json.loads(a.read_text())["suites"]["stl"] == json.loads(b.read_text())["suites"]["stl"]


def test_injected_weight_fault_is_caught(tmp_path, capsys):
    code = main(["check", "--suite", "pi2", "--cases", "50", "--inject-fault", "weight-sign",
                 "--report", str(tmp_path / "r.json")])
    assert code != 0
    assert "weight_ordering" in capsys.readouterr().err
    assert "weight_ordering" in json.loads((tmp_path / "r.json").read_text())["failed"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stlpi2", "check", "--suite", "controllers", "--cases", "20"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["passed"]


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(seeds=0)
    with pytest.raises(ValueError):
        RunConfig(scenario="maze")
