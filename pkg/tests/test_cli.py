import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import hawkes_nsk.cli as cli
from hawkes_nsk import NumericFailure, loglik, reference_model, read_events, simulate_hawkes
from hawkes_nsk.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, build_parser, main

BASE = "bspline(degree=2,knots=[],coef=[5,1.25,2.5])"
GPD = "gpd(0.5,0.25,0.75)"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def events_csv(tmp_path, capsys):
    path = tmp_path / "events.csv"
    code, out, _ = run(["simulate", "--baseline", BASE, "--kernel", GPD, "--n", 60, "--seed", 1, "--out", path],
                       capsys)
    assert code == EXIT_OK
    return path, json.loads(out)


# --- simulate ----------------------------------------------------------------

def test_simulate_writes_csv_and_echoes_config(events_csv):
    path, meta = events_csv
    ev = simulate_hawkes(reference_model(1), 60.0, 1)
    lines = path.read_text().splitlines()
    assert len(lines) == ev.count == meta["count"]
    np.testing.assert_array_equal([float(v) for v in lines], ev.times)     # 17 digits round-trip exactly
    assert meta["seed"] == 1 and meta["n"] == 60.0 and meta["format"] == "csv" and "version" in meta


def test_simulate_is_reproducible_byte_for_byte(tmp_path, capsys):
    for name in ("a.json", "b.json"):
        assert run(["simulate", "--reference-model", 2, "--n", 40, "--seed", 7, "--out", tmp_path / name], capsys)[0] == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["n"] == 40.0 and doc["seed"] == 7


def test_simulate_to_stdout(capsys):
    code, out, _ = run(["simulate", "--reference-model", 3, "--n", 10, "--seed", 2], capsys)
    assert code == 0
    np.testing.assert_array_equal([float(v) for v in out.split()], simulate_hawkes(reference_model(3), 10.0, 2).times)


# --- eval / fit --------------------------------------------------------------

def test_eval_matches_library(events_csv, capsys):
    path, _ = events_csv
    code, out, _ = run(["eval", "--events", path, "--n", 60, "--baseline", BASE, "--kernel", GPD,
                        "--information", "--residuals"], capsys)
    assert code == 0
    doc = json.loads(out)
    ev = read_events(path, 60.0)
    assert doc["loglik"] == loglik(reference_model(1), ev)
    assert len(doc["residuals"]) == ev.count and np.array(doc["information"]).shape == (6, 6)
    assert doc["config"]["kernel_horizon_eps"] == 0.0


def test_fit_round_trip_and_determinism(events_csv, tmp_path, capsys):
    path, _ = events_csv
    argv = ["fit", "--events", path, "--n", 60, "--baseline", BASE, "--kernel", "gpd", "--seed", 1, "--starts", 2]
    assert run(argv + ["--out", tmp_path / "f1.json"], capsys)[0] == 0
    assert run(argv + ["--out", tmp_path / "f2.json"], capsys)[0] == 0
    assert (tmp_path / "f1.json").read_bytes() == (tmp_path / "f2.json").read_bytes()
    doc = json.loads((tmp_path / "f1.json").read_text())
    assert doc["param_names"] == reference_model(1).param_names and len(doc["theta_hat"]) == 6
    assert doc["config"]["options"]["starts"] == 2 and doc["config"]["fix"] == {}


def test_fit_with_fix_and_strict(events_csv, capsys):
    path, _ = events_csv
    base = ["fit", "--events", path, "--n", 60, "--baseline", BASE, "--kernel", "gpd", "--starts", 1]
    code, out, _ = run(base + ["--fix", "alpha=0.25"], capsys)
    assert code == 0 and json.loads(out)["theta_hat"][4] == 0.25
    code, out, _ = run(base + ["--max-iter", 1, "--strict"], capsys)
    assert code == EXIT_NUMERIC and json.loads(out)["converged"] is False


# --- exit codes --------------------------------------------------------------

def test_usage_errors(capsys, tmp_path):
    assert run([], capsys)[0] == EXIT_USAGE
    assert run(["simulate", "--reference-model", 1, "--n", 10], capsys)[0] == EXIT_USAGE          # missing --seed
    assert run(["simulate", "--reference-model", 1, "--n", 10, "--seed", 1, "--bogus"], capsys)[0] == EXIT_USAGE
    assert run(["simulate", "--kernel", GPD, "--n", 10, "--seed", 1], capsys)[0] == EXIT_USAGE
    code, _, err = run(["simulate", "--baseline", BASE, "--kernel", "gpd(1.5,0.25,0.75)", "--n", 10, "--seed", 1],
                       capsys)
    assert code == EXIT_USAGE and "invalid" in err
    assert run(["simulate", "--reference-model", 1, "--n", -1, "--seed", 1], capsys)[0] == EXIT_USAGE
    assert run(["fit", "--events", tmp_path / "x.csv", "--n", 5, "--reference-model", 1, "--fix", "eta"],
               capsys)[0] in (EXIT_USAGE, EXIT_DATA)


def test_data_errors(tmp_path, capsys):
    assert run(["eval", "--events", tmp_path / "missing.csv", "--n", 10, "--reference-model", 1], capsys)[0] == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1\nhello\n")
    code, _, err = run(["eval", "--events", bad, "--n", 10, "--reference-model", 1], capsys)
    assert code == EXIT_DATA and "bad.csv:2" in err
    good = tmp_path / "good.csv"
    good.write_text("0.1\n0.5\n")
    assert run(["eval", "--events", good, "--reference-model", 1], capsys)[0] == EXIT_DATA                # n unknown
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert run(["study", "--config", cfg, "--out", tmp_path / "o"], capsys)[0] == EXIT_DATA


def test_numeric_failure_prints_diagnostic(events_csv, monkeypatch, capsys):
    path, _ = events_csv

    def boom(*a, **k):
        raise NumericFailure("quadrature did not converge", achieved=3.5e-7)

    monkeypatch.setattr(cli, "fit_mle", boom)
    code, out, err = run(["fit", "--events", path, "--n", 60, "--reference-model", 1], capsys)
    assert code == EXIT_NUMERIC
    doc = json.loads(out)
    assert doc["error"] == "NumericFailure" and doc["achieved"] == 3.5e-7 and "numeric failure" in err


# --- help --------------------------------------------------------------------

@pytest.mark.parametrize("command", ["simulate", "eval", "fit", "study", "ergodic-check"])
def test_help_documents_every_flag(command):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command").choices[command]
    text = sub.format_help()
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in text
        if action.option_strings and action.dest != "help":
            assert action.help, f"{command} {action.option_strings} has no help text"


# --- study / ergodic-check ---------------------------------------------------

def _study_config(tmp_path):
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({"model": 2, "n_list": [30], "replicates": 4, "master_seed": 3,
                               "fit": {"starts": 1}, "max_fail_fraction": 1.0}))
    return cfg


def _files(d: Path):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_study_outputs_independent_of_threads(tmp_path, capsys, monkeypatch):
    cfg = _study_config(tmp_path)
    out = tmp_path / "s"
    code, stdout, _ = run(["study", "--config", cfg, "--out", out, "--threads", 1], capsys)
    assert code == 0 and json.loads(stdout)["threads"] == 1
    first = _files(out)
    assert {"report.csv", "estimates_30.csv", "summary.json", "config.json"} <= first.keys()
    monkeypatch.setenv("HAWKES_NSK_THREADS", "3")
    code, stdout, _ = run(["study", "--config", cfg, "--out", out, "--force"], capsys)
    assert code == 0 and json.loads(stdout)["threads"] == 3
    assert _files(out) == first


def test_study_never_overwrites_without_force(tmp_path, capsys):
    cfg = _study_config(tmp_path)
    out = tmp_path / "s"
    out.mkdir()
    (out / "keep.txt").write_text("mine")
    code, _, err = run(["study", "--config", cfg, "--out", out, "--threads", 1], capsys)
    assert code == EXIT_USAGE and "--force" in err
    assert _files(out) == {"keep.txt": b"mine"}
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".")] == []     # staging removed
    assert run(["study", "--config", cfg, "--out", out, "--threads", 1, "--force"], capsys)[0] == 0
    assert "keep.txt" not in _files(out) and "report.csv" in _files(out)


def test_ergodic_check(tmp_path, capsys):
    out = tmp_path / "erg"
    code, stdout, _ = run(["ergodic-check", "--model", 2, "--n", "20,40", "--reps", 4, "--seed", 1,
                           "--out", out, "--threads", 1], capsys)
    assert code == 0
    assert json.loads(stdout)["pi"] == pytest.approx(35 / 6)
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0].startswith("n,replicates,mean_average,mean_abs_dev") and len(lines) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["reps"] == 4 and len(summary["rows"]) == 2
    assert run(["ergodic-check", "--model", 2, "--n", "20,x", "--out", tmp_path / "e2"], capsys)[0] == EXIT_USAGE


# --- entry points ------------------------------------------------------------

def test_module_entry_point(tmp_path):
    env = {**os.environ, "HAWKES_NSK_THREADS": "1"}
    res = subprocess.run([sys.executable, "-m", "hawkes_nsk", "--version"], capture_output=True, text=True, env=env)
    assert res.returncode == 0 and res.stdout.strip()
    res = subprocess.run([sys.executable, "-m", "hawkes_nsk", "simulate", "--reference-model", "1", "--n", "5"],
                         capture_output=True, text=True, env=env)
    assert res.returncode == EXIT_USAGE and "--seed" in res.stderr
