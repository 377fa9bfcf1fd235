import csv
import json
import math

import pytest

from ptwalker import cli


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv("PTW_SEED", raising=False)


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_diffusion_closed_form(tmp_path):
    assert run(tmp_path, "diffusion", "--alpha", "1") == 0
    rep = json.loads((tmp_path / "diffusion.json").read_text())
    assert rep["method"] == "closed-form" and rep["D"] == pytest.approx(math.e - 1, rel=1e-12)
    assert set(rep) == {"alpha", "method", "D", "error_bound"}


def test_diffusion_quadrature_agrees(tmp_path):
    assert run(tmp_path, "diffusion", "--alpha", "0.7", "--method", "quadrature") == 0
    q = json.loads((tmp_path / "diffusion.json").read_text())
    assert run(tmp_path, "diffusion", "--alpha", "0.7") == 0
    c = json.loads((tmp_path / "diffusion.json").read_text())
    assert abs(q["D"] - c["D"]) <= q["error_bound"] + c["error_bound"]


def test_poisson_small_grid(tmp_path):
    assert run(tmp_path, "poisson", "--alpha", "1", "--f", "minus-kappa", "--grid", "16x65") == 0
    rep = json.loads((tmp_path / "poisson.json").read_text())
    assert rep["V_f"] == pytest.approx(2.0, rel=1e-6)
    with open(tmp_path / "g.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta", "kappa", "g"] and len(rows) == 1 + 16 * 65


def test_missing_alpha_reports_usage(tmp_path, capsys):
    assert run(tmp_path, "diffusion") == 2
    err = capsys.readouterr().err
    assert "usage" in err and "alpha is required" in err


@pytest.mark.parametrize("argv", [
    ["simulate", "--preset", "nope"],
    ["simulate", "--alpha", "-1"],
    ["diffusion", "--alpha", "1", "--threads", "0"],
    ["poisson", "--alpha", "1", "--grid", "7x8"],
])
def test_configuration_errors_exit_2(tmp_path, argv):
    assert run(tmp_path, *argv) == 2


def test_unreadable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "diffusion", "--config", str(bad)) == 2
    bad.write_text("[1, 2]")
    assert run(tmp_path, "diffusion", "--config", str(bad)) == 2


def _seed(tmp_path):
    return json.loads((tmp_path / "run.json").read_text())["seed"]


def test_seed_precedence(tmp_path, monkeypatch):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"alpha": 1.0, "seed": 11}))
    assert run(tmp_path, "diffusion", "--config", str(conf)) == 0
    assert _seed(tmp_path) == 11
    monkeypatch.setenv("PTW_SEED", "22")
    assert run(tmp_path, "diffusion", "--config", str(conf)) == 0
    assert _seed(tmp_path) == 22
    assert run(tmp_path, "diffusion", "--config", str(conf), "--seed", "33") == 0
    assert _seed(tmp_path) == 33
    monkeypatch.setenv("PTW_SEED", "abc")
    assert run(tmp_path, "diffusion", "--config", str(conf)) == 2


def test_flags_override_config(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"alpha": 2.0, "method": "quadrature"}))
    assert run(tmp_path, "diffusion", "--config", str(conf), "--alpha", "1") == 0
    rep = json.loads((tmp_path / "diffusion.json").read_text())
    assert rep["alpha"] == 1.0 and rep["method"] == "quadrature"


def test_simulate_figure1_preset(tmp_path):
    assert run(tmp_path, "simulate", "--preset", "figure1") == 0
    with open(tmp_path / "trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 101
    assert float(rows[0]["t"]) == 0.0 and float(rows[-1]["t"]) == pytest.approx(10.0)
    meta = json.loads((tmp_path / "run.json").read_text())
    for key in ("command", "config", "seed", "threads", "version", "git_describe", "timestamp", "outputs"):
        assert key in meta
    assert meta["config"]["speed"] == {"kind": "rational_decay", "a": 1.0, "b": 2.0}


def test_simulate_rejects_bad_save_dt(tmp_path):
    assert run(tmp_path, "simulate", "--alpha", "1", "--T", "1", "--dt", "0.01", "--save-dt", "0.015") == 2


def test_ensemble_independent_of_threads(tmp_path):
    outs = []
    for th in ("1", "3"):
        d = tmp_path / th
        argv = ["ensemble", "--alpha", "1", "--paths", "600", "--T", "4", "--dt", "0.05", "--init", "dirac",
                "--kappa0", "2", "--threads", th, "--seed", "5"]
        assert run(d, *argv) == 0
        outs.append(((d / "ensemble.csv").read_bytes(), (d / "ensemble.json").read_bytes()))
    assert outs[0] == outs[1]
    meta = json.loads(outs[0][1])
    assert meta["config"]["init"] == {"kind": "dirac", "kappa0": 2.0}
    assert meta["richardson"] is not None


def test_tests_command_single_criterion(tmp_path, capsys):
    assert run(tmp_path, "tests", "--only", "1") == 0
    err = capsys.readouterr().err
    assert "[PASS] criterion  1 diffusion constant exact" in err
    rep = json.loads((tmp_path / "acceptance.json").read_text())
    assert rep["passed"] and [c["number"] for c in rep["criteria"]] == [1]


def test_tests_only_must_be_integers(tmp_path):
    assert run(tmp_path, "tests", "--only", "x") == 2
