import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from gromovlab.cli import main
from gromovlab.config import ConfigError, ExperimentConfig, parse_config

ROOT = Path(__file__).resolve().parents[1]


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def test_default_config_round_trips():
    cfg = ExperimentConfig()
    text = cfg.to_ini()
    again = parse_config(text)
    assert again == cfg
    assert again.to_ini() == text


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1e-4, 0.5), st.sampled_from(["disk", "ball2", "ellipsoid"]),
       st.sampled_from(["exhaustive", "monte_carlo"]))
def test_round_trip_after_edits(seed, eps, fixture, mode):
    cfg = ExperimentConfig()
    cfg.run.seed = seed
    cfg.domain.collar_eps = eps
    cfg.domain.fixture = fixture
    cfg.delta.mode = mode
    assert parse_config(cfg.to_ini()) == cfg


def test_seeds_are_materialized():
    cfg = parse_config("[domain]\nfixture = disk\n")
    assert "seed = 0" in cfg.to_ini()


@pytest.mark.parametrize("text,line,match", [
    ("[domain]\nfixture = disk\n[morse]\ngrid_res = many\n", 4, "grid_res"),
    ("[domain]\nfixture = torus\n", 2, "unknown fixture"),
    ("[domain]\nfixture = disk\n[nonsense]\nx = 1\n", 3, "unknown section"),
    ("[run]\nseed = 1\nspeed = 3\n", 3, "unknown key"),
    ("[run]\nseed 1\n", 2, "cannot parse"),
    ("[cc]\nvertices = 17,9\n", 2, "increasing"),
])
def test_config_errors_name_the_line(text, line, match):
    with pytest.raises(ConfigError, match=match) as info:
        parse_config(text, "exp.ini")
    assert info.value.line == line
    assert f"exp.ini:{line}:" in str(info.value)


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[domain]\nfixture = disk\n\n[morse]\ngrid_res = many\n")
    code, _ = run(tmp_path, "morse", "--config", str(cfg))
    assert code == 2
    assert f"{cfg}:5:" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert run(tmp_path, "morse", "--config", str(tmp_path / "nope.ini"))[0] == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[domain]\nfixture = ball2\n[cc]\npairs = 1\nrestarts = 0\nvertices = 5\nhoriz_tol = 1e-14\n")
    code, _ = run(tmp_path, "cc", "--config", str(cfg))
    assert code == 3
    assert "CCSolverError" in capsys.readouterr().err


def test_delta_on_tree_csv(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(f"[delta]\ncsv = {ROOT / 'data' / 'tree_metric.csv'}\n")
    code, out = run(tmp_path, "delta", "--config", str(cfg))
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["sections"]["delta"]["results"]["report"]["delta"] == 0.0


def test_morse_ball_report(tmp_path):
    code, out = run(tmp_path, "morse", "--fixture", "ball2")
    assert code == 0
    res = json.loads((out / "report.json").read_text())["sections"]["morse"]["results"]
    (cp,) = res["critical_points"]
    assert cp["index"] == 0
    assert res["verdict"]["connected"] is True
    assert (out / "summary.txt").read_text().count("PASS") >= 3


def test_report_embeds_config(tmp_path):
    code, out = run(tmp_path, "levi", "--fixture", "ellipsoid", "--seed", "5")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["run"]["seed"] == 5
    assert rep["config"]["domain"]["fixture"] == "ellipsoid"
    assert "[run]" in (out / "summary.txt").read_text()


def test_perturbed_structure_from_config(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[domain]\nfixture = ball2\nJ = perturbed\nJ_perturb = 0,2: 0.1*y1; 1,3: 0.1*x1\n")
    code, out = run(tmp_path, "levi", "--config", str(cfg))
    assert code == 0
    checks = json.loads((out / "report.json").read_text())["sections"]["levi"]["checks"]
    assert checks[0]["name"] == "j_squared" and checks[0]["passed"]


def test_custom_rho_from_config(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[domain]\nrho = x1**2 + y1**2 + 2*x2**2 + 2*y2**2 - 1\nn = 2\nbox = 1.2\ncollar_eps = 0.05\n")
    code, out = run(tmp_path, "morse", "--config", str(cfg))
    assert code == 0


def test_json_flag_prints_report(tmp_path, capsys):
    code, out = run(tmp_path, "levi", "--fixture", "disk", "--json")
    assert code == 0
    assert capsys.readouterr().out == (out / "report.json").read_text()
