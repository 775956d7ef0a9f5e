"""Tests for the experiment runner: configs, CSV schema, exit codes."""

import json

import numpy as np
import pytest

from gibbslab import cli


def write_config(tmp_path, body, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


GAUSS_CFG = {
    "experiment": "gaussian-oracle",
    "id": "gauss-test",
    "population": {"mu": 0.0, "sigma": 1.0},
    "trainer": {"sigma_tilde": 1.0},
    "sweep": {"n": [5, 10], "replicates": 1500, "seed": 42},
    "output": {"csv": "gauss.csv"},
}


# ---------------------------------------------------------------------------
# serialization


def test_csv_float_format_round_trips():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(200) * 10.0 ** rng.integers(-12, 12, 200):
        assert float(cli._fmt(float(x))) == float(x)
    assert cli._fmt(0.2) == "0.20000000000000001"


def test_fmt_handles_all_field_types():
    assert cli._fmt(None) == ""
    assert cli._fmt(True) == "true"
    assert cli._fmt(np.bool_(False)) == "false"
    assert cli._fmt(7) == "7"
    assert cli._fmt(np.int64(7)) == "7"
    assert cli._fmt("direct") == "direct"


def test_emit_csv_schema(tmp_path):
    rows = [cli._row("e", "direct", 5, 100, 1, estimate=0.25,
                     stderr=0.01, oracle=None, bound=None, holds=None)]
    path = tmp_path / "out.csv"
    cli.emit_csv(rows, path)
    header, line = path.read_text().strip().split("\n")
    assert header == ("experiment_id,route,n,replicates,seed,"
                      "estimate,stderr,oracle,bound,holds")
    fields = line.split(",")
    assert len(fields) == 10
    assert fields[7] == "" and fields[8] == "" and fields[9] == ""
    cli.emit_csv([], path)
    assert path.read_text() == header + "\n"
    with pytest.raises(ValueError):
        cli.emit_csv([{"experiment_id": "e", "extra": 1}], path)


# ---------------------------------------------------------------------------
# config validation


def test_missing_field_names_the_path(tmp_path, capsys):
    cfg = {"experiment": "gaussian-oracle", "sweep": {"n": [5], "seed": 0}}
    assert cli.run(write_config(tmp_path, cfg)) == 1
    assert "sweep.replicates" in capsys.readouterr().err


def test_bad_enum_is_reported(tmp_path, capsys):
    assert cli.run(write_config(tmp_path, {"experiment": "foo"})) == 1
    assert "experiment" in capsys.readouterr().err


def test_non_increasing_sweep_rejected(tmp_path, capsys):
    cfg = dict(GAUSS_CFG, sweep={"n": [10, 10], "replicates": 10, "seed": 0})
    assert cli.run(write_config(tmp_path, cfg)) == 1
    assert "sweep.n" in capsys.readouterr().err


def test_json_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n "experiment": oops\n}')
    assert cli.run(str(path)) == 1
    err = capsys.readouterr().err
    assert "broken.json:2" in err


def test_missing_file_and_non_object(tmp_path, capsys):
    assert cli.run(str(tmp_path / "nope.json")) == 1
    path = tmp_path / "arr.json"
    path.write_text("[1, 2]")
    assert cli.run(str(path)) == 1


def test_unknown_route_rejected(tmp_path, capsys):
    cfg = {
        "experiment": "gen-sweep",
        "model": {"variant": "expected_param", "param_loss": "mean_squared"},
        "population": {"name": "gaussian", "sigma": 1.0},
        "gibbs": {"beta": 1.0},
        "trainer": {"kind": "constant"},
        "routes": ["direct", "warp"],
        "sweep": {"n": [4], "replicates": 10, "seed": 0},
    }
    assert cli.run(write_config(tmp_path, cfg)) == 1
    assert "warp" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# experiments end to end


def test_gaussian_oracle_run_csv(tmp_path, capsys):
    code = cli.run(write_config(tmp_path, GAUSS_CFG), out=str(tmp_path))
    assert code == 0
    lines = (tmp_path / "gauss.csv").read_text().strip().split("\n")
    assert len(lines) == 5  # header + 2 n values x 2 routes
    for line in lines[1:]:
        f = line.split(",")
        assert f[0] == "gauss-test"
        assert f[1] in ("direct", "resampled")
        oracle = float(f[7])
        np.testing.assert_allclose(oracle, 2.0 / int(f[2]))
        assert abs(float(f[5]) - oracle) <= 3 * float(f[6])
        assert f[9] == "true"
    assert "gauss-test" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    path = write_config(tmp_path, GAUSS_CFG)
    cli.run(path, out=str(tmp_path / "a"))
    cli.run(path, out=str(tmp_path / "b"))
    assert (tmp_path / "a" / "gauss.csv").read_bytes() \
        == (tmp_path / "b" / "gauss.csv").read_bytes()


def test_seed_override_changes_output(tmp_path):
    path = write_config(tmp_path, GAUSS_CFG)
    cli.run(path, out=str(tmp_path / "a"))
    cli.run(path, out=str(tmp_path / "b"), seed=43)
    assert (tmp_path / "a" / "gauss.csv").read_text() \
        != (tmp_path / "b" / "gauss.csv").read_text()


def test_exit_two_when_oracle_misses(tmp_path):
    cfg = dict(GAUSS_CFG, trainer={"sigma_tilde": 2.0})
    assert cli.run(write_config(tmp_path, cfg), out=str(tmp_path)) == 2
    rows = (tmp_path / "gauss.csv").read_text().strip().split("\n")[1:]
    assert all(r.endswith("false") for r in rows)


def test_gen_sweep_constant_trainer(tmp_path):
    cfg = {
        "experiment": "gen-sweep",
        "id": "const",
        "model": {"variant": "expected_param", "param_loss": "mean_squared"},
        "population": {"name": "gaussian", "mu": 0.0, "sigma": 1.0},
        "gibbs": {"beta": 1.0, "sigma": 1.0, "p": 4},
        "trainer": {"kind": "constant", "measure": "prior"},
        "routes": ["direct", "resampled"],
        "sweep": {"n": [4, 8], "replicates": 300, "seed": 3},
        "output": {"csv": "const.csv"},
    }
    assert cli.run(write_config(tmp_path, cfg), out=str(tmp_path)) == 0
    for line in (tmp_path / "const.csv").read_text().strip().split("\n")[1:]:
        f = line.split(",")
        est, se = float(f[5]), float(f[6])
        # a data-independent trainer has zero mean gap
        assert abs(est) <= max(3 * se, 1e-15)


def test_verify_report_schema(tmp_path):
    code = cli.verify(seed=7, out=str(tmp_path))
    assert code == 0
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert len(report) >= 10
    for check in report:
        assert set(check) == {"check_name", "status", "residual",
                              "tolerance"}
        assert check["status"] == "pass"
        assert check["residual"] <= check["tolerance"]


def test_verify_rerun_byte_identical(tmp_path):
    cli.verify(seed=7, out=str(tmp_path / "a"))
    cli.verify(seed=7, out=str(tmp_path / "b"))
    assert (tmp_path / "a" / "verify_report.json").read_bytes() \
        == (tmp_path / "b" / "verify_report.json").read_bytes()


def test_gibbs_solve_writes_json_summary(tmp_path):
    cfg = {
        "experiment": "gibbs-solve",
        "id": "solve",
        "model": {"variant": "expected_param",
                  "param_loss": "linear_regression"},
        "population": {"name": "noiseless_line", "slope": 0.5},
        "gibbs": {"beta": 0.5, "sigma": 1.0, "p": 4, "kappa": 0.05, "q": 3},
        "trainer": {"kind": "gibbs_grid", "damping": 1.0, "tol": 1e-10},
        "sweep": {"n": [8], "replicates": 2, "seed": 1},
        "output": {"json": "solve.json"},
    }
    assert cli.run(write_config(tmp_path, cfg), out=str(tmp_path)) == 0
    payload = json.loads((tmp_path / "solve.json").read_text())
    assert payload["iterations"] == 1
    assert payload["residual"] <= 1e-10
    assert payload["p_moment"] <= payload["p_moment_bound"] + 1e-6
    assert payload["holds"] is True


def test_main_cli_surface(tmp_path, capsys):
    path = write_config(tmp_path, GAUSS_CFG)
    assert cli.main(["run", path, "--out", str(tmp_path), "--seed", "5",
                     "--threads", "2"]) == 0
    with pytest.raises(SystemExit):
        cli.main([])
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])
    capsys.readouterr()
