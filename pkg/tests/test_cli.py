"""End-to-end command-line runs, exit codes, and output determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from spps.cli import main


DIRICHLET = """
[problem]
order = 2
interval = 0 3.141592653589793
phi1 = 0
phi2 = 0

[mesh]
nodes = 401

[seed_system]
y1 = 1
y2 = x - 1.5707963267948966

[boundary]
row1 = 1 0 ; 0 0
row2 = 0 0 ; 1 0

[initial]
values = 0, 1
lambda = -4

[eig]
region = interval -10 -0.5
samples = 501
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "problem.ini"
    path.write_text(DIRICHLET, encoding="utf-8")
    return str(path)


def run_main(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- verify ------------------------------------------------------------------------

def test_verify_ok(config, capsys):
    code, out, _ = run_main(capsys, "verify", "--config", config)
    assert code == 0
    report = json.loads(out)
    assert report["residual_max"] <= 1e-6
    assert report["wronskian_min"] > 1e-6
    assert report["retries"] == 0


def test_verify_fails_on_impossible_tolerance(config, capsys):
    code, out, err = run_main(capsys, "verify", "--config", config,
                              "--tol", "1e-30")
    assert code == 2
    assert out == ""
    assert "residual" in err


# -- factorize / powers ------------------------------------------------------------

def test_factorize_writes_factors(config, capsys, tmp_path):
    out_dir = tmp_path / "out"
    code, out, _ = run_main(capsys, "factorize", "--config", config,
                            "--out", str(out_dir))
    assert code == 0
    report = json.loads(out)
    assert len(report["files"]) == 3  # factors 0..n for n = 2
    first = out_dir / "factor0.csv"
    header, row, *_ = first.read_text().splitlines()
    assert header == "x,re,im"
    x, re, im = row.split(",")
    assert float(x) == 0.0 and float(re) == 1.0 and float(im) == 0.0


def test_powers_reports_count(config, capsys):
    code, out, _ = run_main(capsys, "powers", "--config", config,
                            "--order", "5")
    assert code == 0
    report = json.loads(out)
    assert report["truncation"] == 5
    assert report["count"] == 2 * 6


def test_powers_writes_files(config, capsys, tmp_path):
    out_dir = tmp_path / "powers"
    code, out, _ = run_main(capsys, "powers", "--config", config,
                            "--order", "3", "--out", str(out_dir),
                            "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert len(report["files"]) == 8
    data = json.loads((out_dir / "power_k1_m0.json").read_text())
    assert data["re"][0] == 1.0  # X_1^(0) = 1 everywhere


# -- solve -------------------------------------------------------------------------

def test_solve_to_stdout_csv(config, capsys):
    code, out, _ = run_main(capsys, "solve", "--config", config)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "x,re,im"
    assert len(lines) == 402
    # y'' = -4y, y(pi/2) = 0, y'(pi/2) = 1 -> y = -sin(2x)/2
    xs, res = [], []
    for line in lines[1:]:
        x, re, im = line.split(",")
        xs.append(float(x))
        res.append(float(re))
        assert float(im) == 0.0
    np.testing.assert_allclose(res, -np.sin(2 * np.array(xs)) / 2, atol=1e-12)


def test_solve_json_format(config, capsys):
    code, out, _ = run_main(capsys, "solve", "--config", config,
                            "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert set(data) == {"x", "re", "im"}
    assert len(data["x"]) == 401


def test_solve_deterministic(config, capsys):
    _, first, _ = run_main(capsys, "solve", "--config", config)
    _, second, _ = run_main(capsys, "solve", "--config", config)
    assert first == second


def test_solve_requires_initial_section(tmp_path, capsys):
    path = tmp_path / "p.ini"
    path.write_text("[problem]\norder = 2\ninterval = 0 1\n"
                    "phi1 = 0\nphi2 = 0\n", encoding="utf-8")
    code, _, err = run_main(capsys, "solve", "--config", str(path))
    assert code == 1
    assert "initial" in err


# -- eig ---------------------------------------------------------------------------

def test_eig_reports_eigenvalues(config, capsys):
    code, out, _ = run_main(capsys, "eig", "--config", config)
    assert code == 0
    report = json.loads(out)
    got = [e["lambda_re"] for e in report["eigenvalues"]]
    np.testing.assert_allclose(got, [-9.0, -4.0, -1.0], atol=1e-7)
    assert all(e["lambda_im"] == 0.0 for e in report["eigenvalues"])
    assert all(e["residual"] < 1e-6 for e in report["eigenvalues"])
    assert report["rejected"] == []


def test_eig_deterministic(config, capsys):
    _, first, _ = run_main(capsys, "eig", "--config", config)
    _, second, _ = run_main(capsys, "eig", "--config", config)
    assert first == second


def test_eig_region_truncation_exit_code(config, capsys):
    code, _, err = run_main(capsys, "eig", "--config", config,
                            "--order", "3")
    assert code == 3
    assert "truncation" in err


def test_eig_requires_boundary(tmp_path, capsys):
    path = tmp_path / "p.ini"
    path.write_text("[problem]\norder = 2\ninterval = 0 1\n"
                    "phi1 = 0\nphi2 = 0\n[eig]\nregion = interval -10 -1\n",
                    encoding="utf-8")
    code, _, err = run_main(capsys, "eig", "--config", str(path))
    assert code == 1
    assert "boundary" in err


# -- error paths -------------------------------------------------------------------

def test_missing_config_file(capsys):
    code, _, err = run_main(capsys, "verify", "--config", "/no/such/file.ini")
    assert code == 1
    assert "cannot read" in err


def test_bad_expression_exit_code(tmp_path, capsys):
    path = tmp_path / "p.ini"
    path.write_text("[problem]\norder = 2\ninterval = 0 1\n"
                    "phi1 = 2*x +\nphi2 = 0\n", encoding="utf-8")
    code, _, err = run_main(capsys, "verify", "--config", str(path))
    assert code == 1
    assert "offset 5" in err


def test_pole_in_coefficient_exit_code(tmp_path, capsys):
    path = tmp_path / "p.ini"
    path.write_text("[problem]\norder = 2\ninterval = -1 1\n"
                    "phi1 = 1/x\nphi2 = 0\n", encoding="utf-8")
    code, _, err = run_main(capsys, "verify", "--config", str(path))
    assert code == 1
    assert "not finite" in err


def test_bad_seed_system_exit_code(tmp_path, capsys):
    # y1, y2 dependent: numerical validation failure, not a config error
    path = tmp_path / "p.ini"
    path.write_text("[problem]\norder = 2\ninterval = 0 1\n"
                    "phi1 = 0\nphi2 = 0\n[seed_system]\ny1 = 1\ny2 = 2\n",
                    encoding="utf-8")
    code, _, err = run_main(capsys, "verify", "--config", str(path))
    assert code == 2


def test_wrong_seed_solutions_exit_code(tmp_path, capsys):
    # exp(x) does not solve y'' = 0
    path = tmp_path / "p.ini"
    path.write_text("[problem]\norder = 2\ninterval = 0 1\n"
                    "phi1 = 0\nphi2 = 0\n[seed_system]\ny1 = exp(x)\ny2 = x\n",
                    encoding="utf-8")
    code, _, err = run_main(capsys, "verify", "--config", str(path))
    assert code == 2
    assert "residual" in err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


# -- console entry point -----------------------------------------------------------

def test_installed_script_runs(config):
    proc = subprocess.run(
        [sys.executable, "-m", "spps.cli", "verify", "--config", config],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["retries"] == 0
