import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from abel_lienard.cli import run
from abel_lienard.fileio import read_curve_csv

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"
SOLVABLE = sorted(
    p.name for p in PROBLEMS.glob("*.yaml") if "solve" in yaml.safe_load(p.read_text()) and p.stem != "t3_instance"
)


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_check_t1_satisfied(capsys):
    assert run(["check", str(PROBLEMS / "t1_constant.yaml")]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "T1 satisfied, residual 0.0e0"


def test_check_t1_violated(capsys):
    assert run(["check", str(PROBLEMS / "t1_violated.yaml"), "--condition", "t1"]) == 1
    assert capsys.readouterr().out.startswith("T1 violated")


def test_check_yaml_format(capsys):
    assert run(["check", str(PROBLEMS / "t2_instance.yaml"), "--format", "yaml"]) == 0
    reports = yaml.safe_load(capsys.readouterr().out)
    assert reports[0]["condition_id"] == "T2" and reports[0]["constants"]["S"] == pytest.approx(1.0)


def test_check_theorem3_forms(capsys):
    path = str(PROBLEMS / "t3_instance.yaml")
    assert run(["check", path]) == 1
    assert run(["check", path, "--form", "second_order"]) == 0
    assert "S = 0.25" in capsys.readouterr().out


def test_check_chiellini_classical(capsys):
    assert run(["check", str(PROBLEMS / "chiellini.yaml")]) == 0
    assert capsys.readouterr().out.startswith("chiellini satisfied")


def test_solve_without_out_writes_stdout(capsys):
    assert run(["solve", str(PROBLEMS / "t1_constant.yaml")]) == 0
    assert capsys.readouterr().out.startswith("# theorem: T1")


def test_solve_constant_curve(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["solve", str(PROBLEMS / "t1_constant.yaml"), "--out", str(out)]) == 0
    curve = read_curve_csv(out)
    assert np.max(np.abs(curve.v - (np.sqrt(2) - 1))) <= 1e-12


@pytest.mark.parametrize("name", SOLVABLE)
def test_solve_then_verify(tmp_path, name):
    out = tmp_path / "c.csv"
    assert run(["solve", str(PROBLEMS / name), "--out", str(out)]) == 0
    assert run(["verify", str(out), str(PROBLEMS / name)]) == 0


def test_failed_verification_is_reported(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert run(["solve", str(PROBLEMS / "t3_instance.yaml"), "--out", str(out)]) == 1
    assert "crosscheck FAIL" in capsys.readouterr().err


def test_solve_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run(["solve", str(PROBLEMS / "t2_instance.yaml"), "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_invariants_and_reduce(capsys):
    assert run(["invariants", str(PROBLEMS / "abel_constant.yaml")]) == 0
    out = capsys.readouterr().out
    assert "# I1: constant -27" in out and "# I2: constant 1.66666666667" in out
    assert run(["reduce", str(PROBLEMS / "abel_shifted_cube.yaml"), "--particular", "1"]) == 0
    assert "# separable: true" in capsys.readouterr().out
    assert run(["reduce", str(PROBLEMS / "abel_constant.yaml"), "--normal-form"]) == 0


def test_input_errors(tmp_path, capsys):
    assert run([]) == 2
    assert run(["check", str(tmp_path / "missing.yaml")]) == 2
    bad = write(tmp_path, "bad.yaml", {"equation": {"n": 2, "m": 3, "f": "1", "k": "1"}, "domain": {"min": 0, "max": 1}, "oops": 1})
    assert run(["check", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert run(["solve", str(PROBLEMS / "chiellini.yaml")]) == 2
    assert run(["reduce", str(PROBLEMS / "t4_riccati.yaml"), "--normal-form"]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    data = yaml.safe_load((PROBLEMS / "t2_instance.yaml").read_text())
    data["solve"]["anchor"]["theta"] = 1.0  # theta escapes to infinity inside the domain
    path = write(tmp_path, "t2_far.yaml", data)
    assert run(["solve", str(path), "--out", str(tmp_path / "c.csv")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "abel_lienard", "check", str(PROBLEMS / "t1_violated.yaml")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1 and "T1 violated" in proc.stdout
