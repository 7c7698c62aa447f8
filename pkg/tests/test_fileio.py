import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abel_lienard.errors import ProblemFileError
from abel_lienard.fileio import CSV_COLUMNS, curve_to_csv, fmt, load_problem, parse_problem, read_curve_csv
from abel_lienard.solvers import solve_theorem1
from abel_lienard.verify import abel_residual, pointwise_lienard

BASE = {
    "equation": {"n": 2, "m": 3, "f": "1", "k": "-1", "g": "3", "h": "1"},
    "domain": {"min": 0, "max": 1, "samples": 101},
}


def with_(**blocks):
    data = {k: dict(v) for k, v in BASE.items()}
    data.update(blocks)
    return data


def test_parse_minimal_problem():
    pf = parse_problem(with_())
    assert pf.lienard.n == 2 and pf.lienard.samples == 101
    assert pf.classical is None and pf.solve is None
    assert pf.condition_tol == 1e-6


def test_parse_full_problem():
    pf = parse_problem(
        with_(
            particular={"v_p": "-1"},
            solve={"theorem": "T2", "constants": {"S": 1, "x0": 2}, "branch": "-", "anchor": {"y": 0, "theta": 0.5}},
            tolerances={"quad_rel": 1e-9, "condition": 1e-7},
        )
    )
    assert pf.particular == "-1"
    assert pf.solve.constants == {"S": 1.0, "x0": 2.0} and pf.solve.anchor == (0.0, 0.5)
    assert pf.tolerances.quad_rel == 1e-9 and pf.condition_tol == 1e-7


def test_classical_block():
    pf = parse_problem({"classical": {"p": "1", "r": "1", "s": "1"}, "domain": {"min": 0, "max": 1}})
    assert pf.lienard is None and pf.classical.variable == "x"


@pytest.mark.parametrize(
    "data, fragment",
    [
        (with_(extra=1), "unknown key"),
        (with_(domain={"min": 0, "max": 1, "step": 2}), "unknown key"),
        (with_(equation={"n": 2, "m": 3, "f": "1", "k": "1", "q": "1"}), "unknown key"),
        (with_(solve={"theorem": "T9"}), "solve.theorem"),
        (with_(solve={"theorem": "T1", "constants": {"C": "abc"}}), "must be a number"),
        (with_(solve={"theorem": "T2", "anchor": {"y": 1}}), "anchor"),
        (with_(equation={"n": 2, "m": 3, "f": "1+"}), "'k'"),
        (with_(equation={"n": 2, "m": 3, "f": "1+", "k": "1"}), "invalid equation"),
        ({"domain": {"min": 0, "max": 1}}, "exactly one"),
        (with_(domain={"min": 0}), "'domain' needs"),
    ],
)
def test_parse_errors(data, fragment):
    with pytest.raises(ProblemFileError) as info:
        parse_problem(data)
    assert fragment in str(info.value)


def test_load_problem_errors(tmp_path):
    with pytest.raises(ProblemFileError):
        load_problem(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("equation: [1, 2\n")
    with pytest.raises(ProblemFileError):
        load_problem(bad)
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("42\n")
    with pytest.raises(ProblemFileError):
        load_problem(scalar)


def test_csv_round_trip(tmp_path):
    pf = parse_problem(with_())
    curve = solve_theorem1(pf.lienard, 1.25, "+")
    text = curve_to_csv(curve, abel_residual(curve, pf.lienard).pointwise,
                        pointwise_lienard(curve, pf.lienard).pointwise, {"note": "x"})
    lines = text.splitlines()
    assert lines[0] == "# theorem: T1"
    assert lines[[i for i, l in enumerate(lines) if not l.startswith("#")][0]] == ",".join(CSV_COLUMNS)
    path = tmp_path / "c.csv"
    path.write_text(text)
    back = read_curve_csv(path)
    assert back.theorem_id == "T1"
    assert np.array_equal(back.y, curve.y) and np.array_equal(back.v, curve.v) and np.array_equal(back.x, curve.x)
    assert back.pieces == curve.pieces and back.monotone_segments == curve.monotone_segments


def test_read_curve_csv_errors(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ProblemFileError):
        read_curve_csv(p)
    p.write_text(",".join(CSV_COLUMNS) + "\n1,2,3,4,5,x\n")
    with pytest.raises(ProblemFileError):
        read_curve_csv(p)


def test_fmt_has_17_significant_digits():
    assert fmt(0.1) == "1.0000000000000001e-01"
    assert fmt(-2.0) == "-2.0000000000000000e+00"


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x
