import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abel_lienard.errors import DomainError, ExprSyntaxError, UnknownIdentifierError
from abel_lienard.expr import Const, Var, differentiate, evaluate, parse, simplify, to_string
from abel_lienard.numerics import derivative_fd
from corpus import CORPUS, POINTS


@pytest.mark.parametrize(
    "text, point, expected",
    [("y^2", 3, 9), ("-1/(6*y+1)", 0, -1), ("exp(-2*y)", 0, 1), ("sqrt(y)", 4, 2), ("2*pi", 0, 2 * math.pi)],
)
def test_evaluate_examples(text, point, expected):
    assert evaluate(parse(text), point) == pytest.approx(expected, abs=1e-15)


def test_syntax_error_reports_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("y+*2")
    assert info.value.offset == 2


@pytest.mark.parametrize("text", ["", "(y", "y)", "3 4", "sin y"])
def test_malformed_input_rejected(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_unknown_names():
    with pytest.raises(UnknownIdentifierError):
        parse("z + 1")
    with pytest.raises(UnknownIdentifierError):
        parse("foo(y)")


def test_variable_name_is_configurable():
    assert evaluate(parse("x^2 + 1", variable="x"), 2.0) == 5.0
    with pytest.raises(UnknownIdentifierError):
        parse("y", variable="x")


@pytest.mark.parametrize("text, point", [("ln(y)", -1.0), ("sqrt(y)", -4.0), ("1/y", 0.0), ("y^0.5", -1.0)])
def test_domain_errors(text, point):
    with pytest.raises(DomainError):
        evaluate(parse(text), point)


def test_vectorized_evaluation_matches_scalar():
    e = parse("sin(y)*exp(-y) + y^3")
    pts = np.linspace(-1, 1, 7)
    assert np.allclose(evaluate(e, pts), [evaluate(e, float(p)) for p in pts], rtol=0, atol=1e-15)


@pytest.mark.parametrize(
    "text, point, expected", [("sin(y)", 0, 1), ("y^3", 2, 12), ("exp(-2*y)", 0, -2), ("ln(y)", 4, 0.25)]
)
def test_derivative_examples(text, point, expected):
    assert evaluate(differentiate(parse(text)), point) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("text, expected", [("0*y + 1*y", "y"), ("y^1", "y"), ("(2+3)*y", "5 * y"), ("y - 0", "y")])
def test_simplify_examples(text, expected):
    assert to_string(simplify(parse(text))) == expected


def test_simplify_folds_constants():
    assert simplify(parse("2*3 + 4")) == Const(10.0)
    assert simplify(parse("y*0")) == Const(0.0)
    assert simplify(parse("y^0")) == Const(1.0)


def test_to_string_round_trip():
    for text in CORPUS:
        e = parse(text)
        again = parse(to_string(e))
        assert np.allclose(evaluate(again, POINTS), evaluate(e, POINTS), rtol=1e-15, atol=0)


@pytest.mark.parametrize("text", CORPUS)
def test_symbolic_derivative_matches_fd(text):
    e = parse(text)
    d = differentiate(e)
    for y in POINTS:
        ref = derivative_fd(lambda t: evaluate(e, t), float(y), 1e-4)
        got = evaluate(d, float(y))
        assert abs(got - ref) <= 1e-6 * max(1.0, abs(ref))


def test_operator_overloads_build_trees():
    y = Var("y")
    e = 3 * y**2 - y / 2 + 1
    assert evaluate(e, 2.0) == 12.0
    assert evaluate(-y, 2.0) == -2.0


# ---------------------------------------------------------------- properties

_atoms = st.sampled_from(["y", "2", "0.5", "y^2", "sin(y)", "exp(y/4)", "(1+y^2)"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "-", "*"]))
    return f"({draw(expressions(depth=depth - 1))}) {op} ({draw(expressions(depth=depth - 1))})"


@settings(max_examples=150, deadline=None)
@given(expressions(), st.floats(-2.0, 2.0))
def test_simplify_preserves_value(text, y):
    e = parse(text)
    a, b = evaluate(e, y), evaluate(simplify(e), y)
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(expressions(), st.floats(-2.0, 2.0))
def test_print_parse_round_trip(text, y):
    e = parse(text)
    assert evaluate(parse(to_string(e)), y) == pytest.approx(evaluate(e, y), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(expressions(), st.floats(-1.5, 1.5))
def test_derivative_matches_fd_property(text, y):
    e = parse(text)
    ref = derivative_fd(lambda t: evaluate(e, t), y, 1e-4)
    got = evaluate(differentiate(e), y)
    assert got == pytest.approx(ref, rel=1e-6, abs=1e-6)
