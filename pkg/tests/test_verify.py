import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abel_lienard.errors import PreconditionError
from abel_lienard.model import LienardProblem
from abel_lienard.solvers import solve_riccati, solve_theorem1, solve_theorem2
from abel_lienard.verify import (
    abel_residual,
    crosscheck_reference,
    derivative_on_samples,
    fd_weights,
    lienard_residual,
    pointwise_lienard,
)


def t1(samples=201, scale=1.0):
    c = repr(scale)
    return LienardProblem.from_strings(
        2, 3, f"{c}*1", f"{c}*(-1)", f"{c}*3", f"{c}*1", domain=(0.0, 1.0), samples=samples
    )


def test_fd_weights_reproduce_polynomials():
    nodes = np.array([0.0, 0.1, 0.3, 0.35, 0.6])
    w = fd_weights(nodes, 0.2, 1)
    assert w @ nodes**3 == pytest.approx(3 * 0.2**2, rel=1e-12)
    w2 = fd_weights(nodes, 0.2, 2)
    assert w2 @ nodes**4 == pytest.approx(12 * 0.2**2, rel=1e-10)


def test_derivative_on_samples_is_fourth_order():
    errs = []
    for n in (41, 81):
        x = np.linspace(0, 1, n)
        errs.append(np.max(np.abs(derivative_on_samples(x, np.sin(3 * x)) - 3 * np.cos(3 * x))))
    assert errs[0] / errs[1] > 12


def test_abel_residual_on_constant_root():
    curve = solve_theorem1(t1(), 0.25, "+")
    assert abel_residual(curve, t1()).max_rel <= 1e-12


def test_abel_residual_detects_corruption():
    prob = t1()
    curve = solve_theorem1(prob, 0.25, "+")
    bad = dataclasses.replace(curve, v=curve.v + 0.1)
    assert abel_residual(bad, prob).max_rel > 1e-2


def test_abel_residual_on_tan_curve():
    prob = LienardProblem.from_strings(3, 1, "1", "1", domain=(0.0, 1.0), samples=401)
    curve = solve_riccati("1", "1", 0.0, 0.2, (0.0, 1.0), 401)
    assert abel_residual(curve, prob).max_rel <= 1e-8


def test_lienard_residual_on_linear_solution():
    prob = t1()
    curve = solve_theorem1(prob, 0.25, "+")
    assert np.allclose(np.diff(curve.y) / np.diff(curve.x), 1 / (math.sqrt(2) - 1), rtol=1e-12)
    assert lienard_residual(curve, prob).max_rel <= 1e-10
    assert pointwise_lienard(curve, prob).max_rel <= 1e-10


def test_lienard_residual_on_tan_curve():
    prob = LienardProblem.from_strings(3, 1, "1", "1", domain=(0.0, 1.0), samples=401)
    curve = solve_riccati("1", "1", 0.0, 0.2, (0.0, 1.0), 401)
    assert lienard_residual(curve, prob).max_rel <= 1e-6


def test_lienard_residual_rejects_sign_change():
    prob = LienardProblem.from_strings(3, 1, "1", "1", domain=(-0.5, 0.5))
    curve = solve_riccati("1", "1", 0.0, -0.5, (-0.5, 0.5))
    assert len(curve.monotone_segments) == 2
    merged = dataclasses.replace(curve, monotone_segments=[(0, len(curve.y) - 1)])
    with pytest.raises(PreconditionError):
        lienard_residual(merged, prob)


def test_grid_refinement_reduces_residuals():
    res = []
    for n in (201, 401):
        prob = LienardProblem.from_strings(3, 1, "1", "1", domain=(0.0, 1.0), samples=n)
        curve = solve_riccati("1", "1", 0.0, 0.5, (0.0, 1.0), n)
        res.append((abel_residual(curve, prob).max_rel, lienard_residual(curve, prob).max_rel))
    assert res[0][0] / res[1][0] >= 4 and res[0][1] / res[1][1] >= 4


def test_crosscheck_riccati_against_rk():
    prob = LienardProblem.from_strings(3, 1, "1/y^2", "1", domain=(1.0, 2.0))
    curve = solve_riccati("1/y^2", "1", -1.0, 0.0, (1.0, 2.0))
    for seg in range(len(curve.monotone_segments)):
        assert crosscheck_reference(curve, prob, segment=seg).max_rel <= 1e-6


def test_crosscheck_theorem2():
    prob = LienardProblem.from_strings(2, 3, "-1/(6*y+1)", "-7*(18*y+3)^(-1.5)", "0", "1", domain=(1.0, 2.0))
    curve = solve_theorem2(prob, 1.0, theta_anchor=(1.0, 0.5))
    assert crosscheck_reference(curve, prob).max_rel <= 1e-5


def test_crosscheck_detects_wrong_constant():
    prob = t1()
    good = solve_theorem1(prob, 1.25, "+")
    other = solve_theorem1(prob, 2.0, "+")
    # keep the abscissae of the C = 1.25 curve but the slopes of C = 2
    hybrid = dataclasses.replace(good, v=other.v)
    assert crosscheck_reference(good, prob).max_rel <= 1e-6
    assert crosscheck_reference(hybrid, prob).max_rel > 1e-2


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(-0.05, 0.05))
def test_residual_scale_invariance(c, shift):
    # v is exactly constant, so dv/dy = 0 and residual and scale both carry the factor c.
    curve = solve_theorem1(t1(), 0.25, "+")
    curve = dataclasses.replace(curve, v=np.full_like(curve.v, math.sqrt(2) - 1 + shift))
    base = abel_residual(curve, t1())
    scaled = abel_residual(curve, t1(scale=c))
    assert abs(scaled.max_rel - base.max_rel) <= 1e-12
    assert scaled.scale == pytest.approx(c * base.scale, rel=1e-12)


def test_report_pass_and_dict():
    rep = abel_residual(solve_theorem1(t1(), 0.25, "+"), t1())
    assert rep.passes(1e-12)
    d = rep.to_dict()
    assert d["kind"] == "abel" and "pointwise" not in d
