import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from abel_lienard.errors import BranchCrossingError, PreconditionError, RangeError
from abel_lienard.model import LienardProblem, lienard_to_abel
from abel_lienard.numerics import integrate_adaptive, ode_solve
from abel_lienard.solvers import (
    chiellini_G,
    chiellini_segment,
    chiellini_singular_points,
    chiellini_theta,
    solve_riccati,
    solve_theorem1,
    solve_theorem2,
    solve_theorem3,
    solve_theorem4,
    theorem4_H,
    theorem4_singular_points,
)
from abel_lienard.verify import abel_residual, crosscheck_reference, lienard_residual

SQ2 = math.sqrt(2.0)
T2_K = {"+": "-7*(18*y+3)^(-1.5)", "-": "7*(18*y+3)^(-1.5)"}
T3C_F = "1/y + 2.25*y^2 - 3*y^2"
T3C_K = "1 - (1/y + 2.25*y^2 - 3*y^2)*y - y^3"


def t1_problem():
    return LienardProblem.from_strings(2, 3, "1", "-1", "3", "1", domain=(0.0, 1.0))


def dG(theta, S):
    return S / (theta * (theta * theta + theta + S))


# ------------------------------------------------------------------ G function


def test_G_examples_in_classical_normalization():
    assert chiellini_G(1.0, 0.25, "classical") == pytest.approx(math.log(1 / 3) + 1 / 3, abs=1e-14)
    expected = math.exp(-math.atan(math.sqrt(3)) / math.sqrt(3)) / math.sqrt(3)
    assert math.exp(chiellini_G(1.0, 1.0, "classical")) == pytest.approx(expected, rel=1e-13)
    assert math.exp(chiellini_G(1.0, 1.0, "classical")) == pytest.approx(0.3154, abs=5e-5)


def test_G_tends_to_minus_infinity_at_zero():
    vals = chiellini_G(np.array([1e-4, 1e-8, 1e-12]), 0.25, "classical")
    assert np.all(np.diff(vals) < 0) and vals[-1] < -20


@pytest.mark.parametrize("S", [0.1, 0.25, 1.0, 5.0, -0.5])
@pytest.mark.parametrize("normalization", ["classical", "continuous"])
def test_G_derivative_matches_integrand(S, normalization):
    h = 1e-5
    for t in np.linspace(0.2, 3.0, 20):
        fd = (chiellini_G(t + h, S, normalization) - chiellini_G(t - h, S, normalization)) / (2 * h)
        assert fd == pytest.approx(dG(t, S), rel=1e-6)


def test_G_against_quadrature_oracle():
    for S in (0.1, 0.25, 1.0, 5.0):
        got = chiellini_G(2.5, S) - chiellini_G(0.5, S)
        ref = integrate_adaptive(lambda t: dG(t, S), 0.5, 2.5)
        assert got == pytest.approx(ref, rel=1e-12)


def test_G_continuous_across_quarter():
    eps = 1e-7
    for t in np.linspace(0.2, 3.0, 20):
        mid = chiellini_G(t, 0.25)
        assert abs(chiellini_G(t, 0.25 + eps) - mid) <= 1e-6
        assert abs(chiellini_G(t, 0.25 - eps) - mid) <= 1e-6


def test_classical_normalization_jumps_at_quarter():
    # The classical closed forms differ from the continuous family by constants.
    t, eps = 1.0, 1e-9
    assert chiellini_G(t, 0.25, "classical") - chiellini_G(t, 0.25) == pytest.approx(-math.log(2), abs=1e-12)
    jump = chiellini_G(t, 0.25 + eps, "classical") - chiellini_G(t, 0.25 - eps, "classical")
    assert abs(jump) > 1.0


def test_G_rejects_zero_S():
    with pytest.raises(PreconditionError):
        chiellini_G(1.0, 0.0)


def test_singular_points_and_segments():
    roots = chiellini_singular_points(0.1)
    assert len(roots) == 3 and 0.0 in roots
    assert chiellini_singular_points(1.0) == [0.0]
    assert chiellini_segment(0.5, 0.1) == (0.0, math.inf)
    lo, hi = chiellini_segment(-0.5, 0.1)
    assert lo == pytest.approx((-1 - math.sqrt(0.6)) / 2) and hi == pytest.approx((-1 + math.sqrt(0.6)) / 2)


def test_theta_inversion_examples():
    assert chiellini_theta(math.exp(1 / 3) / 3, 0.25, 1.0, normalization="classical") == pytest.approx(1.0, abs=1e-10)
    target = math.exp(chiellini_G(1.0, 1.0, "classical"))
    assert chiellini_theta(target, 1.0, 1.0, normalization="classical") == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(RangeError):
        chiellini_theta(-1.0, 1.0, 1.0)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.05, 6.0), st.floats(0.05, 8.0), st.sampled_from(["classical", "continuous"]))
def test_theta_inverts_G(S, theta, normalization):
    target = math.exp(chiellini_G(theta, S, normalization))
    assert chiellini_theta(target, S, 1.0, normalization=normalization) == pytest.approx(theta, rel=1e-8)


# ------------------------------------------------------------------ Theorem 1


@pytest.mark.parametrize("branch, v_const", [("+", SQ2 - 1), ("-", -SQ2 - 1)])
def test_theorem1_constant_curve(branch, v_const):
    # C = 1/4 in the y_min-anchored convention is the closed-form constant solution.
    curve = solve_theorem1(t1_problem(), 0.25, branch)
    assert np.max(np.abs(curve.v - v_const)) <= 1e-12
    cubic = curve.v**3 + 3 * curve.v**2 + curve.v - 1
    assert np.max(np.abs(cubic)) <= 1e-12


def test_theorem1_general_curve_and_verification():
    prob = t1_problem()
    curve = solve_theorem1(prob, 1.25, "+")
    assert abel_residual(curve, prob).max_rel <= 1e-8
    assert crosscheck_reference(curve, prob).max_rel <= 1e-6
    assert lienard_residual(curve, prob).max_rel <= 1e-5


def test_theorem1_radicand_must_stay_positive():
    with pytest.raises(PreconditionError):
        solve_theorem1(t1_problem(), 0.0)


def test_theorem1_auto_branch_is_deterministic():
    a = solve_theorem1(t1_problem(), 1.25, "auto")
    b = solve_theorem1(t1_problem(), 1.25, "auto")
    assert a.constants["branch"] in ("+", "-") and np.array_equal(a.v, b.v)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 5.0), st.sampled_from(["+", "-"]))
def test_theorem1_random_constants_solve_the_abel_equation(C, branch):
    prob = t1_problem()
    curve = solve_theorem1(prob, C, branch)
    assume(curve.monotone_segments and all(b - a >= 20 for a, b in curve.monotone_segments))
    assert abel_residual(curve, prob).max_rel <= 1e-6


# ------------------------------------------------------------------ Theorem 2


@pytest.mark.parametrize("branch", ["+", "-"])
def test_theorem2_curve(branch):
    prob = LienardProblem.from_strings(2, 3, "-1/(6*y+1)", T2_K[branch], "0", "1", domain=(1.0, 2.0))
    curve = solve_theorem2(prob, 1.0, branch=branch, theta_anchor=(1.0, 0.5))
    assert curve.theta[0] == pytest.approx(0.5, abs=1e-12)
    assert abel_residual(curve, prob).max_rel <= 1e-6
    assert crosscheck_reference(curve, prob).max_rel <= 1e-5


def test_theorem2_K0_and_anchor_agree():
    prob = LienardProblem.from_strings(2, 3, "-1/(6*y+1)", T2_K["+"], "0", "1", domain=(1.0, 2.0))
    a = solve_theorem2(prob, 1.0, theta_anchor=(1.0, 0.5))
    b = solve_theorem2(prob, 1.0, K0=a.constants["K0"])
    assert np.max(np.abs(a.v - b.v)) <= 1e-9


def test_theorem2_argument_errors():
    prob = LienardProblem.from_strings(2, 3, "-1/(6*y+1)", T2_K["+"], "0", "1", domain=(1.0, 2.0))
    with pytest.raises(PreconditionError):
        solve_theorem2(prob, 0.0, theta_anchor=(1.0, 0.5))
    with pytest.raises(PreconditionError):
        solve_theorem2(prob, 1.0)
    with pytest.raises(RangeError):
        solve_theorem2(prob, 1.0, K0=2.0)


# ------------------------------------------------------------------ Theorem 3


def test_theorem3_separable_instance():
    prob = LienardProblem.from_strings(2, 3, T3C_F, T3C_K, "0", "1", domain=(1.0, 1.5))
    curve = solve_theorem3(prob, "y", 0.25, (1.0, -0.4))
    assert abel_residual(curve, prob).max_rel <= 1e-6
    assert crosscheck_reference(curve, prob).max_rel <= 1e-5


def test_theorem3_anchor_on_singular_point():
    prob = LienardProblem.from_strings(2, 3, T3C_F, T3C_K, "0", "1", domain=(1.0, 1.5))
    with pytest.raises(BranchCrossingError):
        solve_theorem3(prob, "y", 0.25, (1.0, -0.5))


def test_theorem3_rejects_vp0_and_zero_S():
    with pytest.raises(PreconditionError):
        solve_theorem3(t1_problem(), "-1", 0.25, (0.0, 1.0))
    prob = LienardProblem.from_strings(2, 3, T3C_F, T3C_K, "0", "1", domain=(1.0, 1.5))
    with pytest.raises(PreconditionError):
        solve_theorem3(prob, "y", 0.0, (1.0, -0.4))


# ------------------------------------------------------------------ Theorem 4 and Riccati


def test_theorem4_matches_riccati():
    prob = LienardProblem.from_strings(3, 1, "1/y^2", "1", domain=(1.0, 2.0))
    t4 = solve_theorem4(prob, -1.0, 1.0, (1.0, -0.5))
    ric = solve_riccati("1/y^2", "1", -1.0, 0.0, (1.0, 2.0))
    assert np.max(np.abs(t4.v - ric.v)) <= 1e-8


def test_theorem4_bernoulli_closed_form():
    # dv/dy = v^2 + k v with f = 1, k = 1/(1 - y/2): z = 1/v = (1 - y/2)^2 (C - 2/(1 - y/2)).
    prob = LienardProblem.from_strings(1, 2, "1", "1/(1-0.5*y)", domain=(0.0, 0.5))
    curve = solve_theorem4(prob, 0.5, 1.0, (0.0, 0.2))
    C = 1 / 0.2 + 2
    w = 1 - 0.5 * curve.y
    assert np.max(np.abs(curve.v - 1 / (w * w * (C - 2 / w)))) <= 1e-8


def test_theorem4_singularities():
    assert theorem4_singular_points(3, 1, -1.0, 1.0) == []
    assert theorem4_singular_points(1, 2, 0.5, 1.0) == [-0.5, 0.0]
    with pytest.raises(BranchCrossingError):
        theorem4_H(0.0, 1, 2, 0.5, 1.0)
    prob = LienardProblem.from_strings(1, 2, "1", "1/(1-0.5*y)", domain=(0.0, 0.5))
    with pytest.raises(BranchCrossingError):
        solve_theorem4(prob, 0.5, 1.0, (0.0, -0.5))


def test_riccati_tan_closed_form():
    curve = solve_riccati("1", "1", 0.0, 0.0, (0.0, 1.0))
    assert np.max(np.abs(curve.v - np.tan(curve.y))) <= 1e-12


def test_riccati_log_branch_against_rk():
    curve = solve_riccati("1/y^2", "1", -1.0, 0.0, (1.0, 2.0))
    traj = ode_solve(lambda y, v: 1 / y**2 + v * v, 1.0, -0.5, 2.0, x_eval=curve.y)
    ref = np.interp(curve.y, traj.x, traj.states[:, 0])
    assert np.max(np.abs(curve.v - ref) / np.maximum(np.abs(ref), 1e-3)) <= 1e-6
    closed = (1 / curve.y) * (math.sqrt(3) / 2 * np.tan(math.sqrt(3) / 2 * np.log(curve.y)) - 0.5)
    assert np.max(np.abs(curve.v - closed)) <= 1e-12


def test_riccati_rational_branch_residual():
    prob = LienardProblem.from_strings(3, 1, "1/(4*y^2)", "1", domain=(1.0, 2.0))
    curve = solve_riccati("1/(4*y^2)", "1", -2.0, 1.0, (1.0, 2.0))
    assert abel_residual(curve, lienard_to_abel(prob)).max_rel <= 1e-8


def test_riccati_strong_branch():
    prob = LienardProblem.from_strings(3, 1, "1/(9*y^2)", "1", domain=(1.0, 2.0))
    curve = solve_riccati("1/(9*y^2)", "1", -3.0, 1.0, (1.0, 2.0))
    assert abel_residual(curve, prob).max_rel <= 1e-6


def test_riccati_poles_split_pieces():
    curve = solve_riccati("1", "1", 0.0, 0.0, (0.0, 4.0), samples=400)
    assert len(curve.pieces) == 2
    a, b = curve.pieces[0]
    assert curve.y[b] < math.pi / 2 < curve.y[curve.pieces[1][0]]


def test_curve_x_is_quadrature_of_v():
    curve = solve_riccati("1", "1", 0.0, 0.0, (0.0, 1.0))
    # x = int tan = -ln cos
    assert np.max(np.abs(curve.x - (-np.log(np.cos(curve.y))))) <= 1e-9
