"""Grid checks of the integrability conditions, with estimation of their free constants.

Every check evaluates both sides of its condition on the sample grid using
exact symbolic derivatives, estimates the free constant, then verifies the
whole grid against that constant. The verdict is "satisfied" when the maximal
residual is at most ``tol`` times the largest term magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError, ShapeError
from .expr import Expr, apply, differentiate, evaluate, simplify
from .model import (
    LienardProblem,
    _as_expr,
    check_particular,
    identically_zero,
    lienard_to_abel,
    make_grid,
    require_quadratic_cubic,
)
from .numerics import DEFAULT_TOL, Antiderivative, Tolerances, integrate_adaptive

DEFAULT_REL_TOL = 1e-6
CONDITION_IDS = ("chiellini", "T1", "T2", "T3", "T4a", "T4b", "riccati")
# denominators below this fraction of their maximum are skipped when estimating
_EXCLUDE = 1e-10


def short_sci(value: float) -> str:
    """Scientific notation with one decimal and an unpadded exponent, e.g. 1.2e-15."""
    mant, exp = f"{value:.1e}".split("e")
    return f"{mant}e{int(exp)}"


@dataclass
class ConditionReport:
    condition_id: str
    verdict: str
    constants: dict
    residual_max: float
    residual_rms: float
    grid: np.ndarray = field(repr=False)
    scale: float = 0.0
    notes: str = ""

    @property
    def satisfied(self) -> bool:
        return self.verdict == "satisfied"

    def summary(self) -> str:
        return f"{self.condition_id} {self.verdict}, residual {short_sci(self.residual_max)}"

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "verdict": self.verdict,
            "constants": dict(self.constants),
            "residual_max": self.residual_max,
            "residual_rms": self.residual_rms,
            "scale": self.scale,
            "grid_size": int(len(self.grid)),
            "notes": self.notes,
        }


def _ev(e: Expr, grid: np.ndarray) -> np.ndarray:
    return np.asarray(evaluate(e, grid), dtype=float) * np.ones_like(grid)


def _report(cid, residual, scale, grid, tol, constants, notes="", force_violated=False):
    residual = np.abs(np.asarray(residual, dtype=float))
    rmax = float(residual.max())
    ok = rmax <= tol * scale or rmax == 0.0
    return ConditionReport(
        condition_id=cid,
        verdict="satisfied" if ok and not force_violated else "violated",
        constants=constants,
        residual_max=rmax,
        residual_rms=float(np.sqrt(np.mean(residual**2))),
        grid=grid,
        scale=float(scale),
        notes=notes,
    )


def _median_ratio(numerator: np.ndarray, denominator: np.ndarray) -> float:
    mag = np.abs(denominator)
    keep = mag > _EXCLUDE * mag.max() if mag.max() > 0 else np.zeros_like(mag, dtype=bool)
    if not np.any(keep):
        return 0.0
    return float(np.median(numerator[keep] / denominator[keep]))


def _negligible(constant_term: np.ndarray, other: np.ndarray, tol: float) -> bool:
    """True when the constant-carrying side is negligible, i.e. the constant is effectively 0."""
    return float(np.max(np.abs(constant_term))) <= tol * max(float(np.max(np.abs(other))), 1e-300)


def _nonvanishing(e: Expr, grid: np.ndarray, name: str) -> np.ndarray:
    try:
        vals = _ev(e, grid)
    except DomainError as exc:
        raise PreconditionError(f"{name} is not evaluable on the grid: {exc}") from exc
    if np.any(vals == 0.0):
        raise PreconditionError(f"{name} vanishes on the grid (at {grid[np.argmax(vals == 0.0)]:.6g})")
    return vals


def check_chiellini(p, q, domain, tol: float = DEFAULT_REL_TOL, samples: int = 201, variable: str = "x") -> ConditionReport:
    """d/dx(p/q) = S q with constant S != 0."""
    p = _as_expr(p, variable)
    q = _as_expr(q, variable)
    grid = make_grid(domain, samples)
    qv = _nonvanishing(q, grid, "q")
    lhs = _ev(differentiate(p / q), grid)
    if _negligible(lhs, qv, 0.0) and not np.any(lhs):
        return _report("chiellini", lhs, 0.0, grid, tol, {"S": 0.0},
                       "degenerate: d/dx(p/q) vanishes identically, S = 0 is excluded", True)
    S = _median_ratio(lhs, qv)
    rhs = S * qv
    residual = lhs - rhs
    scale = max(float(np.max(np.abs(rhs))), float(np.max(np.abs(lhs))))
    if _negligible(rhs, lhs, tol):
        return _report("chiellini", residual, scale, grid, tol, {"S": S}, "S = 0 is excluded", True)
    return _report("chiellini", residual, scale, grid, tol, {"S": S})


def check_theorem1(prob: LienardProblem, tol: float = DEFAULT_REL_TOL) -> ConditionReport:
    """d/dy(g/h) = -3k + f g/h - (2/9) g^3/h^2 (no free constants)."""
    require_quadratic_cubic(prob)
    grid = prob.grid
    hv = _nonvanishing(prob.h, grid, "h")
    f, k, g = _ev(prob.f, grid), _ev(prob.k, grid), _ev(prob.g, grid)
    lhs = _ev(differentiate(prob.g / prob.h), grid)
    terms = np.array([-3 * k, f * g / hv, -(2.0 / 9.0) * g**3 / hv**2])
    residual = lhs - terms.sum(axis=0)
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(terms))))
    return _report("T1", residual, scale, grid, tol, {})


def check_theorem2(
    prob: LienardProblem,
    tol: float = DEFAULT_REL_TOL,
    quad_tol: Tolerances = DEFAULT_TOL,
    H_anchor: float | None = None,
) -> ConditionReport:
    """g^2/(3h^2) - f/h = 1 / (6 S H(y) + C0/3) with H(y) = int_{a}^y h.

    (S, C0) come from a least-squares line through the reciprocal of the left
    side against H. The anchor ``a`` defaults to the left end of the domain;
    C0 depends on it, S does not.
    """
    require_quadratic_cubic(prob)
    grid = prob.grid
    hv = _nonvanishing(prob.h, grid, "h")
    f, g = _ev(prob.f, grid), _ev(prob.g, grid)
    disc = g**2 - 3 * f * hv
    if np.any(disc <= 0):
        bad = grid[np.argmax(disc <= 0)]
        raise PreconditionError(f"g^2 - 3 f h must be positive on the grid (fails at {bad:.6g})")
    lhs = g**2 / (3 * hv**2) - f / hv
    inv = 1.0 / lhs
    h_fn = lambda t: evaluate(prob.h, t) * np.ones_like(t)  # noqa: E731
    H = Antiderivative(h_fn, grid, quad_tol).values
    anchor = grid[0] if H_anchor is None else float(H_anchor)
    if anchor != grid[0]:
        H = H + integrate_adaptive(h_fn, anchor, grid[0], quad_tol)
    design = np.column_stack([H, np.ones_like(H)])
    (slope, intercept), *_ = np.linalg.lstsq(design, inv, rcond=None)
    fit = slope * H + intercept
    residual = inv - fit
    scale = float(np.max(np.abs(inv)))
    S = slope / 6.0
    constants = {"S": float(S), "C0": float(3.0 * intercept)}
    constants["H_anchor"] = float(anchor)
    if abs(slope) * (H.max() - H.min()) <= tol * scale:
        return _report("T2", residual, scale, grid, tol, constants,
                       "degenerate: slope vanishes, S = 0 is excluded", True)
    return _report("T2", residual, scale, grid, tol, constants, f"H anchored at y={anchor:g}")


THEOREM3_FORMS = ("first_order", "second_order")


def theorem3_parts(prob: LienardProblem, v_p: Expr, form: str = "first_order"):
    """Expressions (target, basis, pieces) with target = S * basis under the chosen form.

    With c = g/h + 3 v_p and lam = f + 2 g v_p + 3 h v_p^2:

    * ``first_order``:  lam - (ln|c|)'  = S h c^2
    * ``second_order``: lam - (ln|c|)'' = S (h c^2)'
    """
    if form not in THEOREM3_FORMS:
        raise ValueError(f"form must be one of {THEOREM3_FORMS}")
    c = simplify(prob.g / prob.h + 3 * v_p)
    lam = simplify(prob.f + 2 * prob.g * v_p + 3 * prob.h * v_p**2)
    dlog = differentiate(apply("ln", apply("abs", c)))
    hc2 = simplify(prob.h * c**2)
    if form == "first_order":
        return lam, dlog, hc2, c
    return lam, differentiate(dlog), differentiate(hc2), c


def check_theorem3(
    prob: LienardProblem,
    v_p,
    tol: float = DEFAULT_REL_TOL,
    form: str = "first_order",
    particular_tol: float = 1e-8,
) -> ConditionReport:
    """Condition on f making the Abel equation integrable for a known particular solution v_p.

    ``form="first_order"`` is f = (ln|c|)' + S h c^2 - 2 g v_p - 3 h v_p^2
    (c = g/h + 3 v_p), the form under which the theta-substitution separates.
    ``form="second_order"`` checks its differentiated variant
    f = (ln|c|)'' + S (h c^2)' - 2 g v_p - 3 h v_p^2. S is fitted by least
    squares through the origin.
    """
    require_quadratic_cubic(prob)
    v_p = _as_expr(v_p, "y")
    grid = prob.grid
    _nonvanishing(prob.h, grid, "h")
    check_particular(lienard_to_abel(prob), v_p, particular_tol)
    lam, log_term, basis, c = theorem3_parts(prob, v_p, form)
    _nonvanishing(c, grid, "g/h + 3 v_p")
    lam_v = _ev(lam, grid)
    log_v = _ev(log_term, grid)
    basis_v = _ev(basis, grid)
    target = lam_v - log_v
    pieces = np.abs(np.array([_ev(prob.f, grid), lam_v - _ev(prob.f, grid), log_v]))
    other_scale = float(np.max(pieces))
    denom = float(basis_v @ basis_v)
    if denom == 0.0 or _negligible(basis_v, pieces, 1e-14):
        return _report("T3", target, max(other_scale, 1e-300), grid, tol, {},
                       f"degenerate ({form}): the S-basis vanishes, S is not identifiable", True)
    S = float(target @ basis_v) / denom
    residual = target - S * basis_v
    scale = max(other_scale, float(np.max(np.abs(S * basis_v))))
    notes = f"form={form}"
    if _negligible(S * basis_v, pieces, tol):
        return _report("T3", residual, scale, grid, tol, {"S": S}, notes + "; S = 0 is excluded", True)
    return _report("T3", residual, scale, grid, tol, {"S": S}, notes)


def generalized_chiellini_parts(prob: LienardProblem, P: float = 1.0):
    """LHS d/dy[(f/k)^(1/(n-m))] and the two equivalent right-hand bases (without S)."""
    n, m = prob.n, prob.m
    ratio = simplify(prob.f / prob.k)
    lhs = differentiate(ratio ** (1.0 / (n - m)))
    basis_a = simplify(P ** (2.0 - m) * prob.f * ratio ** ((3.0 - n) / (n - m)))
    basis_b = simplify(P ** (2.0 - m) * prob.k * ratio ** ((3.0 - m) / (n - m)))
    return lhs, basis_a, basis_b


def check_generalized_chiellini(
    prob: LienardProblem,
    tol: float = DEFAULT_REL_TOL,
    P: float = 1.0,
    form: str = "a",
) -> ConditionReport:
    """d/dy[(f/k)^(1/(n-m))] = S P^(2-m) f (f/k)^((3-n)/(n-m))   (form "a")
    or the equivalent  ... = S P^(2-m) k (f/k)^((3-m)/(n-m))        (form "b").

    Needs g = h = 0 and f/k > 0. Only S P^(2-m) is identifiable, so P is
    fixed by the caller (default 1) and S is reported.
    """
    grid = prob.grid
    if not (identically_zero(prob.g, grid) and identically_zero(prob.h, grid)):
        raise PreconditionError("the generalized Chiellini condition needs g = h = 0")
    if form not in ("a", "b"):
        raise ValueError("form must be 'a' or 'b'")
    kv = _nonvanishing(prob.k, grid, "k")
    fv = _ev(prob.f, grid)
    if np.any(fv / kv <= 0):
        raise PreconditionError("f/k must be positive on the grid (real powers)")
    lhs_e, basis_a, basis_b = generalized_chiellini_parts(prob, P)
    lhs = _ev(lhs_e, grid)
    ba = _ev(basis_a, grid)
    bb = _ev(basis_b, grid)
    basis = ba if form == "a" else bb
    cid = "T4a" if form == "a" else "T4b"
    S = _median_ratio(lhs, basis)
    S_other = _median_ratio(lhs, bb if form == "a" else ba)
    residual = lhs - S * basis
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(S * basis))))
    constants = {"S": S, "P": float(P)}
    agree = abs(S - S_other) <= 1e-10 * max(1.0, abs(S))
    notes = f"second form {'agrees' if agree else 'DISAGREES'} (S={S_other:.12g})"
    if _negligible(S * basis, lhs, tol):
        return _report(cid, residual, scale, grid, tol, constants,
                       "degenerate: S = 0 (left side vanishes)", True)
    return _report(cid, residual, scale, grid, tol, constants, notes, not agree)


def check_riccati(f, k, domain, tol: float = DEFAULT_REL_TOL, samples: int = 201) -> ConditionReport:
    """d/dy sqrt(f/k) = K f for the reduced Riccati equation v' = f + k v^2 (K = 0 allowed)."""
    f = _as_expr(f, "y")
    k = _as_expr(k, "y")
    grid = make_grid(domain, samples)
    kv = _nonvanishing(k, grid, "k")
    fv = _nonvanishing(f, grid, "f")
    if np.any(fv / kv <= 0):
        raise PreconditionError("f/k must be positive on the grid")
    lhs = _ev(differentiate(apply("sqrt", f / k)), grid)
    K = _median_ratio(lhs, fv)
    residual = lhs - K * fv
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(K * fv))))
    return _report("riccati", residual, scale, grid, tol, {"K": K})


def applicable_conditions(prob: LienardProblem) -> list[str]:
    """Condition ids that make sense for the exponents and coefficients of ``prob``."""
    grid = prob.grid
    ids = []
    if (prob.n, prob.m) == (2.0, 3.0):
        ids += ["T1", "T2"]
    if identically_zero(prob.g, grid) and identically_zero(prob.h, grid):
        ids.append("T4a")
        if (prob.n, prob.m) == (3.0, 1.0):
            ids.append("riccati")
    return ids


__all__ = [
    "ConditionReport",
    "CONDITION_IDS",
    "check_chiellini",
    "check_theorem1",
    "check_theorem2",
    "check_theorem3",
    "check_generalized_chiellini",
    "check_riccati",
    "applicable_conditions",
    "ShapeError",
]
