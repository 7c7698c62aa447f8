"""Invariants, normal form and particular-solution reduction of y' = p y^3 + q y^2 + r y + s.

Relative invariants are built symbolically and only then sampled, so the
recursion never differentiates numerical data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotParticularSolutionError, PreconditionError
from .expr import Const, Expr, differentiate, evaluate, simplify
from .model import ClassicalAbel, _as_expr
from .numerics import DEFAULT_TOL, Antiderivative, Tolerances

S3_VARIANTS = ("standard", "normal_form")
CONSTANCY_TOL = 1e-9


def _ev(e: Expr, x: np.ndarray) -> np.ndarray:
    return np.asarray(evaluate(e, x), dtype=float) * np.ones_like(x)


def _is_constant(values: np.ndarray, tol: float) -> bool:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return False
    return float(np.ptp(finite)) <= tol * max(1.0, float(np.max(np.abs(finite))))


# ------------------------------------------------------------ relative invariants


@dataclass
class InvariantSequence:
    """S_3, S_5, ... as expressions and as samples on ``grid``."""

    exprs: list
    values: list
    weights: list
    variant: str
    grid: np.ndarray = field(repr=False)

    def __getitem__(self, weight: int) -> np.ndarray:
        return self.values[self.weights.index(weight)]


def s3_expr(eq: ClassicalAbel, variant: str = "standard") -> Expr:
    """Weight-3 relative invariant.

    ``standard``:    s p^3 + (1/3) [2 q^2/9 - r q p + p q' - q p']
    ``normal_form``: s p^2 + (1/3) [2 q^3/9 - r q p + p q' - q p'],
    i.e. p^2 times the free term of the depressed equation. Both agree when
    p = 1 and q = 0.
    """
    if variant not in S3_VARIANTS:
        raise ValueError(f"variant must be one of {S3_VARIANTS}")
    p, q, r, s = eq.p, eq.q, eq.r, eq.s
    dp, dq = differentiate(p), differentiate(q)
    if variant == "standard":
        lead, qterm = s * p**3, Const(2.0 / 9.0) * q**2
    else:
        lead, qterm = s * p**2, Const(2.0 / 9.0) * q**3
    return simplify(lead + Const(1.0 / 3.0) * (qterm - r * q * p + p * dq - q * dp))


def relative_invariants(eq: ClassicalAbel, count: int = 4, variant: str = "standard") -> InvariantSequence:
    """S_3 and the recursion S_{2m+1} = p S'_{2m-1} - (2m-1) S_{2m-1} [p' + r p - q^2/3]."""
    if count < 2:
        raise PreconditionError("count must be at least 2")
    eq.require_cubic()
    bracket = simplify(differentiate(eq.p) + eq.r * eq.p - eq.q**2 / 3)
    exprs = [s3_expr(eq, variant)]
    for m in range(2, count + 1):
        prev = exprs[-1]
        exprs.append(simplify(eq.p * differentiate(prev) - (2 * m - 1) * prev * bracket))
    grid = eq.grid
    return InvariantSequence(
        exprs=exprs,
        values=[_ev(e, grid) for e in exprs],
        weights=[2 * m + 1 for m in range(1, count + 1)],
        variant=variant,
        grid=grid,
    )


# ------------------------------------------------------------ absolute invariants


@dataclass
class AbsoluteInvariants:
    """I1 = S5^3/S3^5, I2 = S3 S7/S5^2, I3 = S9/S3^2 sampled on the grid.

    Points where a denominator vanishes hold NaN and are listed in
    ``excluded``. An invariant whose denominator vanishes everywhere is
    ``None`` (undefined).
    """

    grid: np.ndarray = field(repr=False)
    I1: np.ndarray | None
    I2: np.ndarray | None
    I3: np.ndarray | None
    constant: dict
    values: dict
    excluded: dict

    def defined(self, name: str) -> bool:
        return getattr(self, name) is not None


def _ratio(num: np.ndarray, den: np.ndarray):
    mag = np.abs(den)
    bad = mag <= 1e-14 * max(float(mag.max()), 1e-300) if mag.max() > 0 else np.ones_like(mag, dtype=bool)
    if np.all(bad):
        return None, np.arange(len(den))
    out = np.full_like(num, np.nan)
    out[~bad] = num[~bad] / den[~bad]
    return out, np.nonzero(bad)[0]


I3_FORMS = ("standard", "weight_zero")


def absolute_invariants(seq: InvariantSequence, tol: float = CONSTANCY_TOL, i3_form: str = "standard") -> AbsoluteInvariants:
    """I1 = S5^3/S3^5, I2 = S3 S7/S5^2 and I3 = S9/S3^2.

    S9/S3^2 carries weight 3, so it is not invariant under y -> lam y;
    ``i3_form="weight_zero"`` uses S9/S3^3 instead. The two agree when S3 = 1.
    """
    if i3_form not in I3_FORMS:
        raise ValueError(f"i3_form must be one of {I3_FORMS}")
    S = dict(zip(seq.weights, seq.values))
    if 5 not in S:
        raise PreconditionError("absolute invariants need at least S3 and S5")
    i3_den = S[3] ** (2 if i3_form == "standard" else 3)
    specs = {"I1": (S[5] ** 3, S[3] ** 5), "I2": (None if 7 not in S else S[3] * S[7], S[5] ** 2),
             "I3": (None if 9 not in S else S[9], i3_den)}
    out, constant, values, excluded = {}, {}, {}, {}
    for name, (num, den) in specs.items():
        if num is None:
            out[name] = None
            continue
        arr, bad = _ratio(num, den)
        out[name] = arr
        excluded[name] = seq.grid[bad].tolist()
        if arr is not None:
            constant[name] = _is_constant(arr, tol)
            if constant[name]:
                values[name] = float(np.nanmean(arr))
    return AbsoluteInvariants(seq.grid, out["I1"], out["I2"], out["I3"], constant, values, excluded)


def invariant_profile_match(eqA: ClassicalAbel, eqB: ClassicalAbel, tol: float = 1e-8, variant: str = "standard") -> dict:
    """Heuristic equivalence test from the absolute invariants.

    Constant I1 on both sides: "candidate" when I1 (and I2, where defined)
    agree, otherwise "distinct". Exactly one constant: "distinct". Both
    varying: the relation I2 = F(I1) must coincide on the overlap of the I1
    ranges; if that relation is unavailable the verdict is "inconclusive".
    """
    invs = []
    for eq in (eqA, eqB):
        inv = absolute_invariants(relative_invariants(eq, 4, variant))
        if inv.I1 is None:
            raise PreconditionError("I1 is undefined (S3 vanishes identically)")
        invs.append(inv)
    a, b = invs
    result = {"verdict": "inconclusive", "gap": float("nan"), "reason": ""}
    ca, cb = a.constant.get("I1", False), b.constant.get("I1", False)
    if ca and cb:
        gap = abs(a.values["I1"] - b.values["I1"])
        scale = max(1.0, abs(a.values["I1"]), abs(b.values["I1"]))
        ok = gap <= tol * scale
        if ok and a.I2 is not None and b.I2 is not None and "I2" in a.values and "I2" in b.values:
            gap2 = abs(a.values["I2"] - b.values["I2"])
            ok = gap2 <= tol * max(1.0, abs(a.values["I2"]))
            gap = max(gap, gap2)
        result.update(verdict="candidate" if ok else "distinct", gap=gap, reason="constant invariants")
        return result
    if ca != cb:
        result.update(verdict="distinct", reason="I1 constant for one equation only")
        return result
    if a.I2 is None or b.I2 is None:
        result["reason"] = "I2 undefined, no functional relation to compare"
        return result
    curves = []
    for inv in (a, b):
        mask = np.isfinite(inv.I1) & np.isfinite(inv.I2)
        i1, i2 = inv.I1[mask], inv.I2[mask]
        d = np.diff(i1)
        if not (np.all(d > 0) or np.all(d < 0)):
            result["reason"] = "I1 is not monotone, relation I2(I1) is multivalued"
            return result
        order = np.argsort(i1)
        curves.append((i1[order], i2[order]))
    lo = max(curves[0][0][0], curves[1][0][0])
    hi = min(curves[0][0][-1], curves[1][0][-1])
    if not lo < hi:
        result["reason"] = "I1 ranges do not overlap"
        return result
    probe = np.linspace(lo, hi, 50)
    fa = np.interp(probe, *curves[0])
    fb = np.interp(probe, *curves[1])
    gap = float(np.max(np.abs(fa - fb)))
    scale = max(1.0, float(np.max(np.abs(fa))))
    # linear interpolation limits the attainable agreement
    ok = gap <= max(tol, 1e-4) * scale
    result.update(verdict="candidate" if ok else "distinct", gap=gap, reason="relation I2(I1) compared")
    return result


# ------------------------------------------------------------ normal form


@dataclass
class NormalFormRecord:
    """y = omega(x) eta(xi(x)) - q/(3p) turns the equation into d eta/d xi = eta^3 + I.

    omega and xi are anchored at the left end of the domain.
    """

    grid: np.ndarray = field(repr=False)
    omega: np.ndarray
    xi: np.ndarray
    I: np.ndarray
    integrable: bool
    I_value: float | None
    equation: str = "d eta / d xi = eta^3 + I(x)"


def normal_form(eq: ClassicalAbel, tol: Tolerances = DEFAULT_TOL, constancy_tol: float = CONSTANCY_TOL) -> NormalFormRecord:
    grid = eq.grid
    pv = _ev(eq.p, grid)
    if np.any(pv == 0.0):
        raise PreconditionError(f"p vanishes on the grid (at x={grid[np.argmax(pv == 0.0)]:.6g})")
    lin = simplify(eq.r - eq.q**2 / (3 * eq.p))
    A = Antiderivative(lambda t: _ev(lin, np.atleast_1d(t)), grid, tol)
    omega = np.exp(A.values)
    xi = Antiderivative(lambda t: _ev(eq.p, np.atleast_1d(t)) * np.exp(2.0 * A(t)), grid, tol).values
    free = simplify(
        eq.s + Const(1.0 / 3.0) * differentiate(eq.q / eq.p) - eq.r * eq.q / (3 * eq.p)
        + Const(2.0 / 27.0) * eq.q**3 / eq.p**2
    )
    I = _ev(free, grid) / (pv * omega**3)
    flag = _is_constant(I, constancy_tol)
    return NormalFormRecord(grid, omega, xi, I, flag, float(np.mean(I)) if flag else None)


# ------------------------------------------------------------ particular reduction


@dataclass
class ClassicalReduction:
    """u = E / (y - y1) gives du/dx + Phi1/u + Phi2 = 0.

    E = exp int [3 p y1^2 + 2 q y1 + r], Phi1 = p E^2, Phi2 = (3 p y1 + q) E.
    """

    eq: ClassicalAbel = field(repr=False)
    y1: Expr
    grid: np.ndarray = field(repr=False)
    E: np.ndarray
    Phi1: np.ndarray
    Phi2: np.ndarray
    separable: bool
    max_residual: float
    _exponent: Antiderivative = field(repr=False, default=None)
    _phi1_integral: Antiderivative = field(repr=False, default=None)

    def general_solution(self, c: float, sign: int = 1, x=None):
        """y = y1 + E/u with u = sign sqrt(c - 2 int Phi1), valid when Phi2 = 0."""
        if not self.separable:
            raise PreconditionError("general solution by quadrature needs Phi2 = 0")
        x = self.grid if x is None else np.asarray(x, dtype=float)
        radicand = c - 2.0 * self._phi1_integral(x)
        if np.any(radicand <= 0):
            raise PreconditionError("c - 2 int Phi1 must be positive")
        u = sign * np.sqrt(radicand)
        return _ev(self.y1, x) + np.exp(self._exponent(x)) / u

    def solution_residual(self, c: float, sign: int = 1) -> float:
        """Max relative residual of the reconstructed solution, with analytic derivatives."""
        x = self.grid
        eq = self.eq
        y1 = _ev(self.y1, x)
        dy1 = _ev(differentiate(self.y1), x)
        E = np.exp(self._exponent(x))
        lam = _ev(3 * eq.p * self.y1**2 + 2 * eq.q * self.y1 + eq.r, x)
        u = sign * np.sqrt(c - 2.0 * self._phi1_integral(x))
        du = -_ev(eq.p, x) * E**2 / u
        y = y1 + E / u
        dy = dy1 + lam * E / u - E * du / u**2
        terms = np.abs(np.array([_ev(eq.p, x) * y**3, _ev(eq.q, x) * y**2, _ev(eq.r, x) * y, _ev(eq.s, x)]))
        return float(np.max(np.abs(dy - eq.rhs(x, y))) / max(float(terms.max()), 1.0))


def classical_particular_reduction(eq: ClassicalAbel, y1, rel_tol: float = 1e-8, tol: Tolerances = DEFAULT_TOL) -> ClassicalReduction:
    y1 = _as_expr(y1, eq.variable)
    x = eq.grid
    y1v = _ev(y1, x)
    terms = np.array([_ev(eq.p, x) * y1v**3, _ev(eq.q, x) * y1v**2, _ev(eq.r, x) * y1v, _ev(eq.s, x)])
    residual = _ev(differentiate(y1), x) - terms.sum(axis=0)
    scale = max(float(np.max(np.abs(terms))), 1.0)
    worst = int(np.argmax(np.abs(residual)))
    max_res = float(abs(residual[worst]))
    if max_res > rel_tol * scale:
        raise NotParticularSolutionError("y1 is not a particular solution", max_res, float(x[worst]))
    lam = simplify(3 * eq.p * y1**2 + 2 * eq.q * y1 + eq.r)
    expo = Antiderivative(lambda t: _ev(lam, np.atleast_1d(t)), x, tol)
    phi1 = Antiderivative(lambda t: _ev(eq.p, np.atleast_1d(t)) * np.exp(2.0 * expo(t)), x, tol)
    E = np.exp(expo.values)
    coeff = _ev(3 * eq.p * y1 + eq.q, x)
    coeff_scale = max(float(np.max(np.abs(_ev(3 * eq.p * y1, x)))), float(np.max(np.abs(_ev(eq.q, x)))), 1.0)
    separable = bool(np.all(np.abs(coeff) <= 1e-12 * coeff_scale))
    return ClassicalReduction(
        eq=eq, y1=y1, grid=x, E=E, Phi1=_ev(eq.p, x) * E**2, Phi2=coeff * E,
        separable=separable, max_residual=max_res, _exponent=expo, _phi1_integral=phi1,
    )


__all__ = [
    "InvariantSequence",
    "AbsoluteInvariants",
    "NormalFormRecord",
    "ClassicalReduction",
    "s3_expr",
    "relative_invariants",
    "absolute_invariants",
    "invariant_profile_match",
    "normal_form",
    "classical_particular_reduction",
]
