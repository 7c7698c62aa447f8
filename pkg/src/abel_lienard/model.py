"""Equation types and the exact transformations between them.

The extended Lienard equation

    y'' + f(y) (y')^n + k(y) (y')^m + g(y) y' + h(y) = 0

becomes, with u = y' and v = 1/u, the generalized Abel equation

    dv/dy = f v^alpha + k v^beta + g v^2 + h v^3,   alpha = 3 - n, beta = 3 - m.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, NotParticularSolutionError, PreconditionError, ShapeError
from .expr import Const, Expr, apply, differentiate, evaluate, parse, simplify
from .numerics import DEFAULT_TOL, Antiderivative, Tolerances

ZERO = Const(0.0)


def is_integer(value: float) -> bool:
    return float(value) == round(float(value))


def real_power(base, exponent: float):
    """``base ** exponent`` on the real line.

    Integer exponents accept any sign of base; other exponents need base > 0.
    """
    base = np.asarray(base, dtype=float)
    if is_integer(exponent):
        e = int(round(exponent))
        if e < 0 and np.any(base == 0):
            raise DomainError("zero raised to a negative power")
        with np.errstate(all="ignore"):
            out = base ** float(e)
    else:
        if np.any(base <= 0):
            raise DomainError(f"non-integer power {exponent:g} of a non-positive value")
        out = base**exponent
    return out if out.ndim else float(out)


def make_grid(domain: tuple[float, float], samples: int) -> np.ndarray:
    return np.linspace(domain[0], domain[1], samples)


def _as_expr(value, variable: str) -> Expr:
    if value is None:
        return ZERO
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    return parse(str(value), variable)


def identically_zero(e: Expr, grid: np.ndarray) -> bool:
    e = simplify(e)
    if isinstance(e, Const):
        return e.value == 0.0
    return bool(np.all(evaluate(e, grid) == 0.0))


@dataclass(frozen=True)
class LienardProblem:
    """y'' + f(y)(y')^n + k(y)(y')^m + g(y) y' + h(y) = 0 on a y-interval."""

    n: float
    m: float
    f: Expr
    k: Expr
    g: Expr = ZERO
    h: Expr = ZERO
    domain: tuple[float, float] = (0.0, 1.0)
    samples: int = 201

    def __post_init__(self):
        if not (self.n > 0 and self.m > 0):
            raise PreconditionError("exponents n and m must be positive")
        if self.n == self.m:
            raise PreconditionError("exponents n and m must differ")
        lo, hi = self.domain
        if not lo < hi:
            raise PreconditionError("domain must satisfy y_min < y_max")
        if int(self.samples) != self.samples or self.samples < 5:
            raise PreconditionError("samples must be an integer >= 5")
        for name in ("f", "k", "g", "h"):
            try:
                evaluate(getattr(self, name), self.grid)
            except DomainError as exc:
                raise PreconditionError(f"coefficient {name} is not evaluable on the domain: {exc}") from exc

    @classmethod
    def from_strings(cls, n, m, f=None, k=None, g=None, h=None, domain=(0.0, 1.0), samples=201):
        return cls(
            float(n), float(m),
            _as_expr(f, "y"), _as_expr(k, "y"), _as_expr(g, "y"), _as_expr(h, "y"),
            (float(domain[0]), float(domain[1])), int(samples),
        )

    @property
    def grid(self) -> np.ndarray:
        return make_grid(self.domain, self.samples)

    def force(self, y, u):
        """f u^n + k u^m + g u + h, so that y'' = -force(y, y')."""
        return (
            evaluate(self.f, y) * real_power(u, self.n)
            + evaluate(self.k, y) * real_power(u, self.m)
            + evaluate(self.g, y) * u
            + evaluate(self.h, y)
        )

    def force_terms(self, y, u) -> np.ndarray:
        return np.abs(np.array([
            evaluate(self.f, y) * real_power(u, self.n),
            evaluate(self.k, y) * real_power(u, self.m),
            evaluate(self.g, y) * u * np.ones_like(np.asarray(y, dtype=float)),
            evaluate(self.h, y) * np.ones_like(np.asarray(y, dtype=float)),
        ]))

    def with_domain(self, domain, samples=None) -> "LienardProblem":
        return LienardProblem(self.n, self.m, self.f, self.k, self.g, self.h,
                              tuple(domain), samples or self.samples)


@dataclass(frozen=True)
class GeneralizedAbel:
    """dv/dy = f v^alpha + k v^beta + g v^2 + h v^3."""

    alpha: float
    beta: float
    f: Expr
    k: Expr
    g: Expr
    h: Expr
    domain: tuple[float, float]
    samples: int = 201

    @property
    def grid(self) -> np.ndarray:
        return make_grid(self.domain, self.samples)

    @property
    def signed_v_allowed(self) -> bool:
        return is_integer(self.alpha) and is_integer(self.beta)

    def terms(self, y, v) -> np.ndarray:
        return np.array([
            evaluate(self.f, y) * real_power(v, self.alpha),
            evaluate(self.k, y) * real_power(v, self.beta),
            evaluate(self.g, y) * np.asarray(v, dtype=float) ** 2,
            evaluate(self.h, y) * np.asarray(v, dtype=float) ** 3,
        ])

    def rhs(self, y, v):
        return self.terms(y, v).sum(axis=0)


@dataclass(frozen=True)
class ClassicalAbel:
    """dy/dx = p(x) y^3 + q(x) y^2 + r(x) y + s(x)."""

    p: Expr
    q: Expr
    r: Expr
    s: Expr
    domain: tuple[float, float] = (0.0, 1.0)
    samples: int = 201
    variable: str = "x"

    def __post_init__(self):
        if not self.domain[0] < self.domain[1]:
            raise PreconditionError("domain must satisfy x_min < x_max")

    @classmethod
    def from_strings(cls, p, q=None, r=None, s=None, domain=(0.0, 1.0), samples=201, variable="x"):
        eq = cls(
            _as_expr(p, variable), _as_expr(q, variable), _as_expr(r, variable), _as_expr(s, variable),
            (float(domain[0]), float(domain[1])), int(samples), variable,
        )
        eq.require_cubic()
        return eq

    def require_cubic(self) -> None:
        """The classical Abel invariant: p is not identically zero on the domain."""
        if identically_zero(self.p, self.grid):
            raise PreconditionError("cubic coefficient p vanishes identically on the domain")

    @property
    def grid(self) -> np.ndarray:
        return make_grid(self.domain, self.samples)

    def rhs(self, x, y):
        return (evaluate(self.p, x) * y**3 + evaluate(self.q, x) * y**2
                + evaluate(self.r, x) * y + evaluate(self.s, x))


def lienard_to_abel(prob: LienardProblem) -> GeneralizedAbel:
    return GeneralizedAbel(3.0 - prob.n, 3.0 - prob.m, prob.f, prob.k, prob.g, prob.h,
                           prob.domain, prob.samples)


def quadratic_cubic_form(ab: GeneralizedAbel) -> ClassicalAbel:
    """View dv/dy = k + f v + g v^2 + h v^3 as a classical Abel equation in y.

    Only valid for alpha = 1, beta = 0 (n = 2, m = 3).
    """
    if (ab.alpha, ab.beta) != (1.0, 0.0):
        raise ShapeError(f"quadratic-cubic form needs (alpha, beta) = (1, 0), got ({ab.alpha:g}, {ab.beta:g})")
    # h may vanish here (linear special case), so require_cubic is not applied
    return ClassicalAbel(ab.h, ab.g, ab.f, ab.k, ab.domain, ab.samples, "y")


def require_quadratic_cubic(prob) -> None:
    n, m = (prob.n, prob.m) if isinstance(prob, LienardProblem) else (3 - prob.alpha, 3 - prob.beta)
    if (n, m) != (2.0, 3.0):
        raise ShapeError(f"operation needs n = 2, m = 3; got n = {n:g}, m = {m:g}")


# --------------------------------------------------------- particular solutions


def vp0_expr(g: Expr, h: Expr) -> Expr:
    """The particular-solution candidate -g / (3 h)."""
    return simplify(-g / (3 * h))


def vp_unit_E_expr(f: Expr, g: Expr, h: Expr, sign: int = 1) -> Expr:
    """Roots of 3 h v^2 + 2 g v + f = 0, for which the integrating factor is 1."""
    disc = g**2 / (9 * h**2) - f / (3 * h)
    return simplify(-g / (3 * h) + sign * apply("sqrt", disc))


def particular_residual(ab: GeneralizedAbel, v_p: Expr, grid: np.ndarray | None = None):
    """Pointwise residual of v_p' - (k + f v_p + g v_p^2 + h v_p^3) and its scale."""
    y = ab.grid if grid is None else grid
    vp = evaluate(v_p, y)
    dvp = evaluate(differentiate(v_p), y)
    terms = np.array([
        evaluate(ab.k, y) * np.ones_like(y),
        evaluate(ab.f, y) * vp,
        evaluate(ab.g, y) * vp**2,
        evaluate(ab.h, y) * vp**3,
    ])
    residual = dvp - terms.sum(axis=0)
    scale = max(float(np.max(np.abs(terms))), 1.0)
    return residual, scale


def check_particular(ab: GeneralizedAbel, v_p: Expr, rel_tol: float = 1e-8) -> float:
    """Raise NotParticularSolutionError unless v_p solves the quadratic-cubic Abel equation."""
    y = ab.grid
    residual, scale = particular_residual(ab, v_p, y)
    worst = int(np.argmax(np.abs(residual)))
    max_res = float(abs(residual[worst]))
    if max_res > rel_tol * scale:
        raise NotParticularSolutionError("v_p is not a particular solution", max_res, float(y[worst]))
    return max_res


@dataclass
class ParticularReduction:
    """Reduction F = v - v_p, w = F / E of the quadratic-cubic Abel equation.

    ``E(y) = exp(int_{y_min}^y [f + 2 g v_p + 3 h v_p^2])`` and w obeys
    ``w' = (g + 3 h v_p) E w^2 + h E^2 w^3``.
    """

    v_p: Expr
    linear_coeff: Expr
    quadratic_coeff: Expr
    cubic_coeff: Expr
    exponent: Antiderivative
    max_residual: float = 0.0
    notes: list[str] = field(default_factory=list)

    def E(self, y):
        return np.exp(self.exponent(y))

    def U(self, y, w):
        return self.E(y) * w

    def F_rhs(self, y, F):
        return (evaluate(self.linear_coeff, y) * F + evaluate(self.quadratic_coeff, y) * F**2
                + evaluate(self.cubic_coeff, y) * F**3)

    def w_rhs(self, y, w):
        E = self.E(y)
        return evaluate(self.quadratic_coeff, y) * E * w**2 + evaluate(self.cubic_coeff, y) * E**2 * w**3

    def v_from_w(self, y, w):
        return evaluate(self.v_p, y) + self.E(y) * w


def reduce_by_particular(
    ab: GeneralizedAbel,
    v_p: Expr | str,
    rel_tol: float = 1e-8,
    tol: Tolerances = DEFAULT_TOL,
) -> ParticularReduction:
    require_quadratic_cubic(ab)
    v_p = _as_expr(v_p, "y")
    max_res = check_particular(ab, v_p, rel_tol)
    linear = simplify(ab.f + 2 * ab.g * v_p + 3 * ab.h * v_p**2)
    quad = simplify(ab.g + 3 * ab.h * v_p)

    def exponent_integrand(t, _e=linear):
        return evaluate(_e, t)

    return ParticularReduction(
        v_p=v_p,
        linear_coeff=linear,
        quadratic_coeff=quad,
        cubic_coeff=ab.h,
        exponent=Antiderivative(exponent_integrand, ab.grid, tol),
        max_residual=max_res,
    )


def expr_fn(e: Expr) -> Callable:
    """Vectorised callable wrapper around an expression."""
    return lambda t: evaluate(e, t)
