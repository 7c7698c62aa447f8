"""Closed-form and quadrature solutions of the integrable Abel/Lienard families.

All indefinite integrals are anchored at the left end of the domain, and every
integration constant (C, K0, anchors, x0) is an explicit argument. Each
solver returns a :class:`SolutionCurve` whose Abel residual is computed right
after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchCrossingError,
    DomainError,
    NoSignChangeError,
    NumericalError,
    PreconditionError,
    RangeError,
)
from .expr import Expr, apply, evaluate, simplify
from .model import (
    GeneralizedAbel,
    LienardProblem,
    _as_expr,
    check_particular,
    identically_zero,
    is_integer,
    lienard_to_abel,
    make_grid,
    particular_residual,
    real_power,
    require_quadratic_cubic,
    vp0_expr,
)
from .numerics import DEFAULT_TOL, Antiderivative, Tolerances, find_root, integrate_adaptive

ABEL_BOUND = 1e-6
NORMALIZATIONS = ("continuous", "classical")
_LN2 = math.log(2.0)


# ------------------------------------------------------------------ curve type


@dataclass
class SolutionCurve:
    """Sampled solution (y_i, v_i, x_i) with the constants that produced it.

    ``pieces`` are contiguous index ranges separated by poles of v; the Abel
    residual is evaluated per piece. ``monotone_segments`` further split the
    pieces where v changes sign, so that y(x) is single-valued on each.
    """

    theorem_id: str
    y: np.ndarray
    v: np.ndarray
    x: np.ndarray
    constants: dict
    pieces: list = field(default_factory=list)
    monotone_segments: list = field(default_factory=list)
    theta: np.ndarray | None = None
    notes: list = field(default_factory=list)
    abel_max_rel: float = float("nan")

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.y.tolist(), self.v.tolist(), self.x.tolist()))

    @property
    def u(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.v

    @property
    def verified(self) -> bool:
        return self.abel_max_rel <= ABEL_BOUND


def _split_by_sign(v: np.ndarray, pieces) -> list[tuple[int, int]]:
    segments = []
    for i0, i1 in pieces:
        start = i0
        for i in range(i0 + 1, i1 + 1):
            if np.sign(v[i]) != np.sign(v[i - 1]) or v[i] == 0.0:
                if i - 1 >= start:
                    segments.append((start, i - 1))
                start = i if v[i] != 0.0 else i + 1
        if start <= i1:
            segments.append((start, i1))
    return [s for s in segments if np.all(v[s[0]:s[1] + 1] != 0.0)]


def cumulative_x(y: np.ndarray, v: np.ndarray, x0: float) -> np.ndarray:
    """x0 + int v dy on sampled data via the Hermite-corrected trapezoid rule.

    Slopes come from 5-point differencing, so the rule is fourth order.
    """
    from .verify import derivative_on_samples

    dv = derivative_on_samples(y, v)
    dy = np.diff(y)
    panels = 0.5 * dy * (v[:-1] + v[1:]) + dy**2 / 12.0 * (dv[:-1] - dv[1:])
    return x0 + np.concatenate([[0.0], np.cumsum(panels)])


def _finish(theorem_id, y, v, constants, equation, x0, pieces=None, theta=None, notes=None) -> SolutionCurve:
    """Drop tiny pieces, integrate x per piece, compute the Abel residual."""
    from .verify import abel_residual

    notes = list(notes or [])
    pieces = pieces or [(0, len(y) - 1)]
    kept = [p for p in pieces if p[1] - p[0] + 1 >= 5]
    if len(kept) < len(pieces):
        notes.append("pieces shorter than 5 samples next to poles were dropped")
    if not kept:
        raise RangeError("no piece of the solution has 5 or more samples")
    idx = np.concatenate([np.arange(a, b + 1) for a, b in kept])
    new_pieces, start = [], 0
    for a, b in kept:
        new_pieces.append((start, start + b - a))
        start += b - a + 1
    y, v = y[idx], v[idx]
    theta = None if theta is None else theta[idx]
    x = np.empty_like(y)
    for n, (a, b) in enumerate(new_pieces):
        x[a:b + 1] = cumulative_x(y[a:b + 1], v[a:b + 1], x0)
        if n:
            notes.append(f"x restarts at x0 on the piece starting at y={y[a]:.6g}")
    constants = dict(constants)
    constants.setdefault("x0", float(x0))
    curve = SolutionCurve(
        theorem_id=theorem_id,
        y=y, v=v, x=x,
        constants=constants,
        pieces=new_pieces,
        monotone_segments=_split_by_sign(v, new_pieces),
        theta=theta,
        notes=notes,
    )
    curve.abel_max_rel = abel_residual(curve, equation).max_rel
    if not curve.verified:
        curve.notes.append(f"Abel residual {curve.abel_max_rel:.2e} exceeds {ABEL_BOUND:g}")
    return curve


def _ev(e: Expr, y: np.ndarray) -> np.ndarray:
    return np.asarray(evaluate(e, y), dtype=float) * np.ones_like(y)


def _default_x0(domain, x0):
    return float(domain[0]) if x0 is None else float(x0)


def _pick_by_residual(candidates: dict, equation) -> tuple[str, np.ndarray, dict]:
    """Return the (label, v) candidate with the smallest Abel residual and all scores."""
    from .verify import abel_residual

    scores = {}
    for label, (y, v) in candidates.items():
        probe = SolutionCurve("probe", y, v, y, {})
        try:
            scores[label] = abel_residual(probe, equation).max_rel
        except PreconditionError:
            scores[label] = math.inf
    best = min(scores, key=lambda k: scores[k])
    return best, candidates[best][1], scores


# ------------------------------------------------------------- Chiellini G


def _G_scalar(theta: float, S: float, normalization: str) -> float:
    if theta == 0.0:
        raise DomainError("G(theta, S) is singular at theta = 0")
    Q = theta * theta + theta + S
    if Q == 0.0:
        raise DomainError("G(theta, S) is singular at a root of theta^2 + theta + S")
    z = 1.0 + 2.0 * theta
    D = 4.0 * S - 1.0
    if D == 0.0:
        out = math.log(abs(theta)) - math.log(abs(z)) + 1.0 / z
        return out + _LN2 if normalization == "continuous" else out
    base = math.log(abs(theta)) - 0.5 * math.log(abs(Q))
    if D > 0.0:
        eps = math.sqrt(D)
        if normalization == "continuous":
            # arccot with range (0, pi): continuous in theta and tends to the S = 1/4 form
            return base + math.atan2(1.0, z / eps) / eps
        return base - math.atan(z / eps) / eps
    delta = math.sqrt(-D)
    r = z / delta
    if abs(r) < 1.0:
        corr = math.atanh(r)
    elif r > 1.0:
        corr = 0.5 * math.log1p(2.0 / (r - 1.0))
    else:
        corr = -0.5 * math.log1p(2.0 / (-r - 1.0))
    return base + corr / delta


def chiellini_G(theta, S: float, normalization: str = "continuous"):
    """G(theta, S) with dG/dtheta = S / (theta (theta^2 + theta + S)).

    ``normalization="classical"`` uses the classical closed forms verbatim; they
    differ from each other by additive constants so G jumps as S crosses 1/4.
    ``"continuous"`` (default) shifts the S > 1/4 and S = 1/4 forms so that G
    is continuous in S at every theta > 0. For S < 1/4 outside the arctanh
    domain the real logarithmic form of the same antiderivative is used.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    S = float(S)
    if S == 0.0:
        raise PreconditionError("S must be nonzero")
    if np.ndim(theta) == 0:
        return _G_scalar(float(theta), S, normalization)
    arr = np.asarray(theta, dtype=float)
    return np.array([_G_scalar(float(t), S, normalization) for t in arr.ravel()]).reshape(arr.shape)


def chiellini_singular_points(S: float) -> list[float]:
    """theta = 0 and the real roots of theta^2 + theta + S, sorted."""
    pts = [0.0]
    D = 1.0 - 4.0 * S
    if D == 0.0:
        pts.append(-0.5)
    elif D > 0.0:
        d = math.sqrt(D)
        pts += [(-1.0 - d) / 2.0, (-1.0 + d) / 2.0]
    return sorted(pts)


def chiellini_segment(theta: float, S: float) -> tuple[float, float]:
    """Open theta-interval on which G is smooth and monotone, containing ``theta``."""
    pts = chiellini_singular_points(S)
    for p in pts:
        if abs(theta - p) <= 1e-9 * (1.0 + abs(p)):
            raise BranchCrossingError(f"theta = {theta:.12g} sits on a singular point {p:.12g} of G")
    lo = max([p for p in pts if p < theta], default=-math.inf)
    hi = min([p for p in pts if p > theta], default=math.inf)
    return lo, hi


def _expand_bracket(fn, start: float, direction: float, lo: float, hi: float):
    """Walk from ``start`` toward one end of (lo, hi) until ``fn`` changes sign."""
    f0 = fn(start)
    if f0 == 0.0:
        return start, start
    bound = hi if direction > 0 else lo
    prev = start
    for k in range(1, 1100):
        if math.isinf(bound):
            cand = start + direction * (abs(start) + 1.0) * 2.0**k
            if abs(cand) > 1e300:
                break
        else:
            cand = bound - (bound - start) * 2.0**-k
            if cand == bound or cand == prev:
                break
        try:
            fc = fn(cand)
        except (DomainError, NumericalError):
            break
        if (fc > 0) != (f0 > 0) or fc == 0.0:
            return (prev, cand) if prev < cand else (cand, prev)
        prev = cand
    raise RangeError("target lies outside the range of the monotone branch")


def _invert_monotone(fn, start: float, slope_sign: float, lo: float, hi: float, tol: Tolerances) -> float:
    """Root of increasing-or-decreasing ``fn`` on (lo, hi), searching outward from ``start``."""
    f0 = fn(start)
    if f0 == 0.0:
        return start
    direction = -slope_sign if f0 > 0 else slope_sign
    a, b = _expand_bracket(fn, start, direction, lo, hi)
    if a == b:
        return a
    return find_root(fn, a, b, tol)


def chiellini_theta(
    target_ratio: float,
    S: float,
    K0: float,
    bracket: tuple[float, float] | None = None,
    normalization: str = "continuous",
    tol: Tolerances = DEFAULT_TOL,
) -> float:
    """theta with K0^-1 exp(G(theta, S)) = target_ratio on a monotone branch of G.

    The default branch is the principal one: theta > 0, beyond any positive
    root of theta^2 + theta + S.
    """
    prod = float(target_ratio) * float(K0)
    if not prod > 0.0:
        raise RangeError("K0 * target must be positive since exp(G) > 0")
    goal = math.log(prod)
    if bracket is None:
        pts = [p for p in chiellini_singular_points(S) if p >= 0.0]
        lo, hi = max(pts), math.inf
    else:
        lo, hi = map(float, bracket)
        mid = 0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0
        seg = chiellini_segment(mid, S)
        if lo < seg[0] or hi > seg[1]:
            raise BranchCrossingError("bracket straddles a singular point of G; split it")
    start = lo + 1.0 if math.isinf(hi) else 0.5 * (lo + hi)
    slope = math.copysign(1.0, S / (start * (start * start + start + S)))

    def fn(t):
        return _G_scalar(t, S, normalization) - goal

    return _invert_monotone(fn, start, slope, lo, hi, tol)


def _theta_profile(delta_G: np.ndarray, S: float, theta_a: float, normalization: str, tol: Tolerances) -> np.ndarray:
    """theta_i with G(theta_i) = G(theta_a) + delta_G_i on the anchor's branch."""
    lo, hi = chiellini_segment(theta_a, S)
    G_a = _G_scalar(theta_a, S, normalization)
    slope = math.copysign(1.0, S / (theta_a * (theta_a**2 + theta_a + S)))
    out = np.empty_like(delta_G)
    prev = theta_a
    for i, dg in enumerate(delta_G):
        goal = G_a + dg

        def fn(t, goal=goal):
            return _G_scalar(t, S, normalization) - goal

        try:
            prev = _invert_monotone(fn, prev, slope, lo, hi, tol)
        except RangeError as exc:
            raise RangeError(f"theta leaves its branch (escapes to infinity) at sample {i}: {exc}") from exc
        for p in (lo, hi):
            if math.isfinite(p) and abs(prev - p) <= tol.root_abs:
                raise BranchCrossingError(f"theta reaches the singular point {p:.12g} of G")
        out[i] = prev
    return out


def _anchor_order(grid: np.ndarray, y_a: float) -> np.ndarray:
    """Grid indices ordered outward from the anchor, so each solve starts near the previous one."""
    if not grid[0] <= y_a <= grid[-1]:
        raise PreconditionError(f"anchor y={y_a:g} lies outside the domain")
    right = np.nonzero(grid >= y_a)[0]
    left = np.nonzero(grid < y_a)[0][::-1]
    return np.concatenate([right, left])


def _theta_on_grid(grid, y_a, delta_fn, S, theta_a, normalization, tol):
    order = _anchor_order(grid, y_a)
    theta = np.empty_like(grid)
    right = order[grid[order] >= y_a]
    left = order[grid[order] < y_a]
    for part in (right, left):
        if len(part):
            theta[part] = _theta_profile(delta_fn(grid[part]), S, theta_a, normalization, tol)
    return theta


# ------------------------------------------------------------------ Theorem 1


def solve_theorem1(
    prob: LienardProblem,
    C: float,
    branch: str = "+",
    x0: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> SolutionCurve:
    """v = +-E / (sqrt(2) sqrt(C - int h E^2)) - g/(3h),  E = exp int (f - g^2/(3h)).

    Both integrals start at the left end of the domain, so C is the value of
    the radicand there. ``branch="auto"`` keeps the sign with the smaller
    residual.
    """
    require_quadratic_cubic(prob)
    if branch not in ("+", "-", "auto"):
        raise ValueError("branch must be '+', '-' or 'auto'")
    grid = prob.grid
    hv = _ev(prob.h, grid)
    if np.any(hv == 0.0):
        raise PreconditionError("h vanishes on the grid")
    expo = simplify(prob.f - prob.g**2 / (3 * prob.h))
    A = Antiderivative(lambda t: evaluate(expo, t) * np.ones_like(t), grid, tol)
    hE2 = Antiderivative(lambda t: evaluate(prob.h, t) * np.exp(2.0 * A(t)), grid, tol)
    E = np.exp(A.values)
    radicand = C - hE2.values
    if np.any(radicand <= 0.0):
        bad = grid[np.argmax(radicand <= 0.0)]
        raise PreconditionError(f"C - int h E^2 must be positive; fails at y={bad:.6g}")
    w = E / (math.sqrt(2.0) * np.sqrt(radicand))
    vp = _ev(vp0_expr(prob.g, prob.h), grid)
    candidates = {"+": (grid, vp + w), "-": (grid, vp - w)}
    ab = lienard_to_abel(prob)
    notes = []
    if branch == "auto":
        branch, v, scores = _pick_by_residual(candidates, ab)
        notes.append(f"branch chosen by residual: {scores}")
    else:
        v = candidates[branch][1]
    constants = {"C": float(C), "branch": branch}
    return _finish("T1", grid, v, constants, ab, _default_x0(prob.domain, x0), notes=notes)


# ------------------------------------------------------------------ Theorem 2


def theorem2_particular(prob: LienardProblem, branch: str) -> Expr:
    """v_p = (sigma sqrt(g^2 - 3 f h) - g) / (3h), the root of 3 h v^2 + 2 g v + f = 0."""
    sigma = 1.0 if branch == "+" else -1.0
    a = simplify(sigma * apply("sqrt", prob.g**2 - 3 * prob.f * prob.h))
    return simplify((a - prob.g) / (3 * prob.h)), a


def solve_theorem2(
    prob: LienardProblem,
    S: float,
    K0: float | None = None,
    branch: str = "+",
    x0: float | None = None,
    theta_anchor: tuple[float, float] | None = None,
    normalization: str = "continuous",
    tol: Tolerances = DEFAULT_TOL,
    particular_tol: float = 1e-8,
) -> SolutionCurve:
    """theta from K0^-1 exp(G(theta, S)) = h / a, then v = (a/h) theta + v_p.

    Here a = sigma sqrt(g^2 - 3 f h) and v_p = (a - g)/(3h) must solve the Abel
    equation. Give either K0 or ``theta_anchor=(y_a, theta_a)``; the anchor
    selects the branch of G, K0 alone selects the principal branch.
    ``branch="auto"`` uses the sign whose v_p is a particular solution.
    """
    require_quadratic_cubic(prob)
    if branch not in ("+", "-", "auto"):
        raise ValueError("branch must be '+', '-' or 'auto'")
    if S == 0:
        raise PreconditionError("S must be nonzero")
    if (K0 is None) == (theta_anchor is None):
        raise PreconditionError("give exactly one of K0 or theta_anchor")
    grid = prob.grid
    hv = _ev(prob.h, grid)
    if np.any(hv == 0.0):
        raise PreconditionError("h vanishes on the grid")
    disc = _ev(prob.g, grid) ** 2 - 3 * _ev(prob.f, grid) * hv
    if np.any(disc <= 0):
        raise PreconditionError("g^2 - 3 f h must be positive on the grid")
    ab = lienard_to_abel(prob)
    if branch == "auto":
        res = {}
        for b in ("+", "-"):
            r, scale = particular_residual(ab, theorem2_particular(prob, b)[0], grid)
            res[b] = float(np.max(np.abs(r))) / scale
        branch = min(res, key=res.get)
    vp_e, a_e = theorem2_particular(prob, branch)
    check_particular(ab, vp_e, particular_tol)
    a = _ev(a_e, grid)
    rho_e = simplify(prob.h / a_e)

    if theta_anchor is not None:
        y_a, theta_a = map(float, theta_anchor)
        rho_a = float(evaluate(rho_e, y_a))
        K0 = math.exp(_G_scalar(theta_a, S, normalization)) / rho_a

        def delta(ys):
            return np.log(_ev(rho_e, ys) / rho_a)

        theta = _theta_on_grid(grid, y_a, delta, S, theta_a, normalization, tol)
    else:
        rho = _ev(rho_e, grid)
        theta = np.array([chiellini_theta(r, S, K0, normalization=normalization, tol=tol) for r in rho])
    v = a / hv * theta + _ev(vp_e, grid)
    constants = {"S": float(S), "K0": float(K0), "branch": branch, "normalization": normalization}
    if theta_anchor is not None:
        constants["theta_anchor"] = [float(theta_anchor[0]), float(theta_anchor[1])]
    return _finish("T2", grid, v, constants, ab, _default_x0(prob.domain, x0), theta=theta)


# ------------------------------------------------------------------ Theorem 3


def solve_theorem3(
    prob: LienardProblem,
    v_p,
    S: float,
    theta_anchor: tuple[float, float],
    x0: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
    particular_tol: float = 1e-8,
) -> SolutionCurve:
    """theta from [G(theta) - G(theta_a)] / S = int_{y_a}^y a^2/h, then v = (a/h) theta + v_p.

    a = g + 3 h v_p. The quadrature on the right is adaptive.
    """
    require_quadratic_cubic(prob)
    if S == 0:
        raise PreconditionError("S must be nonzero")
    v_p = _as_expr(v_p, "y")
    grid = prob.grid
    hv = _ev(prob.h, grid)
    if np.any(hv == 0.0):
        raise PreconditionError("h vanishes on the grid")
    ab = lienard_to_abel(prob)
    check_particular(ab, v_p, particular_tol)
    a_e = simplify(prob.g + 3 * prob.h * v_p)
    if identically_zero(a_e, grid):
        raise PreconditionError("g + 3 h v_p vanishes identically; use the v_p = -g/(3h) reduction instead")
    a = _ev(a_e, grid)
    if np.any(a == 0.0):
        raise PreconditionError("g + 3 h v_p vanishes on the grid")
    y_a, theta_a = map(float, theta_anchor)
    weight = simplify(a_e**2 / prob.h)

    def wfn(t):
        return evaluate(weight, t) * np.ones_like(t)

    W = Antiderivative(wfn, grid, tol)
    W_a = W(y_a)

    def delta(ys):
        return S * (W(ys) - W_a)

    theta = _theta_on_grid(grid, y_a, delta, S, theta_a, "continuous", tol)
    v = a / hv * theta + _ev(v_p, grid)
    constants = {"S": float(S), "theta_anchor": [y_a, theta_a]}
    return _finish("T3", grid, v, constants, ab, _default_x0(prob.domain, x0), theta=theta)


# ------------------------------------------------------------------ Theorem 4


def theorem4_denominator(theta, n: float, m: float, S: float, P: float):
    """P^(m-n) theta^(3-n) + theta^(3-m) - S theta."""
    return P ** (m - n) * real_power(theta, 3.0 - n) + real_power(theta, 3.0 - m) - S * np.asarray(theta, dtype=float)


def theorem4_singular_points(n: float, m: float, S: float, P: float, span: float = 1e6) -> list[float]:
    """Roots of the H-denominator and points where it is undefined, within |theta| <= span."""
    signed = is_integer(3.0 - n) and is_integer(3.0 - m)
    pts = set()
    try:
        if not signed or theorem4_denominator(0.0, n, m, S, P) == 0.0:
            pts.add(0.0)
    except DomainError:
        pts.add(0.0)
    grids = [np.geomspace(1e-9, span, 4001)]
    if signed:
        grids.append(-grids[0][::-1])
    for g in grids:
        d = theorem4_denominator(g, n, m, S, P)
        mag = np.abs(d)
        for i in range(len(g) - 1):
            if d[i] == 0.0:
                pts.add(float(g[i]))
            elif d[i] * d[i + 1] < 0:
                pts.add(find_root(lambda t: float(theorem4_denominator(t, n, m, S, P)), g[i], g[i + 1]))
        # touching roots (no sign change) show up as deep local minima of |d|
        for i in range(1, len(g) - 1):
            if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1] and mag[i] < 1e-2 * (1.0 + abs(g[i])):
                from scipy.optimize import minimize_scalar

                res = minimize_scalar(
                    lambda t: abs(float(theorem4_denominator(t, n, m, S, P))),
                    bounds=(g[i - 1], g[i + 1]), method="bounded", options={"xatol": 1e-14},
                )
                if res.fun <= 1e-12 * (1.0 + abs(res.x)):
                    pts.add(float(res.x))
    return sorted(pts)


def theorem4_segment(theta: float, n: float, m: float, S: float, P: float) -> tuple[float, float]:
    pts = theorem4_singular_points(n, m, S, P)
    signed = is_integer(3.0 - n) and is_integer(3.0 - m)
    if not signed and theta <= 0:
        raise DomainError("real exponents need theta > 0")
    for p in pts:
        if abs(theta - p) <= 1e-9 * (1.0 + abs(p)):
            raise BranchCrossingError(f"theta = {theta:.12g} is a root of the H denominator")
    lo = max([p for p in pts if p < theta], default=-math.inf)
    hi = min([p for p in pts if p > theta], default=math.inf)
    return lo, hi


def theorem4_H(
    theta: float,
    n: float,
    m: float,
    S: float,
    P: float = 1.0,
    theta_ref: float = 1.0,
    tol: Tolerances = DEFAULT_TOL,
) -> float:
    """H(theta) = int_{theta_ref}^{theta} dt / D(t), D the Theorem-4 denominator.

    Raises BranchCrossingError when a root of D lies between theta_ref and theta.
    """
    theta = float(theta)
    lo, hi = theorem4_segment(theta_ref, n, m, S, P)
    if not lo < theta < hi:
        raise BranchCrossingError(
            f"a denominator root or singular point lies between theta_ref={theta_ref:g} and theta={theta:g}"
        )

    def integrand(t):
        return 1.0 / theorem4_denominator(t, n, m, S, P)

    return integrate_adaptive(integrand, theta_ref, theta, tol)


def solve_theorem4(
    prob: LienardProblem,
    S: float,
    P: float = 1.0,
    theta_anchor: tuple[float, float] = None,
    x0: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> SolutionCurve:
    """v = P (f/k)^(1/(n-m)) theta with H(theta) - H(theta_a) = Y(y) - Y(y_a).

    Y(y) = P^(2-m) int k (f/k)^((2-m)/(n-m)) dy. theta is tracked from the
    anchor outward, each step inverting H on the anchor's monotone branch.
    """
    grid = prob.grid
    if not (identically_zero(prob.g, grid) and identically_zero(prob.h, grid)):
        raise PreconditionError("Theorem-4 solutions need g = h = 0")
    if theta_anchor is None:
        raise PreconditionError("theta_anchor=(y_a, theta_a) is required")
    n, m = prob.n, prob.m
    fv, kv = _ev(prob.f, grid), _ev(prob.k, grid)
    if np.any(kv == 0) or np.any(fv / kv <= 0):
        raise PreconditionError("f/k must be positive on the grid")
    ratio = simplify(prob.f / prob.k)
    y_weight = simplify(P ** (2.0 - m) * prob.k * ratio ** ((2.0 - m) / (n - m)))
    Y = Antiderivative(lambda t: evaluate(y_weight, t) * np.ones_like(t), grid, tol)
    y_a, theta_a = map(float, theta_anchor)
    lo, hi = theorem4_segment(theta_a, n, m, S, P)

    def inv_D(t):
        return 1.0 / theorem4_denominator(t, n, m, S, P)

    slope = math.copysign(1.0, float(inv_D(theta_a)))
    theta = np.empty_like(grid)
    order = _anchor_order(grid, y_a)
    for part in (order[grid[order] >= y_a], order[grid[order] < y_a]):
        prev_t, prev_Y = theta_a, Y(y_a)
        for i in part:
            dY = Y.values[i] - prev_Y

            def fn(t, base=prev_t, dY=dY):
                return integrate_adaptive(inv_D, base, t, tol) - dY

            try:
                t_new = _invert_monotone(fn, prev_t, slope, lo, hi, tol)
            except RangeError as exc:
                raise RangeError(f"H inversion leaves the monotone branch near y={grid[i]:.6g}") from exc
            theta[i] = t_new
            prev_t, prev_Y = t_new, Y.values[i]
    F = P * real_power(fv / kv, 1.0 / (n - m))
    v = F * theta
    constants = {"S": float(S), "P": float(P), "theta_anchor": [y_a, theta_a]}
    return _finish("T4", grid, v, constants, lienard_to_abel(prob), _default_x0(prob.domain, x0), theta=theta)


# ------------------------------------------------------------------ Riccati


def _pieces_from_labels(labels: np.ndarray) -> list[tuple[int, int]]:
    pieces, start = [], 0
    for i in range(1, len(labels)):
        if labels[i] != labels[i - 1]:
            pieces.append((start, i - 1))
            start = i
    pieces.append((start, len(labels) - 1))
    return pieces


def solve_riccati(
    f,
    k,
    K: float,
    C: float,
    domain: tuple[float, float],
    samples: int = 201,
    x0: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> SolutionCurve:
    """Solutions of v' = f + k v^2 when d/dy sqrt(f/k) = K f.

    With s = int sqrt(f k) and v = sqrt(f/k) theta:

    * K^2 < 4: theta = w tan(w (s + C)) + K/2,  w = sqrt(1 - K^2/4)
    * K^2 = 4: theta = +-K/2 - 1/(s + C), the sign picked by residual
    * K^2 > 4: theta = K/2 - mu tanh(mu (s + C)),  mu = sqrt(K^2/4 - 1)

    The last family extends the trigonometric one past |K| = 2. Poles split
    the samples into pieces.
    """
    f = _as_expr(f, "y")
    k = _as_expr(k, "y")
    grid = make_grid(domain, samples)
    fv, kv = _ev(f, grid), _ev(k, grid)
    if np.any(kv == 0) or np.any(fv / kv <= 0):
        raise PreconditionError("f/k must be positive on the grid")
    s = Antiderivative(lambda t: np.sqrt(evaluate(f, t) * evaluate(k, t)) * np.ones_like(t), grid, tol).values
    amp = np.sqrt(fv / kv)
    ab = GeneralizedAbel(0.0, 2.0, f, k, _as_expr(0, "y"), _as_expr(0, "y"), tuple(domain), samples)
    t = s + C
    disc = 1.0 - K * K / 4.0
    notes = []
    constants = {"K": float(K), "C": float(C)}
    if abs(disc) <= 1e-12:
        labels = np.sign(t)
        keep = t != 0.0
        pieces = _pieces_from_labels(labels)
        with np.errstate(divide="ignore"):
            cands = {}
            for sign in (1.0, -1.0):
                theta = sign * K / 2.0 - 1.0 / t
                cands["+" if sign > 0 else "-"] = theta
        scores = {}
        from .verify import abel_residual

        for label, theta in cands.items():
            probe = SolutionCurve("probe", grid[keep], (amp * theta)[keep], grid[keep], {},
                                  pieces=_pieces_from_labels(labels[keep]))
            try:
                scores[label] = abel_residual(probe, ab).max_rel
            except PreconditionError:
                scores[label] = math.inf
        best = min(scores, key=scores.get)
        theta = cands[best]
        notes.append(f"rational branch: sign of K/2 term chosen by residual {scores}")
        constants["branch"] = best
        if not np.all(keep):
            raise RangeError("a grid point sits exactly on the pole s + C = 0")
    elif disc > 0:
        w = math.sqrt(disc)
        phase = w * t
        labels = np.floor((phase + math.pi / 2) / math.pi)
        pieces = _pieces_from_labels(labels)
        theta = w * np.tan(phase) + K / 2.0
    else:
        mu = math.sqrt(-disc)
        theta = K / 2.0 - mu * np.tanh(mu * t)
        pieces = [(0, len(grid) - 1)]
        notes.append("hyperbolic family for |K| > 2")
    v = amp * theta
    return _finish("riccati", grid, v, constants, ab, _default_x0(domain, x0), pieces=pieces,
                   theta=theta, notes=notes)


__all__ = [
    "SolutionCurve",
    "chiellini_G",
    "chiellini_theta",
    "chiellini_segment",
    "chiellini_singular_points",
    "cumulative_x",
    "solve_theorem1",
    "solve_theorem2",
    "solve_theorem3",
    "theorem4_H",
    "theorem4_denominator",
    "solve_theorem4",
    "solve_riccati",
    "NoSignChangeError",
]
