"""Back-substitution residuals and the Runge-Kutta cross-check for solution curves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BPoly

from .errors import PreconditionError
from .model import GeneralizedAbel, LienardProblem, lienard_to_abel
from .numerics import DEFAULT_TOL, Tolerances, ode_solve


@dataclass
class ResidualReport:
    kind: str
    max_abs: float
    max_rel: float
    rms_rel: float
    worst_point: float
    scale: float
    n_points: int
    pointwise: np.ndarray = field(default=None, repr=False)

    def passes(self, bound: float) -> bool:
        return self.max_rel <= bound

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "rms_rel": self.rms_rel,
            "worst_point": self.worst_point,
            "scale": self.scale,
            "n_points": self.n_points,
        }


def fd_weights(nodes: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at x0 (Fornberg's recursion)."""
    n = len(nodes)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative_on_samples(x: np.ndarray, values: np.ndarray, order: int = 1) -> np.ndarray:
    """Finite-difference derivative of sampled data.

    Interior points use 5-point central stencils (4th order). The two points
    nearest each end use 6-point one-sided stencils, whose extra node keeps
    the boundary error comparable to the interior one.
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(x)
    if n < 5:
        raise PreconditionError("at least 5 samples are needed for 4th-order differencing")
    out = np.empty(n)
    width = 6 if n >= 6 else 5
    for i in range(n):
        if 2 <= i <= n - 3:
            lo, w = i - 2, 5
        else:
            lo, w = (0 if i < 2 else n - width), width
        idx = slice(lo, lo + w)
        # weights sum to zero only up to rounding; differencing against values[i] makes constants exact
        out[i] = fd_weights(x[idx], x[i], order) @ (values[idx] - values[i])
    return out


def _pieces(curve) -> list[tuple[int, int]]:
    pieces = getattr(curve, "pieces", None)
    return pieces if pieces else [(0, len(curve.y) - 1)]


def _report(kind, residual, scale, points) -> ResidualReport:
    residual = np.asarray(residual, dtype=float)
    if not np.all(np.isfinite(residual)):
        raise PreconditionError(f"{kind} residual is not finite")
    scale = float(scale)
    safe = scale if scale > 0 else 1.0
    worst = int(np.argmax(np.abs(residual)))
    max_abs = float(np.abs(residual[worst]))
    return ResidualReport(
        kind=kind,
        max_abs=max_abs,
        max_rel=max_abs / safe,
        rms_rel=float(np.sqrt(np.mean(residual**2))) / safe,
        worst_point=float(points[worst]),
        scale=scale,
        n_points=len(residual),
        pointwise=residual,
    )


def abel_residual(curve, ab: GeneralizedAbel | LienardProblem) -> ResidualReport:
    """Residual of dv/dy - (f v^alpha + k v^beta + g v^2 + h v^3) along the curve samples.

    dv/dy comes from 5-point differencing of the samples; the scale is the
    largest right-hand-side term magnitude over the grid.
    """
    if isinstance(ab, LienardProblem):
        ab = lienard_to_abel(ab)
    y = np.asarray(curve.y, dtype=float)
    v = np.asarray(curve.v, dtype=float)
    if len(y) < 5:
        raise PreconditionError("abel_residual needs at least 5 samples")
    if not np.all(np.isfinite(v)):
        raise PreconditionError("curve contains non-finite v samples")
    residual = np.empty_like(y)
    scale = 0.0
    for i0, i1 in _pieces(curve):
        sl = slice(i0, i1 + 1)
        dv = derivative_on_samples(y[sl], v[sl])
        terms = ab.terms(y[sl], v[sl])
        residual[sl] = dv - terms.sum(axis=0)
        scale = max(scale, float(np.max(np.abs(terms))))
    return _report("abel", residual, scale, y)


def pointwise_lienard(curve, prob: LienardProblem) -> ResidualReport:
    """Lienard residual at the curve samples via y' = 1/v and y'' = -y'^3 dv/dy."""
    y = np.asarray(curve.y, dtype=float)
    v = np.asarray(curve.v, dtype=float)
    residual = np.empty_like(y)
    scale = 0.0
    for i0, i1 in _pieces(curve):
        sl = slice(i0, i1 + 1)
        u = 1.0 / v[sl]
        ypp = -(u**3) * derivative_on_samples(y[sl], v[sl])
        terms = prob.force_terms(y[sl], u)
        residual[sl] = ypp + prob.force(y[sl], u)
        scale = max(scale, float(np.max(terms)), float(np.max(np.abs(ypp))))
    return _report("lienard_pointwise", residual, scale, y)


def select_segment(curve, segment: int | None = None) -> tuple[int, int]:
    segments = list(getattr(curve, "monotone_segments", None) or [(0, len(curve.y) - 1)])
    if segment is None:
        return max(segments, key=lambda s: s[1] - s[0])
    return segments[segment]


def _segment_arrays(curve, segment):
    i0, i1 = select_segment(curve, segment)
    y = np.asarray(curve.y[i0:i1 + 1], dtype=float)
    v = np.asarray(curve.v[i0:i1 + 1], dtype=float)
    x = np.asarray(curve.x[i0:i1 + 1], dtype=float)
    if len(y) < 5:
        raise PreconditionError("segment has fewer than 5 samples")
    if not (np.all(v > 0) or np.all(v < 0)):
        raise PreconditionError("v changes sign inside the segment; y(x) is not single-valued")
    dx = np.diff(x)
    if not (np.all(dx > 0) or np.all(dx < 0)):
        raise PreconditionError("x is not strictly monotone on the segment")
    return y, v, x


def lienard_residual(curve, prob: LienardProblem, segment: int | None = None) -> ResidualReport:
    """Residual of the Lienard equation for y(x) resampled on a uniform x-grid.

    y(x) is rebuilt by quintic Hermite interpolation of the monotone map
    x -> y (minus its chord) using y' = 1/v and y'' = -y'^3 dv/dy at the
    knots. y' and y'' at
    the uniform points come from 5-point central differences of the
    interpolant with a quarter-spacing step (the end pieces are extended
    polynomially), which keeps the stencils clear of one-sided error.
    """
    y, v, x = _segment_arrays(curve, segment)
    dvdy = derivative_on_samples(y, v)
    u = 1.0 / v
    ypp = -(u**3) * dvdy
    order = np.argsort(x)
    xs = x[order]
    # difference only the departure from the chord; cancellation error scales with its size
    slope = (y[order][-1] - y[order][0]) / (xs[-1] - xs[0])
    chord = y[order][0] + slope * (xs - xs[0])
    data = np.column_stack([y[order] - chord, u[order] - slope, ypp[order]])
    interp = BPoly.from_derivatives(xs, data, extrapolate=True)
    xg = np.linspace(xs[0], xs[-1], len(x))
    step = 0.25 * (xg[1] - xg[0])
    stencil = interp(xg[:, None] + step * np.arange(-2, 3)[None, :])
    yg = stencil[:, 2] + y[order][0] + slope * (xg - xs[0])
    d1 = slope + (stencil[:, 0] - 8 * stencil[:, 1] + 8 * stencil[:, 3] - stencil[:, 4]) / (12 * step)
    d2 = (-stencil[:, 0] + 16 * stencil[:, 1] - 30 * stencil[:, 2] + 16 * stencil[:, 3] - stencil[:, 4]) / (12 * step**2)
    residual = d2 + prob.force(yg, d1)
    terms = prob.force_terms(yg, d1)
    scale = max(float(np.max(terms)), float(np.max(np.abs(d2))))
    return _report("lienard", residual, scale, xg)


def crosscheck_reference(
    curve,
    prob: LienardProblem,
    tol: Tolerances = DEFAULT_TOL,
    segment: int | None = None,
) -> ResidualReport:
    """Integrate y'' = -(f y'^n + k y'^m + g y' + h) from the curve's first sample and compare.

    The deviation at each curve sample is |y_curve - y_ode| / (1 + |y_ode|).
    """
    y, v, x = _segment_arrays(curve, segment)

    def rhs(_x, state):
        yy, uu = state
        return np.array([uu, -prob.force(yy, uu)])

    traj = ode_solve(rhs, x[0], [y[0], 1.0 / v[0]], x[-1], tol, x_eval=x[1:])
    lookup = {float(xx): st for xx, st in zip(traj.x, traj.states)}
    y_ode = np.array([lookup[float(xx)][0] for xx in x])
    deviation = np.abs(y - y_ode) / (1.0 + np.abs(y_ode))
    report = _report("crosscheck", deviation, 1.0, x)
    return report
