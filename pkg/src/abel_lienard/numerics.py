"""Numerical kernel: adaptive quadrature, bracketed roots, adaptive Runge-Kutta.

Everything here is deliberately self-contained (numpy only) so the verification
oracle in :mod:`abel_lienard.verify` does not share code paths with any
third-party integrator.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    NoSignChangeError,
    NumericalError,
    StepSizeUnderflowError,
)

__all__ = [
    "Tolerances",
    "Trajectory",
    "Antiderivative",
    "integrate_adaptive",
    "find_root",
    "ode_solve",
    "derivative_fd",
]


@dataclass(frozen=True)
class Tolerances:
    quad_rel: float = 1e-10
    quad_abs: float = 1e-12
    root_abs: float = 1e-12
    ode_rel: float = 1e-9
    ode_abs: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        for name in ("quad_rel", "quad_abs", "root_abs", "ode_rel", "ode_abs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")

    def replace(self, **changes) -> "Tolerances":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return Tolerances(**values)


DEFAULT_TOL = Tolerances()


@dataclass
class Trajectory:
    x: np.ndarray
    states: np.ndarray
    dense_output: bool = False
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        dx = np.diff(self.x)
        if len(dx) and not (np.all(dx > 0) or np.all(dx < 0)):
            raise NumericalError("trajectory abscissae are not strictly monotone")
        if not np.all(np.isfinite(self.states)):
            raise NumericalError("trajectory contains non-finite states")


# ------------------------------------------------------------------ quadrature

# 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1] (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, centre, ...)
_g_left = {1: 0, 3: 1, 5: 2}
for _k, _i in _g_left.items():
    GAUSS_W[_k] = _WG[_i]
    GAUSS_W[14 - _k] = _WG[_i]
GAUSS_W[7] = _WG[3]


class SingularIntegrandError(NumericalError):
    pass


def _call_vectorized(fn: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = fn(x)
    except (TypeError, ValueError):
        out = None
    if out is None or np.shape(out) != np.shape(x):
        out = np.array([fn(float(xi)) for xi in x.ravel()], dtype=float).reshape(x.shape)
    return np.asarray(out, dtype=float)


def _gk15(fn, a, b):
    """Kronrod estimate and |K15 - G7| error for arrays of panel endpoints."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[..., None] + half[..., None] * NODES
    fx = _call_vectorized(fn, x)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)].ravel()[0]
        raise SingularIntegrandError(f"integrand is not finite at {bad:.12g}")
    k = half * (fx @ KRONROD_W)
    g = half * (fx @ GAUSS_W)
    return k, np.abs(k - g)


def integrate_adaptive(integrand: Callable, a: float, b: float, tol: Tolerances = DEFAULT_TOL) -> float:
    """Globally adaptive Gauss-Kronrod (7/15) quadrature of ``integrand`` over [a, b].

    The integrand may accept an array of nodes; scalar-only callables are
    handled transparently. Endpoint singularities are handled by bisection
    refinement since no node sits on an endpoint. Raises ConvergenceError when
    the error target is not reached within ``tol.max_iter`` bisections.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0
    if a > b:
        return -integrate_adaptive(integrand, b, a, tol)
    k, e = _gk15(integrand, a, b)
    total = float(k)
    err = float(e)
    heap = [(-err, a, b, total)]
    for _ in range(tol.max_iter):
        if err <= max(tol.quad_abs, tol.quad_rel * abs(total)):
            return total
        neg_e, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        kk, ee = _gk15(integrand, np.array([lo, mid]), np.array([mid, hi]))
        total += float(kk.sum()) - val
        err += float(ee.sum()) + neg_e
        heapq.heappush(heap, (-float(ee[0]), lo, mid, float(kk[0])))
        heapq.heappush(heap, (-float(ee[1]), mid, hi, float(kk[1])))
        # refresh the running sums to stop drift from repeated updates
        if len(heap) % 64 == 0:
            total = math.fsum(item[3] for item in heap)
            err = math.fsum(-item[0] for item in heap)
    total = math.fsum(item[3] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    if err <= max(tol.quad_abs, tol.quad_rel * abs(total)):
        return total
    raise ConvergenceError(
        f"quadrature on [{a:.6g}, {b:.6g}] did not converge (error estimate {err:.3e})",
        estimate=total,
    )


class Antiderivative:
    """Cumulative integral ``t -> int_{knots[0]}^t fn`` anchored at the first knot.

    Knot values are computed panel by panel; evaluation at arbitrary points
    adds the integral from the nearest knot below, using one batched Kronrod
    pass and falling back to :func:`integrate_adaptive` where that pass misses
    the tolerance. Callable on scalars or arrays.
    """

    def __init__(self, fn: Callable, knots: Sequence[float], tol: Tolerances = DEFAULT_TOL):
        self.fn = fn
        self.tol = tol
        self.knots = np.asarray(knots, dtype=float)
        if self.knots.ndim != 1 or len(self.knots) < 2 or np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be a strictly increasing array of length >= 2")
        lo = self.knots[:-1]
        hi = self.knots[1:]
        panels = self._batched(lo, hi)
        self.values = np.concatenate([[0.0], np.cumsum(panels)])

    def _batched(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        k, e = _gk15(self.fn, lo, hi)
        scale = max(float(np.max(np.abs(k))) if k.size else 0.0, 1e-300)
        # per-panel share of the global target keeps the cumulative error bounded
        share = max(self.tol.quad_abs, self.tol.quad_rel * scale) / max(len(k), 1)
        redo = np.nonzero(e > share)[0]
        panel_tol = self.tol.replace(quad_abs=max(share, 1e-300))
        for i in redo:
            k[i] = integrate_adaptive(self.fn, lo[i], hi[i], panel_tol)
        return k

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.knots, t_arr, side="right") - 1, 0, len(self.knots) - 1)
        base = self.knots[idx]
        out = self.values[idx].copy()
        moving = t_arr != base
        if np.any(moving):
            out[moving] += self._batched(base[moving], t_arr[moving])
        return float(out[0]) if scalar else out


# ---------------------------------------------------------------- root finding


def find_root(fn: Callable[[float], float], lo: float, hi: float, tol: Tolerances = DEFAULT_TOL) -> float:
    """Bracketed root of ``fn`` on [lo, hi] by Illinois secant steps with bisection fallback.

    Requires ``fn(lo) * fn(hi) <= 0``. The returned value always lies inside
    the initial bracket.
    """
    a, b = float(lo), float(hi)
    if a > b:
        a, b = b, a
    fa, fb = float(fn(a)), float(fn(b))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if not (np.isfinite(fa) and np.isfinite(fb)):
        raise NumericalError("root function is not finite at the bracket ends")
    if fa * fb > 0:
        raise NoSignChangeError(f"no sign change on [{a:.12g}, {b:.12g}]: f={fa:.3e}, {fb:.3e}")
    # fa, fb below may be damped (Illinois); their signs always stay opposite
    last = ""
    bisect_next = False
    width_mark = b - a
    for it in range(tol.max_iter):
        width = b - a
        if width <= tol.root_abs + 4 * np.finfo(float).eps * max(abs(a), abs(b)):
            return 0.5 * (a + b)
        c = (a * fb - b * fa) / (fb - fa)
        if bisect_next or not a < c < b:
            c = 0.5 * (a + b)
            bisect_next = False
        fc = float(fn(c))
        if not np.isfinite(fc):
            raise NumericalError(f"root function is not finite at {c:.12g}")
        if fc == 0.0:
            return c
        if (fc > 0) == (fa > 0):
            a, fa = c, fc
            if last == "a":
                fb *= 0.5
            last = "a"
        else:
            b, fb = c, fc
            if last == "b":
                fa *= 0.5
            last = "b"
        if it % 3 == 2:
            if b - a > 0.5 * width_mark:
                bisect_next = True
            width_mark = b - a
    raise ConvergenceError(f"root finding did not converge in {tol.max_iter} iterations", estimate=0.5 * (a + b))


# ------------------------------------------------------------------ ODE solver

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp_step(rhs, x, y, k1, h):
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(np.asarray(rhs(x + _C[i] * h, yi), dtype=float))
    y_new = y + h * sum(b * kj for b, kj in zip(_B5, k))
    err = h * sum(e * kj for e, kj in zip(_E, k))
    return y_new, err, k[6]


def ode_solve(
    rhs: Callable,
    x0: float,
    state0,
    x_end: float,
    tol: Tolerances = DEFAULT_TOL,
    x_eval: Sequence[float] | None = None,
    max_steps: int = 200_000,
) -> Trajectory:
    """Integrate ``state' = rhs(x, state)`` from x0 to x_end with an adaptive Dormand-Prince 5(4) pair.

    Every point of ``x_eval`` (which must lie between x0 and x_end) is hit
    exactly by the step sequence and appears in the returned trajectory.
    Raises StepSizeUnderflowError when the step collapses, e.g. at a
    finite-x blow-up.
    """
    x = float(x0)
    x_end = float(x_end)
    y = np.atleast_1d(np.asarray(state0, dtype=float)).copy()
    direction = 1.0 if x_end >= x else -1.0
    stops = [] if x_eval is None else sorted({float(v) for v in x_eval}, key=lambda v: direction * v)
    stops = [s for s in stops if direction * (s - x) > 0 and direction * (x_end - s) >= 0]
    if not stops or stops[-1] != x_end:
        stops.append(x_end)
    xs = [x]
    ys = [y.copy()]
    if x == x_end:
        return Trajectory(np.array(xs), np.array(ys), stats={"accepted": 0, "rejected": 0, "nfev": 0})

    k1 = np.asarray(rhs(x, y), dtype=float)
    nfev = 1
    if not np.all(np.isfinite(k1)):
        raise NumericalError(f"right-hand side is not finite at x={x:.10g}")
    scale0 = tol.ode_abs + tol.ode_rel * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale0) ** 2))
    d1 = np.sqrt(np.mean((k1 / scale0) ** 2))
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h, abs(x_end - x), 0.1 * abs(x_end - x) + 1e-300)
    accepted = rejected = 0
    stop_i = 0
    for _ in range(max_steps):
        target = stops[stop_i]
        remaining = abs(target - x)
        hitting = h >= remaining
        step = remaining if hitting else h
        if step < 16 * np.finfo(float).eps * max(abs(x), 1.0):
            raise StepSizeUnderflowError("step size underflow", x)
        y_new, err, k7 = _dp_step(rhs, x, y, k1, direction * step)
        nfev += 6
        finite = np.all(np.isfinite(y_new)) and np.all(np.isfinite(err)) and np.all(np.isfinite(k7))
        if finite:
            sc = tol.ode_abs + tol.ode_rel * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean((err / sc) ** 2)))
        else:
            err_norm = np.inf
        if err_norm <= 1.0:
            accepted += 1
            x = target if hitting else x + direction * step
            y = y_new
            k1 = k7
            xs.append(x)
            ys.append(y.copy())
            factor = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
            if hitting:
                stop_i += 1
                if stop_i == len(stops):
                    break
                h = max(h, step * factor)
            else:
                h = step * factor
        else:
            rejected += 1
            h = step * (0.2 if not np.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2))
    else:
        raise ConvergenceError(f"ode_solve exceeded {max_steps} steps", estimate=x)
    return Trajectory(
        np.array(xs),
        np.array(ys),
        dense_output=False,
        stats={"accepted": accepted, "rejected": rejected, "nfev": nfev},
    )


def derivative_fd(fn: Callable[[float], float], y: float, h: float = 1e-5) -> float:
    """Central difference ``(fn(y + h) - fn(y - h)) / (2 h)``."""
    return (fn(y + h) - fn(y - h)) / (2.0 * h)
