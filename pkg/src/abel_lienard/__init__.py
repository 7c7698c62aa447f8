"""Integrability tests and closed-form solvers for extended Lienard equations.

The equation y'' + f(y) y'^n + k(y) y'^m = 0 becomes a first-order Abel-type
equation in v = 1/y'. This package checks the known integrability conditions
for that equation, builds the resulting solution curves, and verifies them.
"""

from .conditions import (
    ConditionReport,
    applicable_conditions,
    check_chiellini,
    check_generalized_chiellini,
    check_riccati,
    check_theorem1,
    check_theorem2,
    check_theorem3,
)
from .errors import (
    BranchCrossingError,
    ConvergenceError,
    DomainError,
    ExprSyntaxError,
    LienardError,
    NoSignChangeError,
    NotParticularSolutionError,
    NumericalError,
    PreconditionError,
    ProblemFileError,
    RangeError,
    ShapeError,
    StepSizeUnderflowError,
    UnknownIdentifierError,
)
from .expr import Expr, differentiate, evaluate, parse, simplify, to_string
from .invariants import (
    absolute_invariants,
    classical_particular_reduction,
    invariant_profile_match,
    normal_form,
    relative_invariants,
)
from .model import (
    ClassicalAbel,
    GeneralizedAbel,
    LienardProblem,
    check_particular,
    lienard_to_abel,
    quadratic_cubic_form,
    reduce_by_particular,
)
from .numerics import Antiderivative, Tolerances, find_root, integrate_adaptive, ode_solve
from .solvers import (
    SolutionCurve,
    chiellini_G,
    chiellini_theta,
    solve_riccati,
    solve_theorem1,
    solve_theorem2,
    solve_theorem3,
    solve_theorem4,
)
from .verify import abel_residual, crosscheck_reference, lienard_residual

_SUBMODULES = {"cli", "conditions", "errors", "expr", "fileio", "invariants", "model", "numerics", "solvers", "verify"}
__all__ = sorted(n for n in dir() if not n.startswith("_") and n not in _SUBMODULES)
