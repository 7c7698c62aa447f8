"""Exception hierarchy shared by every module."""


class LienardError(Exception):
    """Base class for all package errors."""


class ExprSyntaxError(LienardError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifierError(LienardError, ValueError):
    pass


class DomainError(LienardError, ArithmeticError):
    """An expression or formula was evaluated outside its real domain."""


class PreconditionError(LienardError, ValueError):
    """Inputs violate an operation's stated precondition."""


class ShapeError(PreconditionError):
    """Equation exponents do not match the form an operation requires."""


class NotParticularSolutionError(PreconditionError):
    def __init__(self, message: str, max_residual: float, location: float):
        super().__init__(f"{message}: max residual {max_residual:.3e} at {location:.6g}")
        self.max_residual = max_residual
        self.location = location


class NumericalError(LienardError, ArithmeticError):
    """Base class for failures of the numerical kernel."""


class ConvergenceError(NumericalError):
    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class NoSignChangeError(NumericalError):
    pass


class StepSizeUnderflowError(NumericalError):
    def __init__(self, message: str, location: float):
        super().__init__(f"{message} near x={location:.10g}")
        self.location = location


class BranchCrossingError(NumericalError):
    """A theta-branch would cross a singular root of its defining integrand."""


class RangeError(NumericalError):
    """The requested target lies outside the range attainable on a branch."""


class ProblemFileError(LienardError, ValueError):
    """A problem or curve file is malformed or has unknown keys."""
