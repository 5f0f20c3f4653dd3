"""Exception hierarchy shared by every module of the package."""


class HeisOverdetError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HeisOverdetError, ValueError):
    """A precondition on the inputs was violated (dimension mismatch,
    out-of-range parameter, incompatible identity/dimension pair, ...)."""


class SingularPointError(HeisOverdetError, ArithmeticError):
    """Derivative evaluation was requested at a point where the quantity
    is not smooth (gauge origin, the t-axis for axis-singular fields)."""


class SymmetryViolationError(HeisOverdetError, ValueError):
    """A field passed to the toric reduction is not actually symmetric:
    two representative liftings disagreed beyond tolerance."""


class AccuracyError(HeisOverdetError, RuntimeError):
    """A quadrature did not reach the requested tolerance before the
    refinement cap.  Carries the best available estimate."""

    def __init__(self, message, best_estimate, estimated_rel_error):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.estimated_rel_error = estimated_rel_error


class SolverError(HeisOverdetError, RuntimeError):
    """The sparse linear solve did not reach the required residual.
    Carries the achieved relative residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
