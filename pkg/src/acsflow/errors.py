"""Exception types shared across the package."""


class AcsflowError(Exception):
    """Base class for all package errors."""


class NonConvex(AcsflowError):
    """Support function fails the strict convexity check min(u_thth + u) > tol."""


class GridMismatch(AcsflowError):
    """Two grid-sampled quantities live on different angular grids."""


class OutOfRange(AcsflowError):
    """Parameter outside the admissible domain (alpha, k, r, ...)."""


class EventNotFound(AcsflowError):
    """Profile ODE produced no curvature-monotone arc endpoint in the search span."""


class StepUnderflow(AcsflowError):
    """Adaptive integrator drove the step size below the representable floor."""


class NoBracket(AcsflowError):
    """Root bracketing failed; carries the attained range when known."""

    def __init__(self, message, attained=None):
        super().__init__(message)
        self.attained = attained


class PointOutside(AcsflowError):
    """Entropy base point is outside (or too close to the boundary of) the body."""


class OptimFailed(AcsflowError):
    """Entropy-point maximization did not converge within its evaluation budget."""


class EigenFailed(AcsflowError):
    """Dense symmetric eigensolver breakdown."""


class WindowEscaped(AcsflowError):
    """Growth-rate fit window left the linear-dominated regime."""


class AlphaMismatch(AcsflowError):
    """Trace alpha does not equal 1/(k^2 - 1) for the requested k."""


class TooLarge(AcsflowError):
    """Perturbation amplitude violates the smallness precondition."""


class MismatchBug(AcsflowError):
    """Two supposedly identical closed-form expressions disagree."""


class OrderingViolated(AcsflowError):
    """Computed shrinker entropies break the proven strict ordering."""


class BadConfig(AcsflowError):
    """Invalid run configuration."""


class BadDomain(AcsflowError):
    """Argument outside the domain of an exact formula (e.g. t >= 0)."""


class InsufficientData(AcsflowError):
    """Not enough trace rows for the requested fit."""
