"""Exception hierarchy shared across the package."""


class AutorhoError(Exception):
    """Base class for all errors raised by autorho."""


class InvalidDimensions(AutorhoError, ValueError):
    pass


class InvalidOrder(AutorhoError, ValueError):
    pass


class OutOfDomain(AutorhoError, ValueError):
    pass


class DegenerateData(AutorhoError, ValueError):
    pass


class DegenerateKnots(AutorhoError, ValueError):
    pass


class NotPositiveDefinite(AutorhoError, ArithmeticError):
    """Raised by the banded Cholesky when a pivot is not safely positive."""

    def __init__(self, pivot_index, message=None):
        self.pivot_index = pivot_index
        super().__init__(message or f"matrix is not positive definite (pivot {pivot_index})")


class SingularFactor(AutorhoError, ArithmeticError):
    pass


class ConvergenceFailure(AutorhoError, ArithmeticError):
    pass


class FactorizationFailure(AutorhoError, ArithmeticError):
    pass


class RankDeficientDesign(AutorhoError, ArithmeticError):
    pass


class NumericallyUnsolvable(AutorhoError, ArithmeticError):
    pass


class DegenerateEdf(AutorhoError, ArithmeticError):
    pass


class MaxIterationsExceeded(AutorhoError, ArithmeticError):
    pass


class ZeroDerivative(AutorhoError, ArithmeticError):
    pass


class ApproximationFailure(AutorhoError, ArithmeticError):
    pass


class AllPointsFailed(AutorhoError, ArithmeticError):
    pass


class TooFewSamples(AutorhoError, ValueError):
    pass
