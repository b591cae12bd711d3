"""Exception types raised across the package."""


class MMPHError(Exception):
    """Base class for every error raised by :mod:`mmph`."""


class DimensionError(MMPHError, ValueError):
    """Operands have incompatible or non-square shapes."""


class DomainError(MMPHError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(MMPHError, ArithmeticError):
    """A matrix is singular or too ill-conditioned to invert."""

    def __init__(self, message, rcond=0.0):
        super().__init__(f"{message} (reciprocal condition estimate {rcond:.3e})")
        self.rcond = rcond


class ConditioningError(MMPHError, ValueError):
    """The conditioning event has (numerically) zero probability."""


class ConvergenceDomainError(MMPHError, ValueError):
    """The moment generating function diverges at the requested point."""


class NonConvergenceError(MMPHError, ArithmeticError):
    """A truncated series failed to reach its tolerance."""


class ModelViolationError(MMPHError, ValueError):
    """A sample path contradicts the model assumptions."""


class ObservationLikelihoodError(MMPHError, ArithmeticError):
    """An observation has zero density under the current parameters."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class StarvedStateError(MMPHError, ArithmeticError):
    """A state received no expected sojourn time in the M-step."""


class FitFailureError(MMPHError, RuntimeError):
    """Every restart of a fit failed numerically."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class IngestionError(MMPHError, ValueError):
    """A data file could not be parsed or failed validation."""


class ConventionError(MMPHError, ValueError):
    """Model and dataset use different standardization conventions."""
