"""Exception types shared across the package."""


class QsdLabError(Exception):
    """Base class for all package-specific errors."""


class ParameterDomainError(QsdLabError, ValueError):
    """A parameter lies outside its mathematical domain (e.g. gamma >= alpha)."""


class AccuracyError(QsdLabError):
    """A quadrature or estimate failed to reach the requested tolerance.

    Carries the best partial value and the achieved error estimate so callers
    can decide whether the partial result is still usable.
    """

    def __init__(self, message, partial=None, error=None):
        super().__init__(message)
        self.partial = partial
        self.error = error


class IndeterminateRateError(AccuracyError):
    """Numeric tail-rate estimation did not stabilize."""


class NotSmoothlyVaryingError(QsdLabError):
    """-log tail is not positive/increasing beyond the probe cutoff."""


class ClassificationRefusedError(QsdLabError):
    """The exponential rate has liminf < alpha <= limsup (no true limit)."""


class RegimeError(QsdLabError):
    """A scaling/limit-law operation was called outside the heavy-scaled regime."""


class ConditioningDegenerateError(QsdLabError):
    """Survival underflowed with no usable log-space fallback."""


class DegenerateMeasureError(QsdLabError):
    """All mass of a derived measure fell below the quadrature floor."""


class ExtrapolationError(QsdLabError):
    """A tabulated measure was evaluated beyond its grid without a declared extension."""


class ExtinctionError(QsdLabError):
    """Every particle of a resampling run was absorbed simultaneously."""

    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class ValidationError(QsdLabError):
    """An experiment spec file failed to parse or validate."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
