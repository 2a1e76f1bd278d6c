"""Exception hierarchy shared by all modules."""


class GlrtExpError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(GlrtExpError):
    """Invalid configuration document or option combination."""


class DomainError(GlrtExpError):
    """An observation lies outside the support of a family."""


class ParameterError(GlrtExpError):
    """A parameter vector lies outside its box."""


class NumericError(GlrtExpError):
    """A quadrature or series evaluation failed to reach its tolerance."""


class DivergenceError(NumericError):
    """An integrand or series is not dominated at the truncation boundary.

    ``tail`` names the offending tail, e.g. ``"upper (x -> +inf)"``.
    """

    def __init__(self, message: str, tail: str = ""):
        super().__init__(message)
        self.tail = tail


class RangeError(NumericError):
    """A target value lies outside an attainable interval.

    ``interval`` carries the attainable ``(low, high)`` range.
    """

    def __init__(self, message: str, interval=None):
        super().__init__(message)
        self.interval = interval


class ConvergenceError(GlrtExpError):
    """An optimizer failed; ``incumbent`` carries the best point found."""

    def __init__(self, message: str, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class FitError(GlrtExpError):
    """A least-squares fit has too few usable points."""
