"""Exception hierarchy shared by all modules."""


class PreyTaxisError(Exception):
    """Base class for every error raised by the package."""


class DomainError(PreyTaxisError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(PreyTaxisError, ValueError):
    """Invalid configuration or model construction."""


class AssumptionError(ConfigError):
    """A standing model assumption is violated.

    The ``assumption`` attribute names the violated hypothesis, e.g.
    ``"(A_C)"`` for the positivity of the scalar constants.
    """

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__(f"{assumption} violated: {message}")


class NumericError(PreyTaxisError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class QuadratureError(NumericError):
    def __init__(self, message, *, interval=None, estimate=None, error=None, depth=None):
        self.interval = interval
        self.estimate = estimate
        self.error = error
        self.depth = depth
        detail = f" (interval={interval}, estimate={estimate}, error={error}, depth={depth})"
        super().__init__(message + detail)
