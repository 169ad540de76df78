"""Exception hierarchy shared across the package."""


class ImpactLabError(Exception):
    """Base class for all package errors."""


class BookError(ImpactLabError):
    """Invalid order-book operation."""


class GridError(BookError):
    """Order references a price level outside the book grid."""


class CancelError(BookError):
    """Cancellation exceeds the standing queue at its level."""


class UndefinedQuoteError(BookError):
    """Best bid/ask requested while that side of the book is empty."""


class AlignmentError(ImpactLabError):
    """Series passed to an estimator do not line up."""


class StationarityError(ImpactLabError):
    """Self-exciting flow specification has spectral radius >= 1."""


class CalibrationError(ImpactLabError):
    """Model fit failed; diagnostics are attached.

    Attributes:
        diagnostics: dict with solver status, message and residuals.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(ImpactLabError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class RegimeError(ImpactLabError):
    """Data does not span the regimes a measurement needs."""


class StrategyError(ImpactLabError):
    """Trading strategy violates a structural requirement (e.g. a cost
    functional evaluated on a strategy that is not a round trip)."""


class ConfigError(ImpactLabError):
    """Config parsing/validation failed; collects every problem found.

    Attributes:
        problems: list of human-readable messages.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
