"""Exception hierarchy shared by every gtml module."""
from typing import Optional


class GtmlError(Exception):
    """Base class for all gtml failures."""

    kind = "gtml_error"


class ConfigError(GtmlError):
    """Config file missing, malformed, or failing schema validation."""

    kind = "config_error"


class InputError(GtmlError, ValueError):
    """Invalid argument: unknown label, shape mismatch, empty input."""

    kind = "input_error"


class NumericalError(GtmlError):
    kind = "numerical_error"


class ConvergenceError(NumericalError):
    """An iterative solver stopped before reaching its tolerance."""

    kind = "convergence_error"

    def __init__(self, message: str, residual: Optional[float] = None, iterations: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NotErgodicError(NumericalError):
    """Chain is reducible, periodic, or has no all-positive power within the allowed horizon."""

    kind = "not_ergodic"


class DomainError(NumericalError, ValueError):
    """A bound formula was evaluated outside its stated precondition."""

    kind = "domain_error"

    def __init__(self, message: str, threshold: Optional[float] = None):
        super().__init__(message)
        self.threshold = threshold
