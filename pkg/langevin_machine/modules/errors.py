"""
Exception hierarchy for the Langevin machine library.
Every error carries a short machine-readable kind used by the CLI error line.
"""

import re


class LangevinError(Exception):
    """Base class for all library errors."""

    @property
    def kind(self) -> str:
        # ParameterError -> parameter_error
        return re.sub(r"(?<!^)(?=[A-Z])", "_", type(self).__name__).lower()


class ParameterError(LangevinError, ValueError):
    """A parameter is outside its admissible range."""


class DimensionError(LangevinError, ValueError):
    """Array shapes or indices do not match."""


class OrderTooLargeError(LangevinError, ValueError):
    """Polynomial order above the supported maximum."""


class ZeroDenominatorError(LangevinError, ZeroDivisionError):
    """A ratio has a vanishing denominator."""


class TruncationBoundError(LangevinError, ValueError):
    """Noise truncation is inconsistent with the declared Δ_max bound."""


class ConvergenceError(LangevinError, RuntimeError):
    """A fit or iterative solve did not converge."""


class BracketError(LangevinError, RuntimeError):
    """Bisection bracket has no sign change."""


class ConfigError(LangevinError, ValueError):
    """Experiment configuration is unreadable or inconsistent."""


class SeriesTooShortError(LangevinError, ValueError):
    """Time series too short for the requested statistic."""


class InsufficientDataError(LangevinError, ValueError):
    """Too few samples or points for the requested estimate."""
