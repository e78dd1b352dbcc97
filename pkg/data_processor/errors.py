"""
Exception hierarchy shared by the collectors, the processors and the CLI.

Everything raised on purpose derives from VolatilityToolError so the command line
front end can turn it into a diagnostic and exit status 1.
"""

from typing import Optional


class VolatilityToolError(Exception):
    """Root of every error raised deliberately by this package."""


class SchemaError(VolatilityToolError, ValueError):
    """A mapped column is missing, the schema map is incomplete, or an input is not UTF-8 text."""


class DuplicateKeyError(VolatilityToolError, ValueError):
    """Two rows of one table share a primary key."""

    def __init__(self, table: str, key: str):
        super().__init__(f"Duplicate primary key in {table} table: {key}")
        self.table = table
        self.key = key


class ImputationError(VolatilityToolError, ValueError):
    """A column has no observed value to impute from."""


class EmptyInputError(VolatilityToolError, ValueError):
    pass


class InsufficientDataError(VolatilityToolError, ValueError):
    pass


class ZeroSpeedError(VolatilityToolError, ValueError):
    """A zero or negative speed was met under the Error policy."""

    def __init__(self, index: int, speed: float):
        super().__init__(f"Speed {speed} at index {index} is not positive")
        self.index = index


class TripExcludedError(VolatilityToolError, ValueError):
    """A trip has too few usable returns; callers record it and move on."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class UndefinedCorrelationError(VolatilityToolError, ValueError):
    pass


class InfiniteVIFError(VolatilityToolError, ValueError):
    def __init__(self, column: str):
        super().__init__(f"Column '{column}' is perfectly collinear with the other predictors")
        self.column = column


class DesignError(VolatilityToolError, ValueError):
    """The rows cannot be turned into a design matrix for the requested model."""


class UnderdeterminedError(VolatilityToolError, ValueError):
    pass


class ConvergenceError(VolatilityToolError, RuntimeError):
    def __init__(self, message: str, gap: float, quantile: Optional[float] = None):
        super().__init__(message)
        self.gap = gap
        self.quantile = quantile


class ParameterError(VolatilityToolError, ValueError):
    pass


class ReportError(VolatilityToolError, ValueError):
    pass


class ConfigError(VolatilityToolError, ValueError):
    pass
