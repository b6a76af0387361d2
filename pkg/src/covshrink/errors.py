"""Exception hierarchy. The CLI maps the three branches to exit codes
(config=2, data=3, numeric=4); library code raises the specific subclasses."""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ToolkitError, ValueError):
    """Invalid parameters, grids, or configuration/data-shape mismatches."""


class DataError(ToolkitError, ValueError):
    """Malformed or insufficient input data."""


class NumericError(ToolkitError, ArithmeticError):
    """Numerical failure: degenerate moments, indefinite matrices, etc."""


class MissingValueError(DataError):
    def __init__(self, row, col, message=None):
        self.row = row
        self.col = col
        super().__init__(message or f"missing value at row {row!r}, column {col!r}")


class NoHistoryError(DataError):
    """No strictly-past records are available for an as-of date."""


class ZeroVarianceError(NumericError):
    def __init__(self, asset, message=None):
        self.asset = asset
        super().__init__(message or f"zero variance for asset {asset!r}")


class ZeroMeanError(NumericError):
    """Mean vector is identically zero; max-Sharpe direction undefined."""


class DegenerateVarianceError(NumericError):
    """A realized return series has zero variance."""


class NotPositiveDefiniteError(NumericError):
    """Matrix expected to be positive definite is not."""


class EstimatorFailureError(NumericError):
    """An estimator failed during a backtest; message carries date context."""
