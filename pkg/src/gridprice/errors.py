"""Exception hierarchy shared by every stage of the pipeline."""


class GridPriceError(Exception):
    """Base class for all package errors."""


class InvalidRecordError(GridPriceError, ValueError):
    """A raw record carries a non-finite or otherwise unusable field."""

    def __init__(self, field, value=None):
        self.field = field
        self.value = value
        super().__init__(f"invalid value for field {field!r}: {value!r}")


class DegenerateIntervalError(GridPriceError, ValueError):
    """Total generation in an interval is not positive."""


class InvalidParameterError(GridPriceError, ValueError):
    pass


class InsufficientDataError(GridPriceError, ValueError):
    pass


class SolverError(GridPriceError, RuntimeError):
    """The LP solver failed; ``diagnostics`` holds the raw solver status."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(GridPriceError, RuntimeError):
    """Maximum likelihood did not converge from any start."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class InfiniteQuantileError(GridPriceError, ValueError):
    pass
