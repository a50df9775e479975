"""Exception hierarchy shared by every module in the package."""


class MonitorError(Exception):
    """Base class for all package errors."""


class ChainError(MonitorError, ValueError):
    """A chain definition violates a structural invariant."""


class RowSumError(ChainError):
    pass


class NegativeEntry(ChainError):
    pass


class DimensionMismatch(ChainError):
    pass


class HorizonExceeded(MonitorError, IndexError):
    """An n-step quantity was requested beyond the precomputed horizon."""


class NumericFailure(MonitorError, ArithmeticError):
    """Base for numeric failures; the CLI maps these to exit code 2."""


class NoConvergence(NumericFailure):
    pass


class SingularSystem(NumericFailure):
    pass


class TooLarge(MonitorError, ValueError):
    """Exhaustive enumeration would exceed the configured size guard."""


class ConfigError(MonitorError, ValueError):
    """An experiment configuration could not be loaded or is inconsistent."""
