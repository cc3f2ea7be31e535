"""Exception types shared across the package."""


class TbcError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TbcError, ValueError):
    """Invalid grid, time ladder, potential, or experiment configuration."""


class SingularParameterError(TbcError, ValueError):
    """A parameter combination hits a pole of a closed-form expression."""


class StateError(TbcError, RuntimeError):
    """Solver state is inconsistent (e.g. a history is missing a step)."""


class ConvergenceError(TbcError, RuntimeError):
    """Iterative linear solve failed to reach tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MemoryBudgetError(TbcError, RuntimeError):
    """Projected boundary-history storage exceeds the configured budget."""


class MetricUndefinedError(TbcError, ValueError):
    """A relative metric was requested against a zero reference."""
