"""Exception types shared across the simulator."""


class ValidationError(ValueError):
    """An input violates a documented range or invariant."""


class UndefinedStatisticError(ValueError):
    """A statistic was requested where it is mathematically undefined."""


class FitError(RuntimeError):
    """Fringe fit is degenerate."""


class GridStabilityError(ValueError):
    """The requested solver grid cannot resolve the problem."""


class CalibrationError(RuntimeError):
    """Root find could not bracket or reach its target.

    ``trace`` holds the ``(knob, value)`` pairs evaluated before giving up.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class DataInsufficientError(RuntimeError):
    """Not enough counts to form an estimate."""
