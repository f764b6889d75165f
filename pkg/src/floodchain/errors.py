"""Exception hierarchy shared by all modules.

Numerical failures derive from :class:`NumericalError`; the CLI maps them to
exit code 2. Input problems derive from :class:`InputError` (exit code 1).
"""


class FloodChainError(Exception):
    """Base class for every error raised by the package."""


class InputError(FloodChainError, ValueError):
    """Bad user input: malformed files, invalid configuration."""


class NumericalError(FloodChainError, ArithmeticError):
    """A computation could not produce a valid result."""


class MalformedRow(InputError):
    def __init__(self, row, reason=""):
        self.row = row
        super().__init__(f"malformed row {row}" + (f": {reason}" if reason else ""))


class NonIncreasingDates(InputError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row}: date does not increase")


class NegativeDischarge(InputError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row}: negative discharge")


class ConstraintViolation(InputError):
    """A dependence model parameter lies outside its domain."""

    def __init__(self, family, constraint):
        self.family = family
        self.constraint = constraint
        super().__init__(f"{family}: constraint violated: {constraint}")


class BelowThreshold(NumericalError, ValueError):
    """The GPD marginal is only specified at or above the threshold."""


class SupportExceeded(NumericalError):
    """Observation beyond the upper end point of a negative-shape GPD."""


class InsufficientData(NumericalError, ValueError):
    pass


class InsufficientExceedances(InsufficientData):
    pass


class DegenerateMoments(NumericalError):
    pass


class NonPositiveDensity(NumericalError):
    pass


class QuantileBelowThreshold(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """Optimizer failed; carries the best point found."""

    def __init__(self, message, best_x=None, best_value=None, grad_norm=None):
        self.best_x = best_x
        self.best_value = best_value
        self.grad_norm = grad_norm
        super().__init__(f"{message} (best value={best_value}, |grad|={grad_norm})")


class BracketError(NumericalError):
    def __init__(self, z1, draw):
        self.z1 = z1
        self.draw = draw
        super().__init__(f"could not bracket conditional quantile (z1={z1}, draw={draw})")
