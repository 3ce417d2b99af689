"""Exception types raised across the package."""


class HalypoError(Exception):
    """Base class for all errors raised by this package."""


class EvaluationError(HalypoError):
    """A payoff or field evaluation produced a non-finite value."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class OracleError(EvaluationError):
    """A finite-difference probe hit a non-finite function value."""


class InfeasibleConstraintError(HalypoError):
    """The stability half-space is empty (zero normal, positive offset)."""


class UnsupportedOperationError(HalypoError):
    """The game does not provide the capability an operation needs."""


class ConfigError(HalypoError):
    """A run configuration failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
