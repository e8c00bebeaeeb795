"""Exception hierarchy shared by all modules."""


class PararealError(Exception):
    """Base class for errors raised by pararealkit."""


class NonFiniteStateError(PararealError, ValueError):
    """A state vector contains NaN or Inf."""


class IntegrationError(PararealError, ArithmeticError):
    """A propagator produced a non-finite intermediate value."""


class ContractionError(PararealError, ValueError):
    """Backward Euler was requested with h*L >= 1."""


class FixedPointError(PararealError, ArithmeticError):
    """The backward Euler fixed-point iteration ran out of iterations."""


class ConfigError(PararealError, ValueError):
    """Invalid experiment configuration.

    ``key`` names the offending field when there is one.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
