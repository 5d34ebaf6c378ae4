import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a closed-form expression."""


class ConfigurationError(ValueError):
    """Unknown quadrature rule, kernel tag, matrix name or similar option."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SingularSystemError(np.linalg.LinAlgError):
    """The (stacked) least-squares system is numerically rank deficient."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration limit.

    The best iterate and its optimality residual are attached so callers can
    decide whether the result is still usable.
    """

    def __init__(self, message, x=None, kkt_residual=None, iterations=None):
        super().__init__(message)
        self.x = x
        self.kkt_residual = kkt_residual
        self.iterations = iterations


class SelectionError(RuntimeError):
    """No regularisation parameter could be selected."""
