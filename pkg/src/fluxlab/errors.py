"""Exception types raised across the package."""


class FluxlabError(Exception):
    """Base class for all package errors."""


class DomainError(FluxlabError, ValueError):
    """A parameter lies outside the existence domain of a formula or solution."""


class ShapeError(FluxlabError, ValueError):
    """Array length does not match the grid."""


class ConvergenceError(FluxlabError, RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        Last max-norm residual.
    iterations : int
        Iterations performed.
    diagnostic : str
        Free-form detail (e.g. condition estimate).
    """

    def __init__(self, message, residual=float("nan"), iterations=0, diagnostic=""):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.diagnostic = diagnostic


class BlowUpError(FluxlabError, RuntimeError):
    """Time integration produced non-finite values.

    ``last_good`` holds the last finite state and ``time`` its instant.
    """

    def __init__(self, message, last_good=None, time=float("nan")):
        super().__init__(message)
        self.last_good = last_good
        self.time = time
