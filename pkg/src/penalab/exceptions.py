"""Exception and warning classes shared by all penalab modules."""


class PenalabError(Exception):
    """Base class for errors raised by penalab."""


class GridMismatchError(PenalabError, ValueError):
    """Two fields (or a field and an operator) live on different grids."""


class ConvergenceError(PenalabError):
    """An iterative method stopped before reaching its tolerance.

    The achieved residual is kept in ``residual`` so callers can decide
    whether the iterate is still usable.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class LinearSolveError(ConvergenceError):
    pass


class EigenSolverError(ConvergenceError):
    pass


class ShootingError(PenalabError):
    """Radial shooting failed to find a first zero."""


class ConfigError(PenalabError, ValueError):
    pass


class PenalabWarning(UserWarning):
    pass


class SaturationWarning(PenalabWarning, RuntimeWarning):
    """A power u**q was capped at the saturation value."""
