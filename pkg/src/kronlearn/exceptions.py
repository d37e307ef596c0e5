class KronlearnError(Exception):
    """Base class for errors raised by kronlearn."""


class DisconnectedGraphError(KronlearnError, ValueError):
    """A Laplacian has more than one zero eigenvalue."""


class DisconnectedProduct(KronlearnError, ValueError):
    """``L + J`` is not positive definite at the requested factor weights."""


class LineSearchFailure(KronlearnError, RuntimeError):
    """Backtracking exhausted its halvings without finding a feasible decrease."""

    def __init__(self, message, *, factor=None, sweep=None):
        super().__init__(message)
        self.factor = factor
        self.sweep = sweep


class GenerationError(KronlearnError, RuntimeError):
    """Random graph generation could not produce a connected graph."""

