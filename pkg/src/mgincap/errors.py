"""Exception types raised across the package."""


class MgincapError(Exception):
    """Base class for all package errors."""


class DomainError(MgincapError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedArgumentError(MgincapError, ValueError):
    """The argument is valid mathematically but no evaluation path is implemented."""


class DivergentError(MgincapError, ValueError):
    """The requested integral or moment does not exist."""


class DegenerateModelError(MgincapError, ValueError):
    """The noise model sits at a degenerate corner where an operation is undefined."""


class ResolutionError(MgincapError, ValueError):
    """A discretisation is too coarse to represent the density faithfully."""


class ConvergenceError(MgincapError, RuntimeError):
    """An iterative method did not reach its tolerance.

    The last iterate (if any) is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
