"""Exception and warning types shared across the package."""


class AncientFlowError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(AncientFlowError, ValueError):
    """Raised when an argument is outside the admissible range."""


class DomainError(AncientFlowError, ValueError):
    """Raised when input data violates a geometric precondition."""


class SolverError(AncientFlowError, RuntimeError):
    """Raised when an iterative solver fails to converge or to bracket.

    Parameters
    ----------
    message : str
        Human readable description.
    trace : list, optional
        Diagnostic history of the iteration (trial values, residuals).
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class GraphError(AncientFlowError, RuntimeError):
    """Raised when a surface stops being a graph over the reference cylinder."""


class PreconditionError(AncientFlowError, ValueError):
    """Raised when a documented precondition of an operation does not hold."""


class TruncationWarning(UserWarning):
    """Issued when a Gaussian-weighted integrand has not decayed at the domain ends."""
