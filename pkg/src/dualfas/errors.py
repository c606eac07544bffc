"""Exception types raised across the package."""


class StructuralError(ValueError):
    """Input has the wrong shape, symmetry or structure."""


class NumericalDomainError(ValueError):
    """Input lies outside the numerical domain of an operation."""


class SizeError(ValueError):
    """Input is too large for the requested routine."""


class PreconditionError(ValueError):
    """A modelling precondition (e.g. the mean-matrix pattern) is violated."""


class ConvergenceError(RuntimeError):
    """An iterative procedure failed to reach its tolerance."""
