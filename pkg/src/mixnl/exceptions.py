"""Exception hierarchy for mixnl."""


class MixnlError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MixnlError, ValueError):
    """An argument lies outside the admissible domain of an operation."""


class DegenerateMeasureError(DomainError):
    pass


class DegenerateOperatorError(DomainError):
    pass


class AssemblyError(MixnlError):
    """Quadrature did not reach the requested tolerance.

    ``worst_pair`` holds the (cell, cell) indices with the largest estimated error.
    """

    def __init__(self, message, worst_pair=None):
        super().__init__(message)
        self.worst_pair = worst_pair


class EigenSolverError(MixnlError):
    pass


class GeometryNotCertifiedError(MixnlError):
    pass


class NonConvergenceError(MixnlError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class DegeneratePathError(NonConvergenceError):
    pass


class ConfigError(MixnlError, ValueError):
    """Invalid run configuration; ``key`` names the first failing entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class HypothesisViolation(MixnlError):
    """A grid check of a structural inequality failed; ``witness`` is the offending sample."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
