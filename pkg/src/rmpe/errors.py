"""Exception hierarchy shared by every module of the package."""


class RMPEError(Exception):
    """Base class for all package errors."""


class StructuralError(RMPEError, ValueError):
    """Inputs have inconsistent shapes or violate a structural invariant."""


class DomainError(RMPEError, ValueError):
    """A scalar argument lies outside the domain of a formula."""


class ConfigError(RMPEError, ValueError):
    """An invalid configuration object."""


class NumericalError(RMPEError, ArithmeticError):
    """Base class for failures of the floating point computation itself."""


class RankDeficiencyError(NumericalError):
    """The unregularized coefficient system is numerically singular.

    Attributes
    ----------
    pivot : int
        Index of the first pivot that fell below tolerance.
    value : float
        Magnitude of that pivot.
    tolerance : float
        The threshold it was compared against.
    """

    def __init__(self, pivot, value, tolerance):
        self.pivot = pivot
        self.value = value
        self.tolerance = tolerance
        super().__init__(
            f"rank-deficient system: pivot {pivot} has magnitude {value:.3e} "
            f"below tolerance {tolerance:.3e}; use lambda > 0"
        )


class DegenerateSystemError(NumericalError):
    """The normalization 1^T z of the coefficient system vanished."""


class NumericalBreakdownError(NumericalError):
    """Loss of positive definiteness during an online Cholesky append."""


class SolverError(NumericalError):
    """An inner convex solver did not converge."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class EstimationError(NumericalError):
    """An iterative estimate (e.g. power iteration) failed to converge."""


class InvalidSpectrumError(DomainError):
    """Spectral information incompatible with the requested method."""


class AllCandidatesInvalidError(NumericalError):
    """Every regularization candidate produced a non-finite objective value."""


class DivergedError(NumericalError):
    """A base method produced non-finite iterates.

    Attributes
    ----------
    trace : object
        The records gathered before divergence.
    """

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class ReferenceNotConvergedError(RMPEError):
    """The high accuracy reference solve ran out of budget."""


class ParseError(RMPEError, ValueError):
    """Malformed input data.

    Attributes
    ----------
    lineno : int or None
        1-based line number of the offending line.
    """

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class EmptyDatasetError(ParseError):
    """The input contained no samples."""
