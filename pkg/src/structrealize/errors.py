"""Exception hierarchy shared by all modules."""


class StructRealizeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(StructRealizeError, ValueError):
    """An argument lies outside the admissible domain."""


class EvaluationError(StructRealizeError, ArithmeticError):
    """A coefficient function returned a non-finite value."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SingularPencilError(StructRealizeError, ArithmeticError):
    """The matrix pencil is numerically singular at the requested frequency."""

    def __init__(self, message, s=None, rcond=None):
        super().__init__(message)
        self.s = s
        self.rcond = rcond


class FactorizationError(StructRealizeError, ArithmeticError):
    """LU factorization of a (supposedly) nonsingular matrix failed."""


class InstabilityError(StructRealizeError, ArithmeticError):
    """A time integration produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NoExcitationError(StructRealizeError, ValueError):
    """The input signal carries no usable Fourier coefficient."""


class MissingExcitationError(StructRealizeError, ValueError):
    """A requested frequency is not excited by the input signal."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class DegenerateProblemError(StructRealizeError, ArithmeticError):
    """Every singular value of a least-squares matrix was truncated."""


class InsufficientDataError(StructRealizeError, ValueError):
    """Too few interpolation points for the requested structure."""


class HaarViolationError(StructRealizeError, ArithmeticError):
    """An entry-wise interpolation system is numerically singular."""

    def __init__(self, message, entry=None):
        super().__init__(message)
        self.entry = entry


class RealnessViolationError(StructRealizeError, ArithmeticError):
    """A realization expected to be real carries significant imaginary parts."""


class TruncationUnsafeError(StructRealizeError, ArithmeticError):
    """The rank condition required for redundancy removal does not hold."""

    def __init__(self, message, pencil_rank=None, stacked_ranks=None):
        super().__init__(message)
        self.pencil_rank = pencil_rank
        self.stacked_ranks = stacked_ranks


class VerificationError(StructRealizeError, ArithmeticError):
    """A realization failed to reproduce its interpolation data."""


class OptimizationError(StructRealizeError, RuntimeError):
    """Parameter optimization found no admissible point."""


class PipelineStageError(StructRealizeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
