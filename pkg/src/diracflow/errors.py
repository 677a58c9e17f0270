"""Exception types shared across the package."""


class DiracflowError(Exception):
    """Base class for all package errors."""


class InvariantViolation(DiracflowError):
    """A structural assumption on the input data failed a numerical check."""


class GapTooSmall(DiracflowError):
    """A spectral cut threshold landed too close to an eigenvalue."""

    def __init__(self, threshold, eigenvalue, gap_tol):
        self.threshold = threshold
        self.eigenvalue = eigenvalue
        self.gap_tol = gap_tol
        super().__init__(
            f"eigenvalue {eigenvalue!r} within gap_tol={gap_tol!r} of cut "
            f"threshold {threshold!r}; refine the cut or the truncation"
        )


class ConvergenceError(DiracflowError):
    """An iterative computation did not reach the requested tolerance.

    Carries whatever partial data the caller may want for diagnostics.
    """

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class TrackMatchingError(DiracflowError):
    """Eigenvalue track matching stayed ambiguous after maximal refinement."""


class NoFlowPartition(DiracflowError):
    """No admissible threshold exists on some time subinterval."""


class NotASolution(DiracflowError):
    """A grid function failed the evolution-equation residual check."""


class BandwidthError(DiracflowError):
    """Angular Fourier data too wide for the requested mode truncation."""


class ConfigError(DiracflowError):
    """Experiment configuration failed validation."""
