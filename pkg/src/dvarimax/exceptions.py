"""Error types raised by the estimation pipeline."""
from __future__ import annotations


class DeflationVarimaxError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficiencyError(DeflationVarimaxError):
    """The requested rank exceeds the numerically observable rank of the data."""


class CorrectionInfeasibleError(DeflationVarimaxError):
    """A noise-corrected eigenvalue is not positive.

    Callers should fall back to the uncorrected pipeline.
    """


class DivergenceError(DeflationVarimaxError):
    """Projected gradient descent produced a non-finite or vanishing iterate."""

    def __init__(self, message: str, iteration: int | None = None,
                 column: int | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.column = column


class DegenerateSolutionsError(DeflationVarimaxError):
    """Stacked rotation columns are numerically rank deficient.

    This signals that two deflation rounds recovered (nearly) the same
    column, so no orthogonal matrix is close to the stacked solutions.
    """


class NoSignalError(DeflationVarimaxError):
    """All eigenvalues are numerically zero; rank selection is impossible."""


class DegenerateProjectorError(DeflationVarimaxError):
    """The orthogonal complement of the solved columns is numerically empty."""


class DegenerateSlicingError(DeflationVarimaxError):
    """Every random slice produced a zero singular-value gap."""
