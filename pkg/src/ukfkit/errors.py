"""Exception types raised by the numerical core."""


class EstimationError(Exception):
    """Base class for numerical failures inside a filter step.

    ``step`` is attached by :func:`ukfkit.filters.run_filter` when the
    failure occurs mid-run; it is ``None`` for standalone calls.
    """

    step: int | None = None


class CovarianceDegenerateError(EstimationError):
    """A covariance matrix could not be factorized as SPD.

    ``pivot`` is the 1-based index of the first non-positive-definite
    leading minor reported by the factorization, when known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class GainSingularError(EstimationError):
    """The output-error covariance was singular; no gain can be formed."""
