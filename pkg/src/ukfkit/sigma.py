"""Sigma-point ensembles, weights, and weighted moment computations.

An ensemble is an ``n x (2n+1)`` matrix whose columns are deterministically
placed sample points: the mean in column 0, then the mean plus/minus the
scaled columns of a matrix square root of the covariance.  Weighted first
and second moments of such an ensemble reproduce the mean and covariance
exactly, for every value of the spread parameter ``alpha``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import CovarianceDegenerateError

# Relative Frobenius asymmetry accepted before a matrix is rejected as
# non-symmetric; accepted inputs are symmetrized before factorization.
SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class WeightSet:
    """Mean weights for a ``2*state_dim + 1`` point ensemble.

    The center point carries weight ``(alpha**2 - 1) / alpha**2`` and every
    off-center point ``1 / (2 * alpha**2 * state_dim)``; the weights sum
    to one.  The covariance weighting is the diagonal matrix built from
    the same vector (see :attr:`diag`).
    """

    alpha: float
    state_dim: int
    w: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return 2 * self.state_dim + 1

    @property
    def diag(self) -> np.ndarray:
        """The weight vector as a diagonal matrix."""
        return np.diag(self.w)


def make_weights(alpha: float, state_dim: int) -> WeightSet:
    """Build the ensemble weight set for a given spread and state dimension.

    Parameters
    ----------
    alpha : float
        Positive spread tuning parameter.
    state_dim : int
        State dimension; the ensemble has ``2*state_dim + 1`` columns.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not (isinstance(state_dim, (int, np.integer)) and state_dim >= 1):
        raise ValueError(f"state_dim must be a positive integer, got {state_dim}")
    w = np.full(2 * state_dim + 1, 1.0 / (2.0 * alpha**2 * state_dim))
    w[0] = (alpha**2 - 1.0) / alpha**2
    return WeightSet(alpha=float(alpha), state_dim=int(state_dim), w=w)


def spd_factor(mat: np.ndarray) -> np.ndarray:
    """Lower-triangular ``S`` with ``S @ S.T`` equal to a symmetric PD matrix.

    The input must be symmetric to within ``SYMMETRY_RTOL`` (relative
    Frobenius); it is symmetrized before factorization so accumulated
    floating-point asymmetry does not abort long runs.

    Raises
    ------
    CovarianceDegenerateError
        If the matrix is not positive definite; carries the 1-based index
        of the failing leading minor.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    norm = np.linalg.norm(mat)
    if norm > 0 and np.linalg.norm(mat - mat.T) > SYMMETRY_RTOL * norm:
        raise ValueError("matrix is not symmetric")
    sym = 0.5 * (mat + mat.T)
    if not np.isfinite(sym).all():
        raise CovarianceDegenerateError("matrix has non-finite entries")
    potrf, = get_lapack_funcs(("potrf",), (sym,))
    factor, info = potrf(sym, lower=True, clean=True)
    if info != 0:
        raise CovarianceDegenerateError(
            f"matrix is not positive definite (leading minor {info})", pivot=int(info)
        )
    return factor


def build_ensemble(mean: np.ndarray, cov: np.ndarray, alpha: float) -> np.ndarray:
    """Place ``2n+1`` sigma points around ``mean`` for covariance ``cov``.

    Column 0 is the mean; columns ``1..n`` add and columns ``n+1..2n``
    subtract ``alpha`` times the columns of a lower-triangular root of
    ``n * cov``.  The weighted moments of the result reproduce
    ``(mean, cov)`` for every positive ``alpha``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = mean.shape[0]
    if mean.ndim != 1:
        raise ValueError("mean must be a vector")
    if cov.shape != (n, n):
        raise ValueError(f"cov shape {cov.shape} does not match state dim {n}")
    root = spd_factor(n * cov)
    points = np.tile(mean[:, None], (1, 2 * n + 1))
    points[:, 1 : n + 1] += alpha * root
    points[:, n + 1 :] -= alpha * root
    return points


def replicate(vec: np.ndarray, count: int) -> np.ndarray:
    """Tile a vector into a matrix with ``count`` identical columns."""
    if not (isinstance(count, (int, np.integer)) and count >= 1):
        raise ValueError(f"count must be a positive integer, got {count}")
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1:
        raise ValueError("expected a vector")
    return np.tile(vec[:, None], (1, count))


def weighted_mean(points: np.ndarray, weights: WeightSet) -> np.ndarray:
    """Weighted column mean ``points @ w``."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != weights.count:
        raise ValueError(
            f"ensemble has {points.shape} shape, expected {weights.count} columns"
        )
    return points @ weights.w


def deviations(points: np.ndarray, weights: WeightSet) -> np.ndarray:
    """Subtract the weighted mean from every column.

    The result has zero weighted mean by construction.
    """
    return points - weighted_mean(points, weights)[:, None]


def weighted_cross(a_dev: np.ndarray, b_dev: np.ndarray, weights: WeightSet) -> np.ndarray:
    """Weighted cross moment ``a_dev @ diag(w) @ b_dev.T``.

    Both inputs must have one column per ensemble point; they are normally
    outputs of :func:`deviations`.
    """
    a_dev = np.asarray(a_dev, dtype=float)
    b_dev = np.asarray(b_dev, dtype=float)
    if a_dev.ndim != 2 or b_dev.ndim != 2:
        raise ValueError("expected matrices")
    if a_dev.shape[1] != weights.count or b_dev.shape[1] != weights.count:
        raise ValueError(
            f"column counts {a_dev.shape[1]}, {b_dev.shape[1]} do not match "
            f"{weights.count} weights"
        )
    return (a_dev * weights.w) @ b_dev.T
