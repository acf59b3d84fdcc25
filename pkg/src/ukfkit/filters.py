"""Filter step functions: Kalman, two-step, one-step, and modified one-step.

All four variants share the same gain/posterior machinery: the gain is the
cross covariance times the inverse output-error covariance, computed by a
Cholesky solve, and the posterior covariance is the prior covariance minus
``gain @ cross_cov.T``, symmetrized.  The variants differ only in how the
output-error and cross covariances are approximated:

* ``kf_step`` uses the system matrices directly (linear systems only).
* ``ukf2_step`` regenerates a second sigma-point ensemble from the prior
  moments before applying the output map.
* ``ukf1_step`` reuses the dynamics-propagated ensemble, which on a linear
  system leaves the process-noise terms out of both covariances.
* ``mukf_step`` restores those missing terms from the output Jacobian,
  recovering the Kalman filter on linear systems with one ensemble.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import sigma
from .errors import CovarianceDegenerateError, EstimationError, GainSingularError
from .models import LinearModel, NonlinearModel, Trajectory


@dataclass(frozen=True)
class Posterior:
    """State estimate after the measurement update at ``step``."""

    mean: np.ndarray
    cov: np.ndarray
    step: int = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValueError(f"cov shape {cov.shape} does not match mean dim {n}")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise ValueError("posterior moments must be finite")
        norm = np.linalg.norm(cov)
        if norm > 0 and np.linalg.norm(cov - cov.T) > sigma.SYMMETRY_RTOL * norm:
            raise ValueError("cov is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def trace(self) -> float:
        return float(np.trace(self.cov))


@dataclass(frozen=True)
class StepDiagnostics:
    """Intermediate quantities of one filter step.

    ``jitter_events`` counts ensemble generations that needed the optional
    diagonal regularization before factorizing.
    """

    prior_mean: np.ndarray
    prior_cov: np.ndarray
    Pz: np.ndarray
    Pez: np.ndarray
    gain: np.ndarray
    innovation: np.ndarray
    predicted_output: np.ndarray
    jitter_events: int = 0


class FilterKind(str, Enum):
    KF = "kf"
    UKF2 = "ukf2"
    UKF1 = "ukf1"
    MUKF = "mukf"


def _symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def posterior_update(
    prior_mean: np.ndarray,
    prior_cov: np.ndarray,
    Pz: np.ndarray,
    Pez: np.ndarray,
    y: np.ndarray,
    yhat: np.ndarray,
    step: int = 0,
) -> tuple[Posterior, np.ndarray]:
    """Minimum-variance measurement update shared by all filters.

    The gain solves ``Pz @ K.T = Pez.T`` through a Cholesky factorization
    of ``Pz``; ``Pz`` is never inverted explicitly.  A zero-dimensional
    measurement leaves the prior unchanged with an empty gain.

    Raises
    ------
    GainSingularError
        If ``Pz`` cannot be factorized.
    CovarianceDegenerateError
        If the updated covariance is no longer positive definite.
    """
    prior_mean = np.asarray(prior_mean, dtype=float)
    prior_cov = np.asarray(prior_cov, dtype=float)
    Pz = np.asarray(Pz, dtype=float)
    Pez = np.asarray(Pez, dtype=float)
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    n = prior_mean.shape[0]
    p = y.shape[0]
    if Pz.shape != (p, p) or Pez.shape != (n, p) or yhat.shape != (p,):
        raise ValueError(
            f"inconsistent shapes: Pz {Pz.shape}, Pez {Pez.shape}, "
            f"y {y.shape}, yhat {yhat.shape}, n={n}"
        )
    if p == 0:
        return Posterior(prior_mean, prior_cov, step), np.zeros((n, 0))
    if not np.isfinite(Pz).all():
        raise GainSingularError("output-error covariance has non-finite entries")
    try:
        factor = cho_factor(Pz, lower=True)
    except np.linalg.LinAlgError as exc:
        raise GainSingularError(f"output-error covariance is singular: {exc}") from exc
    gain = cho_solve(factor, Pez.T).T
    mean = prior_mean + gain @ (y - yhat)
    cov = _symmetrize(prior_cov - gain @ Pez.T)
    sigma.spd_factor(cov)  # surfaces degeneracy instead of hiding it
    return Posterior(mean, cov, step), gain


def kf_step(
    model: LinearModel, post: Posterior, u: np.ndarray, y: np.ndarray
) -> tuple[Posterior, StepDiagnostics]:
    """One Kalman-filter step from the posterior at ``post.step``."""
    if not isinstance(model, LinearModel):
        raise ValueError("kf_step requires a LinearModel")
    k = post.step
    A, B, C = model.A_at(k), model.B_at(k), model.C_at(k + 1)
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    prior_mean = A @ post.mean + B @ u
    prior_cov = _symmetrize(A @ post.cov @ A.T + model.Q_at(k))
    yhat = C @ prior_mean
    Pz = C @ prior_cov @ C.T + model.R_at(k + 1)
    Pez = prior_cov @ C.T
    updated, gain = posterior_update(prior_mean, prior_cov, Pz, Pez, y, yhat, step=k + 1)
    return updated, StepDiagnostics(
        prior_mean=prior_mean,
        prior_cov=prior_cov,
        Pz=Pz,
        Pez=Pez,
        gain=gain,
        innovation=y - yhat,
        predicted_output=yhat,
    )


def _ensemble_with_jitter(
    mean: np.ndarray, cov: np.ndarray, alpha: float, jitter: float
) -> tuple[np.ndarray, int]:
    """Build an ensemble, optionally retrying once with ``jitter * I`` added.

    Regularization is off by default; when enabled it is reported so the
    caller can record that the covariance needed repair.
    """
    try:
        return sigma.build_ensemble(mean, cov, alpha), 0
    except CovarianceDegenerateError:
        if jitter <= 0:
            raise
        repaired = cov + jitter * np.eye(mean.shape[0])
        return sigma.build_ensemble(mean, repaired, alpha), 1


def _propagate(
    model, post: Posterior, u: np.ndarray, alpha: float, jitter: float
):
    """Shared time update: propagate sigma points and form prior moments."""
    n = model.state_dim
    weights = sigma.make_weights(alpha, n)
    points, jitter_events = _ensemble_with_jitter(post.mean, post.cov, alpha, jitter)
    u = np.asarray(u, dtype=float)
    propagated = np.column_stack(
        [model.f(points[:, i], u, post.step) for i in range(weights.count)]
    )
    if not np.isfinite(propagated).all():
        raise CovarianceDegenerateError("dynamics map produced non-finite sigma points")
    prior_mean = sigma.weighted_mean(propagated, weights)
    devs = sigma.deviations(propagated, weights)
    prior_cov = _symmetrize(
        sigma.weighted_cross(devs, devs, weights) + model.Q_at(post.step)
    )
    return weights, propagated, devs, prior_mean, prior_cov, jitter_events


def _output_moments(points, weights, model, k):
    """Map an ensemble through the output map and form its moments."""
    outputs = np.column_stack(
        [model.g(points[:, i], k) for i in range(weights.count)]
    )
    if not np.isfinite(outputs).all():
        raise CovarianceDegenerateError("output map produced non-finite sigma points")
    yhat = sigma.weighted_mean(outputs, weights)
    return yhat, sigma.deviations(outputs, weights)


def ukf2_step(
    model: NonlinearModel | LinearModel,
    post: Posterior,
    u: np.ndarray,
    y: np.ndarray,
    alpha: float,
    jitter: float = 0.0,
) -> tuple[Posterior, StepDiagnostics]:
    """Two-step unscented step: regenerates an ensemble from the prior."""
    k = post.step
    weights, _, _, prior_mean, prior_cov, jitter_events = _propagate(
        model, post, u, alpha, jitter
    )
    regen, extra = _ensemble_with_jitter(prior_mean, prior_cov, alpha, jitter)
    jitter_events += extra
    yhat, out_devs = _output_moments(regen, weights, model, k + 1)
    Pz = sigma.weighted_cross(out_devs, out_devs, weights) + model.R_at(k + 1)
    Pez = sigma.weighted_cross(sigma.deviations(regen, weights), out_devs, weights)
    updated, gain = posterior_update(
        prior_mean, prior_cov, Pz, Pez, np.asarray(y, dtype=float), yhat, step=k + 1
    )
    return updated, StepDiagnostics(
        prior_mean=prior_mean,
        prior_cov=prior_cov,
        Pz=Pz,
        Pez=Pez,
        gain=gain,
        innovation=np.asarray(y, dtype=float) - yhat,
        predicted_output=yhat,
        jitter_events=jitter_events,
    )


def ukf1_step(
    model: NonlinearModel | LinearModel,
    post: Posterior,
    u: np.ndarray,
    y: np.ndarray,
    alpha: float,
    jitter: float = 0.0,
) -> tuple[Posterior, StepDiagnostics]:
    """One-step unscented step: reuses the propagated ensemble.

    On a linear system the output-error covariance comes out short by
    ``C Q C.T`` and the cross covariance short by ``Q C.T`` relative to
    the Kalman filter.
    """
    k = post.step
    weights, propagated, state_devs, prior_mean, prior_cov, jitter_events = _propagate(
        model, post, u, alpha, jitter
    )
    yhat, out_devs = _output_moments(propagated, weights, model, k + 1)
    Pz = sigma.weighted_cross(out_devs, out_devs, weights) + model.R_at(k + 1)
    Pez = sigma.weighted_cross(state_devs, out_devs, weights)
    updated, gain = posterior_update(
        prior_mean, prior_cov, Pz, Pez, np.asarray(y, dtype=float), yhat, step=k + 1
    )
    return updated, StepDiagnostics(
        prior_mean=prior_mean,
        prior_cov=prior_cov,
        Pz=Pz,
        Pez=Pez,
        gain=gain,
        innovation=np.asarray(y, dtype=float) - yhat,
        predicted_output=yhat,
        jitter_events=jitter_events,
    )


def mukf_step(
    model: NonlinearModel | LinearModel,
    post: Posterior,
    u: np.ndarray,
    y: np.ndarray,
    alpha: float,
    jitter: float = 0.0,
) -> tuple[Posterior, StepDiagnostics]:
    """Modified one-step unscented step.

    Adds the process-noise terms ``C Q C.T`` and ``Q C.T`` that the
    one-step variant drops, with the output matrix taken as the Jacobian
    of the output map at the prior mean.
    """
    if getattr(model, "output_jacobian", None) is None:
        raise ValueError("mukf_step requires a model with an output_jacobian")
    k = post.step
    weights, propagated, state_devs, prior_mean, prior_cov, jitter_events = _propagate(
        model, post, u, alpha, jitter
    )
    yhat, out_devs = _output_moments(propagated, weights, model, k + 1)
    C = np.atleast_2d(np.asarray(model.output_jacobian(prior_mean, k + 1), dtype=float))
    Q = model.Q_at(k)
    Pz = sigma.weighted_cross(out_devs, out_devs, weights) + C @ Q @ C.T + model.R_at(k + 1)
    Pez = sigma.weighted_cross(state_devs, out_devs, weights) + Q @ C.T
    updated, gain = posterior_update(
        prior_mean, prior_cov, Pz, Pez, np.asarray(y, dtype=float), yhat, step=k + 1
    )
    return updated, StepDiagnostics(
        prior_mean=prior_mean,
        prior_cov=prior_cov,
        Pz=Pz,
        Pez=Pez,
        gain=gain,
        innovation=np.asarray(y, dtype=float) - yhat,
        predicted_output=yhat,
        jitter_events=jitter_events,
    )


def run_filter(
    kind: FilterKind,
    model,
    initial: Posterior,
    trajectory: Trajectory,
    alpha: float = 1.5,
    jitter: float = 0.0,
) -> list[tuple[Posterior, StepDiagnostics]]:
    """Fold one step function over a measurement sequence.

    Numerical failures abort the run with the failing step index attached
    to the exception.
    """
    kind = FilterKind(kind)
    if kind is FilterKind.KF and not isinstance(model, LinearModel):
        raise ValueError("the Kalman filter requires a LinearModel")
    if kind is FilterKind.MUKF and getattr(model, "output_jacobian", None) is None:
        raise ValueError("the modified one-step filter requires an output_jacobian")

    post = initial
    results: list[tuple[Posterior, StepDiagnostics]] = []
    for k in range(len(trajectory)):
        u = trajectory.inputs[k]
        y = trajectory.outputs[k]
        try:
            if kind is FilterKind.KF:
                post, diag = kf_step(model, post, u, y)
            elif kind is FilterKind.UKF2:
                post, diag = ukf2_step(model, post, u, y, alpha, jitter)
            elif kind is FilterKind.UKF1:
                post, diag = ukf1_step(model, post, u, y, alpha, jitter)
            else:
                post, diag = mukf_step(model, post, u, y, alpha, jitter)
        except EstimationError as exc:
            exc.step = post.step + 1
            raise
        results.append((post, diag))
    return results
