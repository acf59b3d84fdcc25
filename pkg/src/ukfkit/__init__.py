"""State estimation with Kalman and unscented Kalman filter variants.

The package provides four step functions behind one interface (classical
Kalman filter, two-step unscented, one-step unscented, and the modified
one-step unscented filter), sigma-point primitives, two nonlinear
benchmark systems, a deterministic experiment harness, and a FastAPI
service with a thin CLI client.
"""

from .errors import CovarianceDegenerateError, EstimationError, GainSingularError
from .filters import (
    FilterKind,
    Posterior,
    StepDiagnostics,
    kf_step,
    mukf_step,
    posterior_update,
    run_filter,
    ukf1_step,
    ukf2_step,
)
from .harness import (
    ComparisonReport,
    ExperimentConfig,
    StepRecord,
    relative_error,
    run_experiment,
    write_csv,
)
from .models import (
    LinearModel,
    NonlinearModel,
    Trajectory,
    linear_predict,
    lorenz_model,
    lorenz_step,
    random_linear_model,
    sample_gaussian,
    simulate_truth,
    vdp_model,
    vdp_step,
)
from .sigma import (
    WeightSet,
    build_ensemble,
    deviations,
    make_weights,
    replicate,
    spd_factor,
    weighted_cross,
    weighted_mean,
)
from .verify import run_gain_optimality, run_linear_sweep, run_verification

__version__ = "0.1.0"

__all__ = [
    "CovarianceDegenerateError",
    "EstimationError",
    "GainSingularError",
    "FilterKind",
    "Posterior",
    "StepDiagnostics",
    "kf_step",
    "mukf_step",
    "posterior_update",
    "run_filter",
    "ukf1_step",
    "ukf2_step",
    "ComparisonReport",
    "ExperimentConfig",
    "StepRecord",
    "relative_error",
    "run_experiment",
    "write_csv",
    "LinearModel",
    "NonlinearModel",
    "Trajectory",
    "linear_predict",
    "lorenz_model",
    "lorenz_step",
    "random_linear_model",
    "sample_gaussian",
    "simulate_truth",
    "vdp_model",
    "vdp_step",
    "WeightSet",
    "build_ensemble",
    "deviations",
    "make_weights",
    "replicate",
    "spd_factor",
    "weighted_cross",
    "weighted_mean",
    "run_gain_optimality",
    "run_linear_sweep",
    "run_verification",
]
