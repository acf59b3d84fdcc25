"""Randomized linear-system sweeps checking the filter equivalences.

These are the machine-checkable versions of the library's core claims:

* the two-step unscented filter reproduces the Kalman filter on linear
  systems (state, gain, and covariance), independently of ``alpha``;
* the one-step variant's output covariances are short by exactly
  ``C Q C.T`` and ``Q C.T``;
* the modified one-step filter reproduces the Kalman filter;
* the Kalman gain minimizes the posterior-trace quadratic form.

Every sweep resynchronizes all filters to the Kalman posterior at each
step, so the checks are exact per-step identities rather than statements
about diverging trajectories.  Tolerances live here and nowhere else.
"""

from dataclasses import dataclass, field

import numpy as np

from .filters import Posterior, kf_step, mukf_step, ukf1_step, ukf2_step
from .models import random_linear_model, simulate_truth

LINEAR_EQUIV_TOL = 1e-9
PROP_DEFICIT_TOL = 1e-9
ALPHA_INVARIANCE_TOL = 1e-9
GAIN_OPT_TOL = 1e-12
LINEAR_OUTPUT_RELERR_TOL = 1e-10

DEFAULT_ALPHAS = (0.5, 1.0, 1.5, 3.0)


@dataclass
class Check:
    """One scalar verification metric compared against its threshold."""

    label: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value <= self.threshold

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.label}: max {self.value:.3e} (tol {self.threshold:.0e}) {status}"


@dataclass
class VerificationReport:
    """Aggregated results of the randomized sweeps."""

    systems: int
    steps: int
    seed: int
    alphas: tuple[float, ...]
    checks: list[Check] = field(default_factory=list)
    # Informational only: the claimed trace ordering tr(P_ukf1) <= tr(P_kf)
    # does not hold in practice, so its observed sign is logged, not gated.
    trace_gap_min: float = 0.0
    trace_gap_max: float = 0.0
    trace_claim_violations: int = 0
    trace_steps: int = 0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [c.line() for c in self.checks]
        out.append(
            "trace ordering (informational): one-step trace exceeded KF trace at "
            f"{self.trace_claim_violations}/{self.trace_steps} steps, "
            f"gap range [{self.trace_gap_min:.3e}, {self.trace_gap_max:.3e}]"
        )
        out.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return out


def _frob(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat))


def run_linear_sweep(
    systems: int = 100,
    steps: int = 50,
    seed: int = 7,
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
) -> VerificationReport:
    """Check the linear-system equivalences over random systems.

    Each step feeds every filter the Kalman posterior from the previous
    step, compares the step outputs, then advances the chain with the
    Kalman result.
    """
    report = VerificationReport(systems=systems, steps=steps, seed=seed, alphas=alphas)
    entropy = np.random.SeedSequence(seed).generate_state(3 * systems, np.uint64)

    state_dev = gain_dev = cov_dev = 0.0
    pz_dev = pez_dev = mukf_dev = 0.0
    alpha_gain_dev = alpha_cov_dev = 0.0
    gap_min, gap_max = np.inf, -np.inf
    violations = 0
    total_steps = 0

    for i in range(systems):
        model, xh0, P0 = random_linear_model(int(entropy[3 * i]))
        rng_u = np.random.default_rng(int(entropy[3 * i + 1]))
        inputs = rng_u.normal(size=(steps, model.input_dim))
        truth = simulate_truth(model, xh0, steps, int(entropy[3 * i + 2]), inputs=inputs)
        post = Posterior(xh0, P0, 0)
        for k in range(steps):
            u, y = truth.inputs[k], truth.outputs[k]
            ref_post, ref_diag = kf_step(model, post, u, y)
            C = model.C_at(k + 1)
            Q = model.Q_at(k)
            ref_cov_norm = _frob(ref_post.cov)
            gains, covs = [], []
            for alpha in alphas:
                two_post, two_diag = ukf2_step(model, post, u, y, alpha)
                one_post, one_diag = ukf1_step(model, post, u, y, alpha)
                mod_post, _ = mukf_step(model, post, u, y, alpha)

                state_dev = max(
                    state_dev,
                    float(np.linalg.norm(two_post.mean - ref_post.mean))
                    / (1.0 + float(np.linalg.norm(ref_post.mean))),
                )
                gain_dev = max(gain_dev, _frob(two_diag.gain - ref_diag.gain))
                cov_dev = max(cov_dev, _frob(two_post.cov - ref_post.cov) / ref_cov_norm)

                pz_dev = max(pz_dev, _frob(one_diag.Pz - (ref_diag.Pz - C @ Q @ C.T)))
                pez_dev = max(pez_dev, _frob(one_diag.Pez - (ref_diag.Pez - Q @ C.T)))

                mukf_dev = max(
                    mukf_dev, _frob(mod_post.cov - ref_post.cov) / ref_cov_norm
                )

                gap = ref_post.trace - one_post.trace
                gap_min = min(gap_min, gap)
                gap_max = max(gap_max, gap)
                if gap < -1e-12:
                    violations += 1
                total_steps += 1
                gains.append(two_diag.gain)
                covs.append(two_post.cov)
            for a in range(1, len(alphas)):
                alpha_gain_dev = max(alpha_gain_dev, _frob(gains[a] - gains[0]))
                alpha_cov_dev = max(
                    alpha_cov_dev, _frob(covs[a] - covs[0]) / ref_cov_norm
                )
            post = ref_post

    report.checks = [
        Check("two-step vs KF state deviation", state_dev, LINEAR_EQUIV_TOL),
        Check("two-step vs KF gain deviation", gain_dev, LINEAR_EQUIV_TOL),
        Check("two-step vs KF covariance deviation", cov_dev, LINEAR_EQUIV_TOL),
        Check("one-step Pz deficit identity", pz_dev, PROP_DEFICIT_TOL),
        Check("one-step Pez deficit identity", pez_dev, PROP_DEFICIT_TOL),
        Check("modified one-step vs KF covariance", mukf_dev, LINEAR_EQUIV_TOL),
        Check("gain alpha-invariance", alpha_gain_dev, ALPHA_INVARIANCE_TOL),
        Check("covariance alpha-invariance", alpha_cov_dev, ALPHA_INVARIANCE_TOL),
    ]
    report.trace_gap_min = float(gap_min)
    report.trace_gap_max = float(gap_max)
    report.trace_claim_violations = violations
    report.trace_steps = total_steps
    return report


def posterior_trace_quadratic(
    prior_cov: np.ndarray, Pz: np.ndarray, Pez: np.ndarray, gain: np.ndarray
) -> float:
    """Posterior trace as a quadratic form in an arbitrary gain.

    ``tr(P - K Pez' - Pez K' + K Pz K')`` reduces to the filter update for
    the minimizing gain; any other gain cannot do better.
    """
    return float(
        np.trace(prior_cov - gain @ Pez.T - Pez @ gain.T + gain @ Pz @ gain.T)
    )


def run_gain_optimality(
    systems: int = 20, perturbations: int = 200, seed: int = 11
) -> Check:
    """Verify that random gain perturbations never beat the filter gain."""
    entropy = np.random.SeedSequence(seed).generate_state(2 * systems, np.uint64)
    worst = -np.inf
    for i in range(systems):
        model, xh0, P0 = random_linear_model(int(entropy[2 * i]))
        rng = np.random.default_rng(int(entropy[2 * i + 1]))
        u = rng.normal(size=model.input_dim)
        y = rng.normal(size=model.output_dim)
        _, diag = kf_step(model, Posterior(xh0, P0, 0), u, y)
        base = posterior_trace_quadratic(diag.prior_cov, diag.Pz, diag.Pez, diag.gain)
        scale = max(_frob(diag.gain), 1.0)
        for _ in range(perturbations):
            delta = scale * 10.0 ** rng.uniform(-6, 0) * rng.normal(size=diag.gain.shape)
            perturbed = posterior_trace_quadratic(
                diag.prior_cov, diag.Pz, diag.Pez, diag.gain + delta
            )
            worst = max(worst, base - perturbed)
    return Check("gain optimality margin", worst, GAIN_OPT_TOL)


def run_verification(
    systems: int = 100,
    steps: int = 50,
    seed: int = 7,
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
    gain_systems: int = 20,
    gain_perturbations: int = 200,
) -> VerificationReport:
    """Full verification: linear sweeps plus the gain-optimality check."""
    report = run_linear_sweep(systems=systems, steps=steps, seed=seed, alphas=alphas)
    report.checks.append(
        run_gain_optimality(systems=gain_systems, perturbations=gain_perturbations, seed=seed + 1)
    )
    return report
