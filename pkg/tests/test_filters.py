import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import random_spd
from ukfkit import models
from ukfkit.errors import CovarianceDegenerateError, GainSingularError
from ukfkit.filters import (
    FilterKind,
    Posterior,
    kf_step,
    mukf_step,
    posterior_update,
    run_filter,
    ukf1_step,
    ukf2_step,
)


def _random_linear_setup(seed, **kwargs):
    model, x0, P0 = models.random_linear_model(seed, **kwargs)
    rng = np.random.default_rng(seed + 1000)
    u = rng.normal(size=model.input_dim)
    y = rng.normal(size=model.output_dim)
    return model, Posterior(x0, P0, 0), u, y


def test_posterior_update_scalar_hand_case():
    post, gain = posterior_update(
        prior_mean=np.array([1.0]),
        prior_cov=np.array([[2.0]]),
        Pz=np.array([[3.0]]),
        Pez=np.array([[2.0]]),
        y=np.array([4.0]),
        yhat=np.array([1.0]),
        step=1,
    )
    assert gain[0, 0] == pytest.approx(2 / 3)
    assert post.mean[0] == pytest.approx(1.0 + 2.0)  # shift K*(y - yhat) = 2
    assert post.cov[0, 0] == pytest.approx(2 / 3)
    assert post.step == 1


def test_posterior_update_zero_cross_covariance():
    prior_mean = np.array([1.0, -1.0])
    prior_cov = np.diag([2.0, 3.0])
    post, gain = posterior_update(
        prior_mean, prior_cov, np.eye(1), np.zeros((2, 1)), np.array([5.0]), np.array([0.0])
    )
    assert_allclose(gain, np.zeros((2, 1)), atol=0)
    assert_allclose(post.mean, prior_mean, atol=0)
    assert_allclose(post.cov, prior_cov, atol=0)


def test_posterior_update_innovation_free_still_contracts():
    prior_cov = np.diag([2.0, 3.0])
    Pez = np.array([[1.0], [0.5]])
    post, gain = posterior_update(
        np.zeros(2), prior_cov, np.array([[2.0]]), Pez, np.array([1.0]), np.array([1.0])
    )
    assert_allclose(post.mean, np.zeros(2), atol=0)
    assert_allclose(post.cov, prior_cov - gain @ Pez.T, atol=1e-15)
    assert np.trace(post.cov) < np.trace(prior_cov)


def test_posterior_update_no_measurement():
    prior_mean = np.array([1.0, 2.0])
    prior_cov = np.eye(2)
    post, gain = posterior_update(
        prior_mean, prior_cov, np.zeros((0, 0)), np.zeros((2, 0)), np.zeros(0), np.zeros(0)
    )
    assert gain.shape == (2, 0)
    assert_allclose(post.mean, prior_mean, atol=0)
    assert_allclose(post.cov, prior_cov, atol=0)


def test_posterior_update_singular_output_covariance():
    with pytest.raises(GainSingularError):
        posterior_update(
            np.zeros(1), np.eye(1), np.zeros((1, 1)), np.ones((1, 1)),
            np.zeros(1), np.zeros(1),
        )


def test_posterior_update_degenerate_result_surfaces():
    # oversized cross covariance drives the updated variance negative
    with pytest.raises(CovarianceDegenerateError):
        posterior_update(
            np.zeros(1), np.array([[1.0]]), np.array([[1.0]]), np.array([[2.0]]),
            np.zeros(1), np.zeros(1),
        )


def test_posterior_update_shape_mismatch():
    with pytest.raises(ValueError):
        posterior_update(
            np.zeros(2), np.eye(2), np.eye(2), np.zeros((2, 1)), np.zeros(1), np.zeros(1)
        )


def test_posterior_validation():
    with pytest.raises(ValueError):
        Posterior(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        Posterior(np.array([np.nan, 0.0]), np.eye(2))
    with pytest.raises(ValueError):
        Posterior(np.zeros(2), np.eye(3))


def test_kf_step_scalar_hand_case():
    model = models.LinearModel(
        A=np.eye(1), B=np.zeros((1, 1)), C=np.eye(1), Q=np.eye(1), R=np.eye(1)
    )
    post, diag = kf_step(model, Posterior(np.zeros(1), np.eye(1), 0), np.zeros(1), np.zeros(1))
    assert diag.prior_cov[0, 0] == pytest.approx(2.0)
    assert diag.gain[0, 0] == pytest.approx(2 / 3)
    assert post.cov[0, 0] == pytest.approx(2 / 3)
    assert post.step == 1


def test_kf_step_uninformative_measurement_limit():
    model = models.LinearModel(
        A=0.9 * np.eye(2), B=np.zeros((2, 1)), C=np.eye(1, 2),
        Q=np.zeros((2, 2)), R=1e12 * np.eye(1),
    )
    start = Posterior(np.array([1.0, -1.0]), np.eye(2), 0)
    post, diag = kf_step(model, start, np.zeros(1), np.array([100.0]))
    assert np.abs(diag.gain).max() < 1e-10
    assert_allclose(post.mean, diag.prior_mean, atol=1e-8)
    assert_allclose(post.cov, diag.prior_cov, atol=1e-10)


def test_kf_step_exact_measurement_limit():
    model = models.LinearModel(
        A=np.eye(2), B=np.zeros((2, 1)), C=np.eye(2), Q=np.eye(2), R=1e-14 * np.eye(2)
    )
    y = np.array([4.0, -2.0])
    post, _ = kf_step(model, Posterior(np.zeros(2), np.eye(2), 0), np.zeros(1), y)
    assert_allclose(post.mean, y, atol=1e-10)


def test_kf_step_requires_linear_model():
    with pytest.raises(ValueError):
        kf_step(models.vdp_model(), Posterior(np.ones(2), np.eye(2)), np.zeros(0), np.zeros(1))


def test_ukf2_matches_kf_on_linear_systems():
    for seed in range(10):
        model, post, u, y = _random_linear_setup(seed)
        ref_post, ref_diag = kf_step(model, post, u, y)
        for alpha in (0.5, 1.0, 1.5, 3.0):
            two_post, two_diag = ukf2_step(model, post, u, y, alpha)
            assert np.linalg.norm(two_post.mean - ref_post.mean) <= 1e-9 * (
                1 + np.linalg.norm(ref_post.mean)
            )
            assert np.linalg.norm(two_diag.gain - ref_diag.gain) <= 1e-9
            assert np.linalg.norm(two_post.cov - ref_post.cov) <= 1e-9 * np.linalg.norm(
                ref_post.cov
            )
            assert np.linalg.norm(two_diag.Pz - ref_diag.Pz) <= 1e-9
            assert np.linalg.norm(two_diag.Pez - ref_diag.Pez) <= 1e-9


def test_ukf1_deficit_identities_on_linear_systems():
    # one-step covariances are short by exactly C Q C' and Q C'
    for seed in range(10):
        model, post, u, y = _random_linear_setup(seed)
        _, ref_diag = kf_step(model, post, u, y)
        C, Q = model.C_at(1), model.Q_at(0)
        for alpha in (0.5, 1.0, 1.5, 3.0):
            _, one_diag = ukf1_step(model, post, u, y, alpha)
            assert np.linalg.norm(one_diag.Pz - (ref_diag.Pz - C @ Q @ C.T)) <= 1e-9
            assert np.linalg.norm(one_diag.Pez - (ref_diag.Pez - Q @ C.T)) <= 1e-9


def test_ukf1_equals_kf_without_process_noise():
    model, _, _ = models.random_linear_model(3, state_dim=2, output_dim=1)
    model = models.LinearModel(
        A=model.A, B=model.B, C=model.C, Q=np.zeros((2, 2)), R=model.R
    )
    post = Posterior(np.array([0.3, -0.7]), random_spd(np.random.default_rng(1), 2, -1, 1), 0)
    u, y = np.array([0.1]), np.array([0.4])
    ref_post, ref_diag = kf_step(model, post, u, y)
    one_post, one_diag = ukf1_step(model, post, u, y, 1.5)
    assert_allclose(one_diag.gain, ref_diag.gain, atol=1e-12)
    assert_allclose(one_post.mean, ref_post.mean, atol=1e-12)
    assert_allclose(one_post.cov, ref_post.cov, atol=1e-12)


def test_ukf1_gain_differs_when_noise_reaches_output():
    for seed in range(5):
        model, post, u, y = _random_linear_setup(seed)
        C, Q = model.C_at(1), model.Q_at(0)
        assert np.linalg.norm(C @ Q @ C.T) > 0  # noise visible in the output
        _, ref_diag = kf_step(model, post, u, y)
        _, one_diag = ukf1_step(model, post, u, y, 1.5)
        assert np.linalg.norm(one_diag.gain - ref_diag.gain) > 1e-6 * np.linalg.norm(
            ref_diag.gain
        )


def test_mukf_matches_kf_on_linear_systems():
    for seed in range(10):
        model, post, u, y = _random_linear_setup(seed)
        ref_post, ref_diag = kf_step(model, post, u, y)
        for alpha in (0.5, 1.0, 1.5, 3.0):
            mod_post, mod_diag = mukf_step(model, post, u, y, alpha)
            assert np.linalg.norm(mod_post.cov - ref_post.cov) <= 1e-9 * np.linalg.norm(
                ref_post.cov
            )
            assert np.linalg.norm(mod_diag.gain - ref_diag.gain) <= 1e-9
            assert np.linalg.norm(mod_post.mean - ref_post.mean) <= 1e-9 * (
                1 + np.linalg.norm(ref_post.mean)
            )


def test_mukf_equals_ukf1_without_process_noise():
    model = models.NonlinearModel(
        f=lambda x, u, k: x + 0.1 * np.tanh(x),
        g=lambda x, k: x[:1],
        Q=np.zeros((2, 2)),
        R=0.1 * np.eye(1),
        state_dim=2,
        output_dim=1,
        output_jacobian=lambda x, k: np.eye(1, 2),
    )
    post = Posterior(np.array([0.5, -0.2]), 0.5 * np.eye(2), 0)
    y = np.array([0.6])
    one_post, one_diag = ukf1_step(model, post, np.zeros(0), y, 1.5)
    mod_post, mod_diag = mukf_step(model, post, np.zeros(0), y, 1.5)
    assert_allclose(mod_diag.Pz, one_diag.Pz, atol=0)
    assert_allclose(mod_diag.Pez, one_diag.Pez, atol=0)
    assert_allclose(mod_post.cov, one_post.cov, atol=0)


def test_mukf_equals_ukf2_for_linear_outputs():
    # nonlinear dynamics, linear output: one ensemble reproduces two
    rng = np.random.default_rng(8)
    C = rng.normal(size=(2, 3))
    model = models.NonlinearModel(
        f=lambda x, u, k: x + 0.05 * np.array([x[1] * x[2], -x[0] + x[2] ** 2, np.sin(x[0])]),
        g=lambda x, k: C @ x,
        Q=0.1 * np.eye(3),
        R=0.01 * np.eye(2),
        state_dim=3,
        output_dim=2,
        output_jacobian=lambda x, k: C,
    )
    post = Posterior(rng.normal(size=3), random_spd(rng, 3, -1, 1), 0)
    y = rng.normal(size=2)
    two_post, two_diag = ukf2_step(model, post, np.zeros(0), y, 1.5)
    mod_post, mod_diag = mukf_step(model, post, np.zeros(0), y, 1.5)
    assert np.linalg.norm(mod_diag.Pz - two_diag.Pz) <= 1e-10
    assert np.linalg.norm(mod_diag.Pez - two_diag.Pez) <= 1e-10
    assert np.linalg.norm(mod_post.cov - two_post.cov) <= 1e-10
    assert np.linalg.norm(mod_post.mean - two_post.mean) <= 1e-10


def test_mukf_requires_output_jacobian():
    model = models.NonlinearModel(
        f=lambda x, u, k: x,
        g=lambda x, k: x[:1],
        Q=np.eye(2),
        R=np.eye(1),
        state_dim=2,
        output_dim=1,
    )
    with pytest.raises(ValueError):
        mukf_step(model, Posterior(np.zeros(2), np.eye(2)), np.zeros(0), np.zeros(1), 1.5)


def test_identity_maps_keep_prior_moments():
    # f = g = identity with Q = 0: prior moments equal the posterior input
    model = models.NonlinearModel(
        f=lambda x, u, k: x,
        g=lambda x, k: x,
        Q=np.zeros((2, 2)),
        R=np.eye(2),
        state_dim=2,
        output_dim=2,
        output_jacobian=lambda x, k: np.eye(2),
    )
    mean = np.array([1.0, -2.0])
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    post = Posterior(mean, cov, 0)
    _, diag = ukf2_step(model, post, np.zeros(0), np.zeros(2), 1.5)
    assert_allclose(diag.prior_mean, mean, atol=1e-14)
    assert_allclose(diag.prior_cov, cov, atol=1e-13)


def test_posterior_covariance_exactly_symmetric():
    for seed in range(5):
        model, post, u, y = _random_linear_setup(seed)
        for step_fn in (
            lambda: kf_step(model, post, u, y),
            lambda: ukf2_step(model, post, u, y, 1.5),
            lambda: ukf1_step(model, post, u, y, 1.5),
            lambda: mukf_step(model, post, u, y, 1.5),
        ):
            new_post, _ = step_fn()
            assert np.linalg.norm(new_post.cov - new_post.cov.T) == 0.0


def test_run_filter_empty_trajectory():
    model = models.vdp_model()
    trajectory = models.Trajectory(
        states=np.ones((1, 2)), outputs=np.zeros((0, 1)), inputs=np.zeros((0, 0))
    )
    out = run_filter(FilterKind.UKF2, model, Posterior(np.ones(2), np.eye(2)), trajectory)
    assert out == []


def test_run_filter_matches_manual_composition():
    model, x0, P0 = models.random_linear_model(5)
    traj = models.simulate_truth(model, x0, 10, seed=2)
    fold = run_filter(FilterKind.KF, model, Posterior(x0, P0, 0), traj)
    post = Posterior(x0, P0, 0)
    for k in range(10):
        post, diag = kf_step(model, post, traj.inputs[k], traj.outputs[k])
        assert_allclose(fold[k][0].mean, post.mean, atol=0)
        assert_allclose(fold[k][0].cov, post.cov, atol=0)
        assert fold[k][0].step == k + 1


def test_run_filter_attaches_step_index_on_failure():
    # R collapses to zero at step 3 with C = 0, making Pz singular there
    model = models.LinearModel(
        A=0.5 * np.eye(1),
        B=np.zeros((1, 1)),
        C=np.zeros((1, 1)),
        Q=np.eye(1),
        R=lambda k: np.zeros((1, 1)) if k == 3 else np.eye(1),
    )
    trajectory = models.Trajectory(
        states=np.zeros((6, 1)), outputs=np.zeros((5, 1)), inputs=np.zeros((5, 1))
    )
    with pytest.raises(GainSingularError) as excinfo:
        run_filter(FilterKind.KF, model, Posterior(np.zeros(1), np.eye(1), 0), trajectory)
    assert excinfo.value.step == 3


def test_run_filter_kind_requirements():
    model = models.vdp_model()
    traj = models.simulate_truth(model, np.ones(2), 3, seed=1)
    with pytest.raises(ValueError):
        run_filter(FilterKind.KF, model, Posterior(np.ones(2), np.eye(2)), traj)


def test_ukf2_and_mukf_trace_sequences_match_on_lorenz():
    model = models.lorenz_model()
    x0, P0 = np.ones(3), np.eye(3)
    traj = models.simulate_truth(model, x0, 300, seed=14)
    initial = Posterior(x0, P0, 0)
    two = run_filter(FilterKind.UKF2, model, initial, traj, alpha=1.5)
    mod = run_filter(FilterKind.MUKF, model, initial, traj, alpha=1.5)
    for (p2, _), (pm, _) in zip(two, mod):
        assert abs(pm.trace - p2.trace) <= 1e-10 * p2.trace


def test_jitter_recovers_degenerate_covariance():
    # a posterior covariance just past the factorization edge: without
    # jitter the ensemble build fails, with jitter the step completes and
    # the regularization is reported
    model = models.vdp_model()
    mean = np.ones(2)
    bad_cov = np.diag([1.0, -1e-12])
    post = Posterior(mean, bad_cov, 0)
    y = np.array([1.0])
    with pytest.raises(CovarianceDegenerateError):
        ukf1_step(model, post, np.zeros(0), y, 1.5)
    fixed_post, diag = ukf1_step(model, post, np.zeros(0), y, 1.5, jitter=1e-8)
    assert diag.jitter_events == 1
    assert np.isfinite(fixed_post.trace)
