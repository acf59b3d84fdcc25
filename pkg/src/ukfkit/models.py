"""System models and seeded truth-trajectory simulation.

Models expose a common step interface: ``f(x, u, k)`` advances the state,
``g(x, k)`` maps state to output, ``output_jacobian(x, k)`` returns the
output map's Jacobian, and ``Q_at(k)`` / ``R_at(k)`` give the noise
covariances.  Matrices may be supplied directly or as step-indexed
callables for time-varying systems.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

MatrixLike = Union[np.ndarray, Callable[[int], np.ndarray]]


def _mat_at(value: MatrixLike, k: int) -> np.ndarray:
    if callable(value):
        return np.asarray(value(k), dtype=float)
    return np.asarray(value, dtype=float)


@dataclass(frozen=True)
class LinearModel:
    """Linear state-space model ``x+ = A x + B u + w``, ``y = C x + v``."""

    A: MatrixLike
    B: MatrixLike
    C: MatrixLike
    Q: MatrixLike
    R: MatrixLike

    def A_at(self, k: int) -> np.ndarray:
        return _mat_at(self.A, k)

    def B_at(self, k: int) -> np.ndarray:
        return _mat_at(self.B, k)

    def C_at(self, k: int) -> np.ndarray:
        return _mat_at(self.C, k)

    def Q_at(self, k: int) -> np.ndarray:
        return _mat_at(self.Q, k)

    def R_at(self, k: int) -> np.ndarray:
        return _mat_at(self.R, k)

    @property
    def state_dim(self) -> int:
        return self.A_at(0).shape[0]

    @property
    def output_dim(self) -> int:
        return self.C_at(0).shape[0]

    @property
    def input_dim(self) -> int:
        return self.B_at(0).shape[1]

    def f(self, x: np.ndarray, u: np.ndarray, k: int) -> np.ndarray:
        return self.A_at(k) @ x + self.B_at(k) @ u

    def g(self, x: np.ndarray, k: int) -> np.ndarray:
        return self.C_at(k) @ x

    def output_jacobian(self, x: np.ndarray, k: int) -> np.ndarray:
        return self.C_at(k)


@dataclass(frozen=True)
class NonlinearModel:
    """Nonlinear model ``x+ = f(x, u, k) + w``, ``y = g(x, k) + v``.

    ``output_jacobian`` is required by the modified one-step filter; for a
    linear output map it must return the output matrix exactly.
    """

    f: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    g: Callable[[np.ndarray, int], np.ndarray]
    Q: MatrixLike
    R: MatrixLike
    state_dim: int
    output_dim: int
    input_dim: int = 0
    output_jacobian: Callable[[np.ndarray, int], np.ndarray] | None = None

    def Q_at(self, k: int) -> np.ndarray:
        return _mat_at(self.Q, k)

    def R_at(self, k: int) -> np.ndarray:
        return _mat_at(self.R, k)


@dataclass(frozen=True)
class Trajectory:
    """A simulated truth run: states ``x_0..x_N``, outputs ``y_1..y_N``."""

    states: np.ndarray  # (N+1, n)
    outputs: np.ndarray  # (N, p)
    inputs: np.ndarray  # (N, m)

    def __len__(self) -> int:
        return self.outputs.shape[0]


def vdp_step(x: np.ndarray, ts: float, mu: float) -> np.ndarray:
    """Forward-Euler step of the Van der Pol oscillator."""
    x = np.asarray(x, dtype=float)
    return np.array([
        x[0] + ts * x[1],
        x[1] + ts * (mu * (1.0 - x[0] ** 2) * x[1] - x[0]),
    ])


def lorenz_step(x: np.ndarray, ts: float, sigma: float, rho: float, beta: float) -> np.ndarray:
    """Forward-Euler step of the Lorenz system."""
    x = np.asarray(x, dtype=float)
    return x + ts * np.array([
        sigma * (x[1] - x[0]),
        x[0] * (rho - x[2]) - x[1],
        x[0] * x[1] - beta * x[2],
    ])


def linear_predict(model: LinearModel, x: np.ndarray, u: np.ndarray, k: int = 0) -> np.ndarray:
    """Noise-free one-step prediction ``A_k x + B_k u``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    A, B = model.A_at(k), model.B_at(k)
    if A.shape[1] != x.shape[0] or B.shape[1] != u.shape[0]:
        raise ValueError(
            f"incompatible shapes: A {A.shape}, x {x.shape}, B {B.shape}, u {u.shape}"
        )
    return A @ x + B @ u


def sample_gaussian(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one sample from N(mean, cov) for symmetric PSD ``cov``.

    Uses an eigendecomposition factor so rank-deficient covariances are
    accepted; ``cov = 0`` returns the mean.  Deterministic for a given
    generator state.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = mean.shape[0]
    if cov.shape != (n, n):
        raise ValueError(f"cov shape {cov.shape} does not match mean dim {n}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-10 * max(1.0, np.abs(cov).max())):
        raise ValueError("cov must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if eigvals.min(initial=0.0) < -1e-10 * max(1.0, eigvals.max(initial=0.0)):
        raise ValueError("cov must be positive semidefinite")
    factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    return mean + factor @ rng.standard_normal(n)


def simulate_truth(
    model: LinearModel | NonlinearModel,
    x0: np.ndarray,
    steps: int,
    seed: int,
    inputs: Sequence[np.ndarray] | None = None,
) -> Trajectory:
    """Simulate a noisy truth trajectory, reproducibly from ``seed``.

    Process and measurement noise are drawn from two independent streams
    spawned from one seed sequence, so the same seed always yields the
    same trajectory regardless of how the draws interleave.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x0 = np.asarray(x0, dtype=float)
    n = model.state_dim
    m = model.input_dim
    if x0.shape != (n,):
        raise ValueError(f"x0 shape {x0.shape} does not match state dim {n}")
    if inputs is None:
        u_seq = np.zeros((steps, m))
    else:
        u_seq = np.asarray(inputs, dtype=float).reshape(steps, m)
    stream_w, stream_v = np.random.SeedSequence(seed).spawn(2)
    rng_w = np.random.default_rng(stream_w)
    rng_v = np.random.default_rng(stream_v)

    states = np.empty((steps + 1, n))
    outputs = np.empty((steps, model.output_dim))
    states[0] = x0
    x = x0
    for k in range(steps):
        x = model.f(x, u_seq[k], k) + sample_gaussian(np.zeros(n), model.Q_at(k), rng_w)
        y = model.g(x, k + 1) + sample_gaussian(
            np.zeros(model.output_dim), model.R_at(k + 1), rng_v
        )
        states[k + 1] = x
        outputs[k] = y
    return Trajectory(states=states, outputs=outputs, inputs=u_seq)


def vdp_model(
    ts: float = 0.01,
    mu: float = 1.2,
    q_scale: float = 0.01,
    r_scale: float = 1e-4,
) -> NonlinearModel:
    """Van der Pol oscillator with position measurement ``y = x_1 + v``."""
    C = np.array([[1.0, 0.0]])
    return NonlinearModel(
        f=lambda x, u, k: vdp_step(x, ts, mu),
        g=lambda x, k: C @ x,
        Q=q_scale * np.eye(2),
        R=r_scale * np.eye(1),
        state_dim=2,
        output_dim=1,
        input_dim=0,
        output_jacobian=lambda x, k: C,
    )


def lorenz_model(
    ts: float = 0.01,
    sigma: float = 10.0,
    rho: float = 28.0,
    beta: float = 8.0 / 3.0,
    q_scale: float = 0.01,
    r_scale: float = 1e-4,
) -> NonlinearModel:
    """Euler-discretized Lorenz system measuring ``y = x_2 + v``."""
    C = np.array([[0.0, 1.0, 0.0]])
    return NonlinearModel(
        f=lambda x, u, k: lorenz_step(x, ts, sigma, rho, beta),
        g=lambda x, k: C @ x,
        Q=q_scale * np.eye(3),
        R=r_scale * np.eye(1),
        state_dim=3,
        output_dim=1,
        input_dim=0,
        output_jacobian=lambda x, k: C,
    )


def _random_spd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(n, n))
    return scale * (g @ g.T / n + 0.1 * np.eye(n))


def random_linear_model(
    seed: int,
    state_dim: int | None = None,
    output_dim: int | None = None,
    input_dim: int = 1,
) -> tuple[LinearModel, np.ndarray, np.ndarray]:
    """Random stable linear system for verification sweeps.

    Returns the model together with a random initial mean and a random
    positive-definite initial covariance.  The dynamics matrix is scaled
    to a spectral radius drawn from (0.3, 0.95), so every generated
    system is stable.
    """
    rng = np.random.default_rng(seed)
    n = int(state_dim) if state_dim is not None else int(rng.integers(1, 5))
    p = int(output_dim) if output_dim is not None else int(rng.integers(1, n + 1))
    if n < 1 or p < 1:
        raise ValueError("dimensions must be positive")
    A = rng.normal(size=(n, n))
    radius = np.abs(np.linalg.eigvals(A)).max()
    A *= rng.uniform(0.3, 0.95) / max(radius, 1e-12)
    B = rng.normal(size=(n, input_dim))
    C = rng.normal(size=(p, n))
    model = LinearModel(
        A=A, B=B, C=C, Q=_random_spd(rng, n), R=_random_spd(rng, p)
    )
    x0 = rng.normal(size=n)
    P0 = _random_spd(rng, n)
    return model, x0, P0
