"""Request/response models for the filtering service."""

from typing import Literal

from pydantic import BaseModel, Field

from ..harness import ExperimentConfig

RunRequest = ExperimentConfig


class SteadyStateSummary(BaseModel):
    mean: float
    max: float


class RunResponse(BaseModel):
    system: str
    filters: list[str]
    steps: int
    seed: int
    csv: str
    window: int
    steady_state: dict[str, SteadyStateSummary]


class VerifyRequest(BaseModel):
    systems: int = Field(default=100, ge=1)
    steps: int = Field(default=50, ge=1)
    seed: int = Field(default=7, ge=0)
    alphas: list[float] | None = None
    gain_systems: int = Field(default=20, ge=1)
    gain_perturbations: int = Field(default=200, ge=1)


class CheckResult(BaseModel):
    label: str
    value: float
    threshold: float
    passed: bool


class TraceOrderingNote(BaseModel):
    claim_violations: int
    steps: int
    gap_min: float
    gap_max: float


class VerifyResponse(BaseModel):
    passed: bool
    systems: int
    steps: int
    seed: int
    checks: list[CheckResult]
    trace_ordering: TraceOrderingNote


class ReproduceResponse(BaseModel):
    runs: list[RunResponse]


class SessionRequest(BaseModel):
    """Create a long-lived filter over one of the builtin systems."""

    system: Literal["vdp", "lorenz", "linear-random"]
    filter: Literal["kf", "ukf2", "ukf1", "mukf"] = "mukf"
    alpha: float = Field(default=1.5, gt=0)
    ts: float = Field(default=0.01, gt=0)
    mu: float = 1.2
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    q_scale: float = Field(default=0.01, ge=0)
    r_scale: float = Field(default=1e-4, gt=0)
    seed: int | None = Field(default=None, ge=0)
    state_dim: int | None = Field(default=None, ge=1)
    output_dim: int | None = Field(default=None, ge=1)
    x0: list[float] | None = None
    p0: float | list[float] | None = None
    jitter: float = Field(default=0.0, ge=0)


class SessionInfo(BaseModel):
    session_id: str
    system: str
    filter: str
    step: int
    state_dim: int
    output_dim: int
    mean: list[float]
    cov: list[list[float]]
    trace: float


class MeasurementRequest(BaseModel):
    y: list[float]
    u: list[float] | None = None


class StepResponse(BaseModel):
    session_id: str
    step: int
    mean: list[float]
    cov: list[list[float]]
    trace: float
    gain: list[list[float]]
    innovation: list[float]
    predicted_output: list[float]
    jitter_events: int


class SystemsResponse(BaseModel):
    systems: list[str]
    filters: list[str]
