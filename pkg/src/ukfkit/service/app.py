"""FastAPI service exposing the filters, benchmark runs, and verification.

Stateless endpoints run seeded experiments and the verification sweeps;
``/sessions`` hosts long-lived filters that clients feed one measurement
at a time.
"""

import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .. import harness, verify
from ..errors import EstimationError
from ..filters import FilterKind, Posterior, kf_step, mukf_step, ukf1_step, ukf2_step
from ..harness import ExperimentConfig, FILTER_NAMES, SYSTEMS
from . import schemas

STEP_FUNCTIONS = {
    FilterKind.KF: kf_step,
    FilterKind.UKF2: ukf2_step,
    FilterKind.UKF1: ukf1_step,
    FilterKind.MUKF: mukf_step,
}


class FilterSession:
    """One live filter: model, current posterior, and step settings."""

    def __init__(self, request: schemas.SessionRequest):
        config = ExperimentConfig(
            system=request.system,
            filters=[request.filter] if request.filter != "kf" else ["kf"],
            steps=1,
            seed=request.seed,
            alpha=request.alpha,
            ts=request.ts,
            mu=request.mu,
            sigma=request.sigma,
            rho=request.rho,
            beta=request.beta,
            q_scale=request.q_scale,
            r_scale=request.r_scale,
            x0=request.x0,
            p0=request.p0,
            jitter=request.jitter,
            state_dim=request.state_dim,
            output_dim=request.output_dim,
        )
        self.system = request.system
        self.kind = FilterKind(request.filter)
        self.alpha = request.alpha
        self.jitter = request.jitter
        self.model, x0, P0 = harness.build_model(config)
        self.posterior = Posterior(x0, P0, 0)
        self.lock = threading.Lock()

    def step(self, y: np.ndarray, u: np.ndarray):
        step_fn = STEP_FUNCTIONS[self.kind]
        if self.kind is FilterKind.KF:
            post, diag = step_fn(self.model, self.posterior, u, y)
        else:
            post, diag = step_fn(self.model, self.posterior, u, y, self.alpha, self.jitter)
        self.posterior = post
        return post, diag


def _run_response(config: ExperimentConfig) -> schemas.RunResponse:
    records, report = harness.run_experiment(config)
    return schemas.RunResponse(
        system=config.system,
        filters=list(config.filters),
        steps=config.steps,
        seed=config.seed,
        csv=harness.render_csv(records, report),
        window=report.window,
        steady_state={
            name: schemas.SteadyStateSummary(**summary)
            for name, summary in report.steady_state.items()
        },
    )


def create_app() -> FastAPI:
    app = FastAPI(title="ukfkit", version="0.1.0")
    sessions: dict[str, FilterSession] = {}
    registry_lock = threading.Lock()

    @app.exception_handler(EstimationError)
    async def _numerical_failure(request, exc: EstimationError):
        return JSONResponse(
            status_code=500,
            content={
                "detail": {
                    "type": "numerical-failure",
                    "message": str(exc),
                    "step": exc.step,
                }
            },
        )

    @app.exception_handler(ValueError)
    async def _bad_value(request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/systems", response_model=schemas.SystemsResponse)
    def systems():
        return schemas.SystemsResponse(systems=list(SYSTEMS), filters=list(FILTER_NAMES))

    @app.post("/experiments/run", response_model=schemas.RunResponse)
    def run_experiment(config: ExperimentConfig):
        return _run_response(config)

    @app.post("/experiments/reproduce", response_model=schemas.ReproduceResponse)
    def reproduce():
        return schemas.ReproduceResponse(
            runs=[_run_response(config) for _, config in harness.reproduce_configs()]
        )

    @app.post("/verify", response_model=schemas.VerifyResponse)
    def run_verification(request: schemas.VerifyRequest):
        report = verify.run_verification(
            systems=request.systems,
            steps=request.steps,
            seed=request.seed,
            alphas=tuple(request.alphas) if request.alphas else verify.DEFAULT_ALPHAS,
            gain_systems=request.gain_systems,
            gain_perturbations=request.gain_perturbations,
        )
        return schemas.VerifyResponse(
            passed=report.passed,
            systems=report.systems,
            steps=report.steps,
            seed=report.seed,
            checks=[
                schemas.CheckResult(
                    label=c.label, value=c.value, threshold=c.threshold, passed=c.passed
                )
                for c in report.checks
            ],
            trace_ordering=schemas.TraceOrderingNote(
                claim_violations=report.trace_claim_violations,
                steps=report.trace_steps,
                gap_min=report.trace_gap_min,
                gap_max=report.trace_gap_max,
            ),
        )

    def _session_info(session_id: str, session: FilterSession) -> schemas.SessionInfo:
        post = session.posterior
        return schemas.SessionInfo(
            session_id=session_id,
            system=session.system,
            filter=session.kind.value,
            step=post.step,
            state_dim=session.model.state_dim,
            output_dim=session.model.output_dim,
            mean=post.mean.tolist(),
            cov=post.cov.tolist(),
            trace=post.trace,
        )

    @app.post("/sessions", response_model=schemas.SessionInfo, status_code=201)
    def create_session(request: schemas.SessionRequest):
        session = FilterSession(request)
        session_id = uuid.uuid4().hex
        with registry_lock:
            sessions[session_id] = session
        return _session_info(session_id, session)

    def _get_session(session_id: str) -> FilterSession:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.get("/sessions/{session_id}", response_model=schemas.SessionInfo)
    def get_session(session_id: str):
        return _session_info(session_id, _get_session(session_id))

    @app.post("/sessions/{session_id}/step", response_model=schemas.StepResponse)
    def step_session(session_id: str, request: schemas.MeasurementRequest):
        session = _get_session(session_id)
        y = np.asarray(request.y, dtype=float)
        if y.shape != (session.model.output_dim,):
            raise HTTPException(
                status_code=422,
                detail=f"y must have {session.model.output_dim} entries",
            )
        if not np.isfinite(y).all():
            raise HTTPException(status_code=422, detail="y must be finite")
        if request.u is None:
            u = np.zeros(session.model.input_dim)
        else:
            u = np.asarray(request.u, dtype=float)
            if u.shape != (session.model.input_dim,):
                raise HTTPException(
                    status_code=422,
                    detail=f"u must have {session.model.input_dim} entries",
                )
        with session.lock:
            post, diag = session.step(y, u)
        return schemas.StepResponse(
            session_id=session_id,
            step=post.step,
            mean=post.mean.tolist(),
            cov=post.cov.tolist(),
            trace=post.trace,
            gain=diag.gain.tolist(),
            innovation=diag.innovation.tolist(),
            predicted_output=diag.predicted_output.tolist(),
            jitter_events=diag.jitter_events,
        )

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        with registry_lock:
            if sessions.pop(session_id, None) is None:
                raise HTTPException(status_code=404, detail="unknown session")

    return app


app = create_app()
