"""Command-line client for the filtering service.

The CLI never computes anything itself: it builds a request, sends it to
the service (an in-process instance by default, or a remote one via
``--server``), and writes the returned artifacts to disk.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 runtime numerical failure.
"""

import argparse
import asyncio
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _request(server: str | None, method: str, path: str, payload=None) -> httpx.Response:
    async def go():
        if server:
            client = httpx.AsyncClient(base_url=server, timeout=None)
        else:
            from .service.app import create_app

            client = httpx.AsyncClient(
                transport=httpx.ASGITransport(app=create_app()),
                base_url="http://ukfkit.local",
                timeout=None,
            )
        async with client:
            return await client.request(method, path, json=payload)

    return asyncio.run(go())


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _parse_scalar_or_list(text: str):
    values = _parse_floats(text)
    return values[0] if len(values) == 1 else values


def _load_config_file(path: str) -> dict:
    """Parse a plain ``key=value`` file into request fields."""
    parsers = {
        "system": str,
        "filters": lambda s: [p.strip() for p in s.split(",") if p.strip()],
        "steps": int,
        "seed": int,
        "alpha": float,
        "ts": float,
        "mu": float,
        "sigma": float,
        "rho": float,
        "beta": float,
        "q_scale": float,
        "r_scale": float,
        "x0": _parse_floats,
        "p0": _parse_scalar_or_list,
        "jitter": float,
        "state_dim": int,
        "output_dim": int,
        "out": str,
    }
    fields = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in parsers:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            fields[key] = parsers[key](value.strip())
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return fields


def _fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def _handle_error(response: httpx.Response) -> int:
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = response.text
    if response.status_code == 422:
        return _fail(f"invalid request: {detail}", EXIT_USAGE)
    if isinstance(detail, dict) and detail.get("type") == "numerical-failure":
        step = detail.get("step")
        where = f" at step {step}" if step is not None else ""
        return _fail(f"numerical failure{where}: {detail.get('message')}", EXIT_NUMERICAL)
    return _fail(f"service error ({response.status_code}): {detail}", EXIT_NUMERICAL)


def _print_run_summary(run: dict) -> None:
    print(
        f"{run['system']}: {run['steps']} steps, seed {run['seed']}, "
        f"filters {','.join(run['filters'])}"
    )
    for name, summary in run.get("steady_state", {}).items():
        print(
            f"  steady-state relerr[{name} vs ukf2]: mean={summary['mean']:.6g} "
            f"max|.|={summary['max']:.6g} (final {run['window']} steps)"
        )


def cmd_run(args) -> int:
    fields = {}
    if args.config:
        try:
            fields.update(_load_config_file(args.config))
        except (OSError, ValueError) as exc:
            return _fail(f"config file error: {exc}", EXIT_USAGE)
    cli_fields = {
        "system": args.system,
        "filters": args.filters.split(",") if args.filters else None,
        "steps": args.steps,
        "seed": args.seed,
        "alpha": args.alpha,
        "ts": args.ts,
        "mu": args.mu,
        "sigma": args.sigma,
        "rho": args.rho,
        "beta": args.beta,
        "q_scale": args.q_scale,
        "r_scale": args.r_scale,
        "x0": _parse_floats(args.x0) if args.x0 else None,
        "p0": _parse_scalar_or_list(args.p0) if args.p0 else None,
        "jitter": args.jitter,
        "state_dim": args.state_dim,
        "output_dim": args.output_dim,
        "out": args.out,
    }
    fields.update({k: v for k, v in cli_fields.items() if v is not None})
    if "system" not in fields:
        return _fail("a system is required (--system or config file)", EXIT_USAGE)

    try:
        response = _request(args.server, "POST", "/experiments/run", fields)
    except httpx.HTTPError as exc:
        return _fail(f"request failed: {exc}", EXIT_NUMERICAL)
    if response.status_code != 200:
        return _handle_error(response)
    run = response.json()
    out = fields.get("out") or f"{run['system']}.csv"
    try:
        Path(out).write_text(run["csv"], encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot write {out}: {exc}", EXIT_USAGE)
    _print_run_summary(run)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    payload = {
        "systems": args.systems,
        "steps": args.steps,
        "seed": args.seed,
        "gain_systems": args.gain_systems,
        "gain_perturbations": args.gain_perturbations,
    }
    try:
        response = _request(args.server, "POST", "/verify", payload)
    except httpx.HTTPError as exc:
        return _fail(f"request failed: {exc}", EXIT_NUMERICAL)
    if response.status_code != 200:
        return _handle_error(response)
    report = response.json()
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(
            f"{check['label']}: max {check['value']:.3e} "
            f"(tol {check['threshold']:.0e}) {status}"
        )
    note = report["trace_ordering"]
    print(
        "trace ordering (informational): one-step trace exceeded KF trace at "
        f"{note['claim_violations']}/{note['steps']} steps, "
        f"gap range [{note['gap_min']:.3e}, {note['gap_max']:.3e}]"
    )
    print(f"overall: {'PASS' if report['passed'] else 'FAIL'}")
    return EXIT_OK if report["passed"] else EXIT_VERIFY_FAILED


def cmd_reproduce(args) -> int:
    try:
        response = _request(args.server, "POST", "/experiments/reproduce")
    except httpx.HTTPError as exc:
        return _fail(f"request failed: {exc}", EXIT_NUMERICAL)
    if response.status_code != 200:
        return _handle_error(response)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for run in response.json()["runs"]:
            path = out_dir / f"{run['system']}.csv"
            path.write_text(run["csv"], encoding="utf-8")
            _print_run_summary(run)
            print(f"wrote {path}")
    except OSError as exc:
        return _fail(f"cannot write to {out_dir}: {exc}", EXIT_USAGE)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ukfkit",
        description="State-estimation benchmark client (Kalman and unscented filters).",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running service; default runs the service in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one system with one or more filters")
    run.add_argument("--system", choices=["vdp", "lorenz", "linear-random"])
    run.add_argument("--filters", help="comma-separated subset of kf,ukf2,ukf1,mukf")
    run.add_argument("--steps", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--alpha", type=float)
    run.add_argument("--ts", type=float)
    run.add_argument("--mu", type=float)
    run.add_argument("--sigma", type=float)
    run.add_argument("--rho", type=float)
    run.add_argument("--beta", type=float)
    run.add_argument("--q-scale", dest="q_scale", type=float)
    run.add_argument("--r-scale", dest="r_scale", type=float)
    run.add_argument("--x0", help="comma-separated initial state")
    run.add_argument("--p0", help="initial covariance: scalar scale or diagonal entries")
    run.add_argument("--jitter", type=float)
    run.add_argument("--state-dim", dest="state_dim", type=int)
    run.add_argument("--output-dim", dest="output_dim", type=int)
    run.add_argument("--out", help="CSV output path (default <system>.csv)")
    run.add_argument("--config", help="key=value file; explicit flags win")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the linear-equivalence property sweeps")
    ver.add_argument("--systems", type=int, default=100)
    ver.add_argument("--steps", type=int, default=50)
    ver.add_argument("--seed", type=int, default=7)
    ver.add_argument("--gain-systems", dest="gain_systems", type=int, default=20)
    ver.add_argument(
        "--gain-perturbations", dest="gain_perturbations", type=int, default=200
    )
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("reproduce", help="run both benchmark systems with defaults")
    rep.add_argument("--out-dir", dest="out_dir", default=".")
    rep.set_defaults(func=cmd_reproduce)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
