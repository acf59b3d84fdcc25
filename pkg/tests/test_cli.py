
from ukfkit import cli, harness
from ukfkit.errors import GainSingularError


def run_cli(argv):
    """Invoke the CLI, normalizing argparse's SystemExit into a code."""
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "vdp.csv"
    code = run_cli(
        ["run", "--system", "vdp", "--steps", "25", "--seed", "1", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 26
    stdout = capsys.readouterr().out
    assert "steady-state relerr[ukf1 vs ukf2]" in stdout


def test_run_spec_example_flags(tmp_path):
    out = tmp_path / "vdp.csv"
    code = run_cli(
        [
            "run", "--system", "vdp", "--filters", "ukf1,ukf2,mukf",
            "--steps", "30", "--alpha", "1.5", "--seed", "1", "--out", str(out),
        ]
    )
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header.index("ukf1_trace_P") < header.index("ukf2_trace_P")


def test_zero_steps_is_usage_error(tmp_path, capsys):
    code = run_cli(["run", "--system", "lorenz", "--steps", "0"])
    assert code == 2
    assert "invalid request" in capsys.readouterr().err


def test_unknown_system_is_usage_error():
    assert run_cli(["run", "--system", "rossler"]) == 2


def test_unknown_flag_is_usage_error():
    assert run_cli(["run", "--system", "vdp", "--frobnicate", "1"]) == 2


def test_missing_system_is_usage_error(capsys):
    assert run_cli(["run", "--steps", "5"]) == 2
    assert "system is required" in capsys.readouterr().err


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text(
        "# benchmark configuration\n"
        "system=vdp\n"
        "steps=12\n"
        "seed=3\n"
        "filters=ukf2,mukf\n"
    )
    out = tmp_path / "out.csv"
    code = run_cli(
        ["run", "--config", str(config), "--steps", "8", "--out", str(out)]
    )
    assert code == 0
    assert len(out.read_text().splitlines()) == 9  # flag wins over file


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense-line\n")
    assert run_cli(["run", "--config", str(bad)]) == 2
    bad.write_text("unknown_key=5\n")
    assert run_cli(["run", "--config", str(bad)]) == 2
    assert run_cli(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    capsys.readouterr()


def test_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    def explode(config):
        error = GainSingularError("output covariance singular")
        error.step = 4
        raise error

    monkeypatch.setattr(harness, "run_experiment", explode)
    code = run_cli(["run", "--system", "vdp", "--steps", "5"])
    assert code == 3
    assert "numerical failure at step 4" in capsys.readouterr().err


def test_verify_small_sweep(capsys):
    code = run_cli(
        [
            "verify", "--systems", "4", "--steps", "6", "--seed", "7",
            "--gain-systems", "2", "--gain-perturbations", "10",
        ]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "two-step vs KF covariance deviation" in stdout
    assert "overall: PASS" in stdout


def test_verify_failure_exit_code(capsys, monkeypatch):
    from ukfkit import verify as verify_mod

    def failing(**kwargs):
        report = verify_mod.VerificationReport(systems=1, steps=1, seed=0, alphas=(1.0,))
        report.checks = [verify_mod.Check("synthetic", 1.0, 1e-9)]
        return report

    monkeypatch.setattr(verify_mod, "run_verification", failing)
    code = run_cli(["verify", "--systems", "1"])
    assert code == 1
    assert "overall: FAIL" in capsys.readouterr().out


def test_reproduce_writes_both_files(tmp_path, monkeypatch):
    monkeypatch.setattr(
        harness,
        "reproduce_configs",
        lambda: [
            ("vdp", harness.ExperimentConfig(system="vdp", steps=6)),
            ("lorenz", harness.ExperimentConfig(system="lorenz", steps=6)),
        ],
    )
    out = tmp_path / "results"
    assert run_cli(["reproduce", "--out-dir", str(out)]) == 0
    assert (out / "vdp.csv").exists()
    assert (out / "lorenz.csv").exists()
