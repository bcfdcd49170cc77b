import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from data_export import BOUNDS_COLUMNS, KERNEL_COLUMNS, SWEEP_COLUMNS
from expcli import EXIT_CHECK_FAILED, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, cli, main, run_bounds, run_sweep
from experiment_config import parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

CHAIN = """\
lattice.nu = 1
lattice.L = 4
harmonic.omega = 1.0
harmonic.lambda = 1.0
observables.g_support = 3
schedule.t_max = 1
schedule.t_steps = 5
"""

SITE_CHAIN = """\
lattice.nu = 1
lattice.L = 2
harmonic.omega = 1.0
harmonic.lambda = 1.0
potential.kind = gaussian_site
schedule.t_max = 0.5
schedule.t_steps = 3
rates.mu = 0.5
integrator.dt = 1e-3
sampling.count = 4
check.trajectories = 2
"""


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    # the CLI replaces the root handlers with one on the captured stderr
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)


@pytest.fixture
def run(capsys, restore_logging):
    def invoke(*args):
        code = main([str(a) for a in args])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke


def test_kernels_table(write_config, tmp_path, run):
    out = tmp_path / "kernels.csv"
    code, _, _ = run("kernels", write_config(CHAIN), "--out", out)
    assert code == EXIT_OK
    table = pd.read_csv(out)
    assert list(table.columns) == KERNEL_COLUMNS
    assert len(table) == 5 * 8
    start = table[table["t"] == 0.0]
    assert start.loc[start["x"] == 0, "h_0"].tolist() == [1.0]
    np.testing.assert_allclose(start.loc[start["x"] != 0, "h_0"], 0.0, atol=1e-14)
    margins = table[["margin_minus1", "margin_0", "margin_plus1"]].to_numpy()
    assert np.all(margins >= -1e-12)


def test_kernels_use_configured_output_path(write_config, tmp_path, monkeypatch, run):
    monkeypatch.chdir(tmp_path)
    code, _, _ = run("kernels", write_config(CHAIN + "output.path = nested/kernels.csv\n"))
    assert code == EXIT_OK
    assert (tmp_path / "nested" / "kernels.csv").exists()


def test_harmonic_sweep_passes_and_is_deterministic(write_config, tmp_path, run):
    path = write_config(CHAIN)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("sweep", path, "--out", first)[0] == EXIT_OK
    assert run("--workers", 1, "sweep", path, "--out", second)[0] == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    table = pd.read_csv(first)
    assert list(table.columns) == SWEEP_COLUMNS
    assert table["passed"].all()
    assert (table["status"] == "ok").all()
    assert (table["d_XY"] == 3).all()
    assert table.loc[0, "measured"] == pytest.approx(0.0, abs=1e-14)


def test_sweep_over_negative_times(write_config, tmp_path, run):
    text = CHAIN.replace("schedule.t_max = 1", "schedule.t_min = -2\nschedule.t_max = 2")
    out = tmp_path / "both_ways.csv"
    code, _, _ = run("sweep", write_config(text), "--out", out)
    assert code == EXIT_OK
    table = pd.read_csv(out)
    assert table["t"].tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert table["passed"].all()
    assert table.loc[table["t"] == 0.0, "measured"].item() == pytest.approx(0.0, abs=1e-14)


def test_anharmonic_sweep(write_config, tmp_path, run):
    out = tmp_path / "sweep.csv"
    code, _, _ = run("sweep", write_config(SITE_CHAIN), "--mode", "anharmonic", "--out", out)
    table = pd.read_csv(out)
    assert code == EXIT_OK
    assert len(table) == 3
    assert (table["measure_kind"] == "sampled_max").all()
    assert np.all(np.diff(table["envelope"]) > 0)


def test_sweep_seed_override_changes_samples(write_config, tmp_path):
    cfg = parse_config(SITE_CHAIN)
    one = run_sweep(cfg.with_overrides(out=tmp_path / "one.csv", seed=1), "anharmonic", workers=2)
    two = run_sweep(cfg.with_overrides(out=tmp_path / "two.csv", seed=2), "anharmonic", workers=2)
    assert one["measured"].iloc[-1] != two["measured"].iloc[-1]


def test_multisite_sweep_with_pair_potential(tmp_path):
    cfg = parse_config(SITE_CHAIN.replace("gaussian_site", "gaussian_pair") + "potential.amplitude = 0.5\n")
    table = run_sweep(cfg.with_overrides(out=tmp_path / "multi.csv"), "multisite", workers=2)
    assert table["passed"].all()


def test_sweep_mode_needs_matching_potential(write_config, run):
    code, _, err = run("sweep", write_config(CHAIN), "--mode", "anharmonic")
    assert code == EXIT_USAGE
    assert "potential.kind" in err


def test_divergent_sweep_writes_a_diagnostic_row(write_config, tmp_path, run):
    text = SITE_CHAIN.replace("integrator.dt = 1e-3", "integrator.dt = 1").replace(
        "schedule.t_max = 0.5", "schedule.t_max = 400").replace("sampling.count = 4", "sampling.count = 1")
    out = tmp_path / "diverged.csv"
    code, _, _ = run("sweep", write_config(text), "--mode", "anharmonic", "--out", out)
    assert code == EXIT_DIVERGED
    table = pd.read_csv(out)
    assert len(table) == 1
    assert table.loc[0, "status"] == "diverged"
    assert not table.loc[0, "passed"]
    assert math.isnan(table.loc[0, "measured"])


def test_bounds_for_decoupled_oscillators(write_config, tmp_path, run):
    text = "lattice.nu = 1\nlattice.L = 2\nharmonic.omega = 1\nharmonic.lambda = 0\nrates.mu = 2\n"
    out = tmp_path / "bounds.csv"
    code, stdout, _ = run("bounds", write_config(text), "--out", out)
    assert code == EXIT_OK
    assert "# bounds" in stdout
    table = pd.read_csv(out)
    assert list(table.columns) == BOUNDS_COLUMNS
    values = dict(zip(table["quantity"], table["value"]))
    assert values["c"] == pytest.approx(1.0)
    assert values["v_h(mu)"] == pytest.approx(math.e ** 2)
    assert 0.5 < values["mu0"] < 1.0
    assert values["kappa_V"] == 0.0


def test_bounds_with_potentials():
    site = run_bounds(parse_config(SITE_CHAIN)).set_index("quantity")["value"]
    assert site["kappa_V"] == pytest.approx(2.0)
    assert site["C2"] == pytest.approx(2.0)
    assert site["v_ah"] >= site["v_h(mu)"]
    assert site["mu1"] == site["mu2"] == site["mu3"] == 0.5
    pair = run_bounds(parse_config(SITE_CHAIN.replace("gaussian_site", "gaussian_pair") + "potential.weight_mu = 0\n"))
    values = pair.set_index("quantity")["value"]
    assert values["mu3"] == 0.0
    assert values["mu1"] == 0.5
    assert values["v_ah_multi"] == math.inf


def test_verify_passes_on_a_small_system(write_config, tmp_path, run):
    report = tmp_path / "report.txt"
    code, stdout, _ = run("verify", write_config(SITE_CHAIN), "--out", report)
    assert code == EXIT_OK, stdout
    assert "# 22/22 checks passed" in stdout
    assert "PASS energy_conservation" in stdout
    assert report.read_text().splitlines()[0] == "# configuration"


def test_verify_fails_with_absurd_step(write_config, run):
    text = SITE_CHAIN.replace("integrator.dt = 1e-3", "integrator.dt = 1").replace("t_max = 0.5", "t_max = 2")
    code, stdout, _ = run("verify", write_config(text))
    assert code == EXIT_CHECK_FAILED
    assert "FAIL energy_conservation" in stdout


def test_config_errors_exit_with_usage_code(write_config, tmp_path, run):
    code, _, err = run("kernels", write_config(CHAIN + "lattice.L = 5\n"))
    assert code == EXIT_USAGE
    assert "line 8" in err
    assert run("kernels", tmp_path / "missing.cfg")[0] == EXIT_USAGE
    assert run("unknown-command")[0] == EXIT_USAGE
    assert run("--help")[0] == EXIT_OK


def test_group_under_cli_runner(write_config, restore_logging):
    runner = CliRunner()
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("kernels", "sweep", "verify", "bounds"):
        assert command in result.output
    result = runner.invoke(cli, ["bounds", str(write_config(CHAIN))], env={"LRL_LOG_LEVEL": "WARNING"})
    assert result.exit_code == 0, result.output
    assert "# bounds" in result.output
    assert "lattice.L = 4" in result.output


@pytest.mark.slow
def test_gaussian_site_config_stays_inside_its_light_cone(tmp_path, run):
    out = tmp_path / "gaussian_site.csv"
    code, _, err = run("sweep", CONFIGS / "gaussian_site.cfg", "--mode", "anharmonic", "--out", out)
    assert code == EXIT_OK, err
    table = pd.read_csv(out)
    assert len(table) == 21
    assert (table["status"] == "ok").all()
    assert (table["d_XY"] == 5).all()
    assert table["passed"].all()
    assert table["measured"].iloc[-1] > 0.0
