"""Experiment runner behind the ``lrl`` command.

Exit codes: 0 success, 1 usage or config error, 2 failed check, 3 divergence.
"""
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np
import pandas as pd
from dotenv import load_dotenv

from anharmonic import bracket_from_tangent, tangent_trajectory
from bounds import (
    EnvelopeVariant,
    VelocityMode,
    anharmonic_envelope,
    anharmonic_velocity,
    coupling_constant,
    envelope_params,
    harmonic_envelope,
    kappa_v,
    min_distance,
    multisite_envelope,
    optimal_mu,
    velocity_estimates,
)
from data_export import BOUNDS_COLUMNS, KERNEL_COLUMNS, SWEEP_COLUMNS, ResultExporter, format_table
from errors import ConfigError, DivergenceError, LrlError, NoFiniteVelocityError
from experiment_config import load_config
from harmonic import kernel_decay_report, kernels
from observables import harmonic_bracket_norm
from verification import InvariantVerifier, report_lines

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2
EXIT_DIVERGED = 3

SWEEP_MODES = ("harmonic", "anharmonic", "multisite")
DEFAULT_WORKERS = 4


def run_kernels(cfg, exporter=None):
    """Kernel values and decay-bound margins at every (t, site) of the schedule"""
    lat, params = cfg.torus, cfg.params
    labels = [lat.label(i) for i in range(lat.size)]
    distance = lat.distance_table[lat.origin_index]
    frames = []
    for t in cfg.times():
        ks = kernels(lat, params, t)
        report = kernel_decay_report(lat, params, t, cfg.rates.mu)
        margins = report.pivot(index="site_index", columns="order", values="margin")
        frames.append(pd.DataFrame({
            "t": float(t),
            "x": labels,
            "distance": distance,
            "h_minus1": ks.h_minus1,
            "h_0": ks.h_0,
            "h_plus1": ks.h_plus1,
            "margin_minus1": margins[-1].to_numpy(),
            "margin_0": margins[0].to_numpy(),
            "margin_plus1": margins[1].to_numpy(),
        }))
    table = pd.concat(frames, ignore_index=True)[KERNEL_COLUMNS]
    exporter = exporter or ResultExporter(cfg.output.path)
    exporter.export_to_csv(table, KERNEL_COLUMNS)
    return table


def _harmonic_job(cfg, f, g):
    lat, params = cfg.torus, cfg.params
    factor = f.norm * g.norm * min(len(f.support), len(g.support))

    def job(t):
        measured = harmonic_bracket_norm(lat, params, f, g, t)
        envelope = factor * harmonic_envelope(
            lat, params, f.support, g.support, t, cfg.rates.mu, EnvelopeVariant.WEYL)
        return measured, envelope

    return job


def _sampled_job(cfg, f, g, times):
    system, dt = cfg.system, cfg.integrator.dt

    def job(x0):
        flows = tangent_trajectory(system, x0, times, dt)
        return np.array([abs(bracket_from_tangent(flow, f, g, x0)) for flow in flows])

    return job


def _envelope_curve(cfg, mode, f, g, times):
    lat, params = cfg.torus, cfg.params
    factor = f.norm * g.norm * min(len(f.support), len(g.support))
    if mode == "anharmonic":
        pot = cfg.system.site_potential
        return np.array([
            factor * anharmonic_envelope(lat, params, pot, f.support, g.support, t, cfg.rates.mu, cfg.rates.epsilon)
            for t in times
        ])
    constants = cfg.constants
    return np.array([
        factor * multisite_envelope(lat, params, constants, f.support, g.support, t, cfg.rates.epsilon)
        for t in times
    ])


def _check_sweep_mode(cfg, mode):
    if mode not in SWEEP_MODES:
        raise ConfigError(f"unknown sweep mode {mode!r}, expected one of {SWEEP_MODES}")
    kind = cfg.potential.kind
    if mode == "anharmonic" and kind != "gaussian_site":
        raise ConfigError("anharmonic sweeps need potential.kind = gaussian_site", field="potential.kind")
    if mode == "multisite" and kind == "none":
        raise ConfigError("multisite sweeps need a potential", field="potential.kind")


def _sweep_frame(times, d_xy, kind, measured, envelope, abs_tol):
    margin = envelope - measured
    return pd.DataFrame({
        "t": times,
        "d_XY": d_xy,
        "measure_kind": kind,
        "measured": measured,
        "envelope": envelope,
        "margin": margin,
        "passed": margin >= -abs_tol,
        "status": "ok",
    })[SWEEP_COLUMNS]


def _diverged_frame(exc, d_xy, kind):
    return pd.DataFrame([{
        "t": float(exc.time),
        "d_XY": d_xy,
        "measure_kind": kind,
        "measured": math.nan,
        "envelope": math.nan,
        "margin": math.nan,
        "passed": False,
        "status": "diverged",
    }])[SWEEP_COLUMNS]


def run_sweep(cfg, mode="harmonic", workers=DEFAULT_WORKERS, exporter=None):
    """Bracket magnitude against its Lieb-Robinson envelope along the schedule"""
    _check_sweep_mode(cfg, mode)
    f, g = cfg.f_generator(), cfg.g_generator()
    times = cfg.times()
    d_xy = min_distance(cfg.torus, f.support, g.support)
    exporter = exporter or ResultExporter(cfg.output.path)

    if mode == "harmonic":
        kind = "exact_norm"
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_harmonic_job(cfg, f, g), times))
        measured = np.array([r[0] for r in rows])
        envelope = np.array([r[1] for r in rows])
    else:
        kind = "sampled_max"
        # build the shared caches before the worker threads read them
        cfg.system.stiffness, cfg.system.pair_weights
        points = cfg.sampler().points(cfg.torus.size)
        measured = np.zeros(len(times))
        try:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for values in pool.map(_sampled_job(cfg, f, g, times), points):
                    measured = np.maximum(measured, values)
        except DivergenceError as exc:
            logger.error("sweep aborted: %s", exc)
            table = _diverged_frame(exc, d_xy, kind)
            exporter.export_to_csv(table, SWEEP_COLUMNS)
            return table
        envelope = _envelope_curve(cfg, mode, f, g, times)

    table = _sweep_frame(times, d_xy, kind, measured, envelope, cfg.check.abs_tol)
    failed = int((~table["passed"]).sum())
    if failed:
        logger.warning("%d of %d sweep rows exceed the envelope", failed, len(table))
    exporter.export_to_csv(table, SWEEP_COLUMNS)
    return table


def sweep_exit_code(table):
    if (table["status"] == "diverged").any():
        return EXIT_DIVERGED
    return EXIT_OK if table["passed"].all() else EXIT_CHECK_FAILED


def run_verify(cfg):
    """Run the invariant suite; returns the report lines and the exit code"""
    outcome = InvariantVerifier(cfg).verify()
    if outcome['diverged']:
        code = EXIT_DIVERGED
    else:
        code = EXIT_OK if outcome['status'] == 'pass' else EXIT_CHECK_FAILED
    return report_lines(cfg, outcome), code


def run_bounds(cfg):
    """Constants, rates and velocities with the formulas they come from"""
    lat, params = cfg.torus, cfg.params
    mu, eps, nu = cfg.rates.mu, cfg.rates.epsilon, lat.nu
    system = cfg.system
    kappa = kappa_v(system.site_potential)
    estimates = velocity_estimates(params, mu, eps, kappa, nu)
    env = envelope_params(params, mu, eps, nu, kappa=kappa)
    rate = optimal_mu()

    rows = [
        ("c", coupling_constant(params), "sqrt(omega^2 + 4 sum_j lambda_j)"),
        ("v_h(mu)", estimates.v_h, "c max(2/mu, exp(mu/2 + 1))"),
        ("mu0", estimates.mu0, "root of 2/mu = exp(mu/2 + 1) in (1/2, 1)"),
        ("v_h(mu0)", estimates.v_h_opt, "c 2/mu0"),
        ("2/mu0", rate.v_opt_factor, "v_h(mu0)/c <= 4"),
        ("C_nu", env.cnu, "2^(nu+1) sum_z (1 + |z|)^-(nu+1), certified upper value"),
        ("kappa_V", kappa, "integral |r| |V'^(r)| dr"),
        ("C", env.prefactor(nu), "(1 + c exp((mu+eps)/2) + 1/c) sup_s (1+s)^(nu+1) exp(-eps s)"),
        ("delta", estimates.delta, "(mu+eps) v_h(mu+eps) + C C_nu kappa_V"),
        ("v_ah", estimates.v_ah, "(1 + eps/mu) v_h(mu+eps) + C C_nu kappa_V / mu"),
    ]

    if not system.harmonic_only():
        constants = cfg.constants
        rows.extend([
            ("C1", constants.c1, "(sum_Z |d_x V_Z|)^2 <= C1 sum_y (q_y^2 + C1~) F_mu1(d(x,y))"),
            ("C1~", constants.c1_tilde, "offset in the harmonic domination bound"),
            ("mu1", constants.mu1, "rate of the harmonic domination bound"),
            ("C2", constants.c2, "sum_Z |d_x d_y V_Z| <= C2 F_mu2(d(x,y))"),
            ("mu2", constants.mu2, "rate of the second-derivative bound"),
            ("C3", constants.c3, "sum_Z int |r| |grad V_Z^(r)| dr <= C3 F_mu3(d(x,y))"),
            ("mu3", constants.mu3, "rate of the Fourier bound"),
        ])
        multi = envelope_params(params, constants.mu3, eps, nu, constants=constants, cnu=env.cnu)
        rows.append(("delta_multi", multi.delta_multi_site(nu), "(mu3+eps) v_h(mu3+eps) + C C3 C_nu^2"))
        try:
            v_multi = anharmonic_velocity(
                constants.mu3, eps, params, constants.c3, VelocityMode.MULTI_SITE, nu, env.cnu)
            rows.append(("v_ah_multi", v_multi, "(1 + eps/mu3) v_h(mu3+eps) + C C3 C_nu^2 / mu3"))
        except NoFiniteVelocityError:
            rows.append(("v_ah_multi", math.inf, "mu3 = 0: polynomial decay only, no finite velocity"))

    return pd.DataFrame(rows, columns=BOUNDS_COLUMNS)


def _configure_logging(level):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _load(config_path, out=None, seed=None):
    cfg = load_config(config_path)
    return cfg.with_overrides(out=out, seed=seed)


@click.group()
@click.option("--log-level", default=None, help="Logging level (overrides LRL_LOG_LEVEL).")
@click.option("--workers", type=int, default=None, help="Sweep worker threads (overrides LRL_WORKERS).")
@click.pass_context
def cli(ctx, log_level, workers):
    """Lieb-Robinson bound experiments on periodic oscillator lattices"""
    load_dotenv()
    _configure_logging(log_level or os.getenv("LRL_LOG_LEVEL", "INFO"))
    ctx.ensure_object(dict)
    ctx.obj["workers"] = workers or int(os.getenv("LRL_WORKERS", str(DEFAULT_WORKERS)))


@cli.command("kernels")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="Output CSV path (overrides output.path).")
@click.pass_context
def kernels_command(ctx, config_path, out):
    """Write the kernel table with decay-bound margins"""
    cfg = _load(config_path, out)
    run_kernels(cfg)
    return EXIT_OK


@cli.command("sweep")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(SWEEP_MODES), default="harmonic", show_default=True)
@click.option("--out", default=None, help="Output CSV path (overrides output.path).")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Sampling seed (overrides sampling.seed).")
@click.pass_context
def sweep_command(ctx, config_path, mode, out, seed):
    """Compare bracket magnitudes with their envelopes over the schedule"""
    cfg = _load(config_path, out, seed)
    table = run_sweep(cfg, mode, workers=ctx.obj["workers"])
    return sweep_exit_code(table)


@cli.command("verify")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="Also write the report to this path.")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Sampling seed (overrides sampling.seed).")
@click.pass_context
def verify_command(ctx, config_path, out, seed):
    """Run the invariant checks and print one line per check"""
    cfg = _load(config_path, seed=seed)
    lines, code = run_verify(cfg)
    click.echo("\n".join(lines))
    if out is not None:
        ResultExporter(out).export_report(lines)
    return code


@cli.command("bounds")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="Also write the table to this CSV path.")
@click.pass_context
def bounds_command(ctx, config_path, out):
    """Print constants, rates and velocities"""
    cfg = _load(config_path)
    table = run_bounds(cfg)
    lines = ["# configuration", *cfg.describe(), "# bounds", *format_table(table)]
    click.echo("\n".join(lines))
    if out is not None:
        ResultExporter(out).export_to_csv(table, BOUNDS_COLUMNS)
    return EXIT_OK


def main(argv=None):
    """Entry point; returns the process exit code"""
    try:
        code = cli.main(args=argv, prog_name="lrl", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_USAGE
    except DivergenceError as exc:
        click.echo(f"diverged: {exc}", err=True)
        return EXIT_DIVERGED
    except LrlError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    # --help returns None
    return EXIT_OK if code is None else int(code)


if __name__ == "__main__":
    sys.exit(main())
