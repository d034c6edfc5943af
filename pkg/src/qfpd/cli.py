"""Command-line interface.

Verbs:

    qfpd run <scenario|path>   execute a scenario, write CSV + summary (+ plots)
    qfpd list                  list builtin scenarios
    qfpd show-scenario <name>  print a builtin (or file) as editable YAML
    qfpd validate <path>       check a scenario file without running it
    qfpd oracle <name>         run one of the numeric cross-checks

Exit codes:

    0  success (run completed, all enabled validity checks passed)
    1  unexpected error
    2  configuration error (bad file, unknown key, bad value)
    3  validation / structure / numerics error
    4  iteration did not converge
    5  run completed but a validity check failed (defect above tolerance)

The output directory defaults to ``./runs`` and can be overridden with
``--output-dir`` or the ``QFPD_OUTPUT_DIR`` environment variable.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import ConfigError, ConvergenceError, NumericsError, QfpdError, \
    StructureError, ValidationError
from .oracles import ORACLES, run_oracle
from .runner import emit_plots, export_csv, export_summary, run as run_scenario, \
    run_many
from .scenarios import BUILTIN_SCENARIOS, apply_overrides, get_scenario

TRACE_CHECK = 1e-6
HERMITICITY_CHECK = 1e-8

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_CONVERGENCE = 4
EXIT_CHECKS = 5


def _exit_code(err: QfpdError) -> int:
    if isinstance(err, ConfigError):
        return EXIT_CONFIG
    if isinstance(err, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(err, (ValidationError, StructureError, NumericsError)):
        return EXIT_VALIDATION
    return EXIT_UNEXPECTED


@click.group()
def main():
    """Probabilistic control runner for finite-level quantum systems."""


@main.command("list")
def list_cmd():
    """List builtin scenarios."""
    for name, cfg in BUILTIN_SCENARIOS.items():
        d = cfg.discretization
        click.echo(f"{name:12s} system={cfg.system.kind:9s} dt={d.dt:<8g} "
                   f"horizon={d.horizon:<5d} gr={cfg.controller.gr:<8g} "
                   f"omega={cfg.controller.omega:g}")


@main.command("show-scenario")
@click.argument("name")
def show_scenario(name):
    """Print a scenario as YAML (export a builtin for editing)."""
    try:
        cfg = get_scenario(name)
    except QfpdError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(_exit_code(err))
    except OSError:
        click.echo(f"error: no builtin or readable file named {name!r}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(cfg.to_yaml(), nl=False)


@main.command("validate")
@click.argument("path", type=click.Path(exists=True))
def validate_cmd(path):
    """Validate a scenario file; exit 0 when well-formed."""
    try:
        cfg = get_scenario(path)
    except QfpdError as err:
        click.echo(f"invalid: {err}", err=True)
        sys.exit(_exit_code(err))
    except OSError as err:
        click.echo(f"invalid: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"ok: scenario {cfg.name!r} is valid")


@main.command("run")
@click.argument("scenario")
@click.option("--seed", type=int, default=None, help="override the scenario seed")
@click.option("--seeds", type=int, default=None,
              help="fan out N trajectories with seeds seed..seed+N-1")
@click.option("--workers", type=int, default=1, help="parallel workers for --seeds")
@click.option("--horizon", type=int, default=None, help="override the horizon")
@click.option("--noise-off", is_flag=True, help="disable all noise channels")
@click.option("--output-dir", type=click.Path(), default=None,
              envvar="QFPD_OUTPUT_DIR", help="output directory (default ./runs)")
@click.option("--plots/--no-plots", default=True, help="emit SVG plots")
def run_cmd(scenario, seed, seeds, workers, horizon, noise_off, output_dir, plots):
    """Run a builtin scenario or a scenario file end to end."""
    try:
        cfg = get_scenario(scenario)
        cfg = apply_overrides(cfg, seed=seed, horizon=horizon, noise_off=noise_off)
        outdir = Path(output_dir) if output_dir else Path("runs")
        if seeds is not None:
            base = cfg.seed
            seed_list = [base + k for k in range(seeds)]
            results = run_many(cfg, seed_list, workers=workers)
        else:
            results = [run_scenario(cfg)]
    except OSError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    except QfpdError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(_exit_code(err))

    checks_ok = True
    for traj, summary in results:
        tag = cfg.name if len(results) == 1 else f"{cfg.name}_seed{traj.seed}"
        csv_path = export_csv(traj, outdir / f"{tag}.csv")
        export_summary(summary, outdir / f"{tag}_summary.json")
        if plots:
            emit_plots(traj, outdir / tag, desired=cfg.target.desired)
        ok = (summary.max_trace_defect <= TRACE_CHECK
              and summary.max_hermiticity_defect <= HERMITICITY_CHECK)
        checks_ok = checks_ok and ok
        band = summary.steps_to_band if summary.steps_to_band is not None else "never"
        click.echo(
            f"{tag}: final o={summary.final_output:.6f} (target {summary.desired:g}) "
            f"in-band from step {band}; max|u|={summary.max_control:.4g}; "
            f"trace defect {summary.max_trace_defect:.2e}; "
            f"wall {summary.wall_time_s:.2f}s; wrote {csv_path}")
    if not checks_ok:
        click.echo("validity checks failed (defect above tolerance)", err=True)
        sys.exit(EXIT_CHECKS)


@main.command("oracle")
@click.argument("name", type=click.Choice(sorted(ORACLES)))
@click.option("--states", type=int, default=None,
              help="number of random states (where applicable)")
@click.option("--seed", type=int, default=0)
def oracle_cmd(name, states, seed):
    """Run one numeric cross-check and print its pass/fail line."""
    kwargs = {}
    if states is not None and name in ("control-law", "index-value"):
        kwargs["states"] = states
    if name != "morse-quadrature":
        kwargs["seed"] = seed
    try:
        result = run_oracle(name, **kwargs)
    except QfpdError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(_exit_code(err))
    click.echo(result.line())
    if not result.passed:
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()
