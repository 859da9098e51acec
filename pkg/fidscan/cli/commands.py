"""CLI commands for fidscan"""

import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np

from .. import __version__
from ..core import bcs, oracle, scanner, stoner
from ..core.exporter import (
    export_workbook,
    format_value,
    write_critical_line_csv,
    write_grid_csv,
    write_line_compare_csv,
    write_manifest,
    write_plot_script,
)
from ..core.models import BcsParams, RunConfig, StonerParams, SweepGrid
from ..core.numerics import NumericsError
from ..core.parser import ConfigParser, GridParser, ParseError, parse_range
from ..core.validator import RunConfigValidator

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

_LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO}


class ExitCodeGroup(click.Group):
    """Click group whose usage errors exit with status 1 instead of click's 2"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, False, **extra)
        try:
            code = super().main(args, prog_name, complete_var, False, **extra)
        except click.ClickException as exc:
            exc.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        sys.exit(code if isinstance(code, int) else EXIT_OK)


def _fail(ctx: click.Context, message: str, code: int = EXIT_USAGE) -> None:
    click.echo(f"Error: {message}", err=True)
    ctx.exit(code)


def sweep_options(func: Callable) -> Callable:
    """Flags shared by the commands that run or analyse a sweep; None means unset"""
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="YAML run configuration (flags override its values)"),
        click.option("--model", type=click.Choice(["stoner", "bcs"]), help="Model to sweep"),
        click.option("--t", "t", metavar="LO:HI:N", help="Temperature range"),
        click.option("--coupling", metavar="LO:HI:N", help="Coupling range (u or v)"),
        click.option("--dt", type=float, help="Temperature offset"),
        click.option("--du", type=float, help="Stoner coupling offset"),
        click.option("--dv", type=float, help="BCS coupling offset"),
        click.option("--size", type=float, help="Stoner size n = 3N/4 for N electrons"),
        click.option("--nu", type=float, help="BCS modes per unit energy"),
        click.option("--jobs", "-j", type=int, help="Worker processes"),
        click.option("--out", "-o", help="Output directory"),
        click.option("--threshold", type=float, help="Order-parameter threshold"),
        click.option("--failure-threshold", type=float, help="Tolerated share of failed cells"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load_config(
    ctx: click.Context, config_file: Optional[str], flags: Dict[str, Any]
) -> RunConfig:
    try:
        return ConfigParser().load(Path(config_file) if config_file else None, flags)
    except ParseError as e:
        click.echo(f"Error: {e}", err=True)
        click.echo(ctx.get_usage(), err=True)
        ctx.exit(EXIT_USAGE)


def _run_sweep(config: RunConfig) -> SweepGrid:
    spec = config.sweep_spec()
    units = int(spec.t_range[2] if spec.model == "stoner" else spec.coupling_range[2])
    label = "rows" if spec.model == "stoner" else "columns"
    with click.progressbar(
        length=units, label=f"{spec.model} sweep ({label})", file=sys.stderr
    ) as bar:
        return scanner.run_sweep(spec, progress=bar.update)


def _report_failures(ctx: click.Context, grid: SweepGrid, config: RunConfig) -> None:
    rate = scanner.failure_rate(grid)
    if rate > config.failure_threshold:
        click.echo(
            click.style(
                f"❌ {len(grid.failures())} of {grid.cell_count} cells failed "
                f"({rate:.2%} > {config.failure_threshold:.2%})",
                fg="red",
            ),
            err=True,
        )
        ctx.exit(EXIT_FAILURE)


def _write_line_analysis(grid: SweepGrid, out: Path) -> None:
    line = scanner.detect_critical_line(grid)
    dips = scanner.locate_fidelity_dip(grid)
    comparisons = scanner.compare_lines(line, dips, grid)
    write_critical_line_csv(line, out / "critical_line.csv")
    write_line_compare_csv(comparisons, out / "line_compare.csv")
    click.echo(f"Critical line: {len(line.points)} rows, {len(line.omitted)} without onset")
    agreement = scanner.dip_agreement(comparisons)
    if comparisons:
        click.echo(f"Fidelity dip within one cell of the line in {agreement:.1%} of rows")


@click.group(cls=ExitCodeGroup)
@click.version_option(version=__version__, prog_name="fidscan")
@click.option("--verbose", "-v", count=True, help="More log output (repeatable)")
def cli(verbose: int):
    """fidscan - Fidelity scans across thermal phase transitions"""
    logging.basicConfig(
        level=_LOG_LEVELS.get(verbose, logging.DEBUG),
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@sweep_options
@click.pass_context
def scan(ctx: click.Context, config_file: Optional[str], **flags):
    """Sweep the (t, coupling) plane and write grid, critical line and plot script"""
    config = _load_config(ctx, config_file, flags)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    grid = _run_sweep(config)
    write_grid_csv(grid, out / "grid.csv")
    _write_line_analysis(grid, out)
    write_plot_script(grid, out / "plot.gp")
    write_manifest(config, out / "manifest.yaml", __version__)
    click.echo(f"✅ Wrote grid.csv, critical_line.csv, line_compare.csv, plot.gp to {out}")
    _report_failures(ctx, grid, config)


@cli.command()
@sweep_options
@click.option("--grid", "grid_file", type=click.Path(exists=True, dir_okay=False),
              help="Analyse an existing grid.csv instead of sweeping")
@click.pass_context
def critical(ctx: click.Context, config_file: Optional[str], grid_file: Optional[str], **flags):
    """Detect the critical line and compare it with the fidelity dips"""
    config = _load_config(ctx, config_file, flags)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    if grid_file:
        try:
            grid = GridParser().parse_grid_file(
                Path(grid_file), threshold=config.threshold, dt=config.dt
            )
        except ParseError as e:
            _fail(ctx, str(e))
    else:
        grid = _run_sweep(config)
    _write_line_analysis(grid, out)
    click.echo(f"✅ Wrote critical_line.csv, line_compare.csv to {out}")
    if not grid_file:
        _report_failures(ctx, grid, config)


@cli.command(name="oracle")
@click.option("--seed", type=int, default=oracle.DEFAULT_SEED, show_default=True,
              help="Seed of the random draws")
@click.option("--draws", type=click.IntRange(min=1), default=oracle.DEFAULT_DRAWS,
              show_default=True, help="Draws per suite")
@click.option("--suite", "suites", multiple=True, type=click.Choice(list(oracle.SUITES)),
              help="Run only this suite (repeatable)")
@click.pass_context
def oracle_command(ctx: click.Context, seed: int, draws: int, suites: List[str]):
    """Check the closed forms against dense 4x4 computations"""
    click.echo(f"Oracle suites, seed {seed}, {draws} draws")
    results = oracle.run_oracle_suites(seed, draws, list(suites) or None)
    for result in results:
        status = click.style("PASS", fg="green") if result.passed else click.style("FAIL", fg="red")
        click.echo(f"  {result.name:<20} max deviation {result.max_deviation:.3e}  {status}")
    if not all(result.passed for result in results):
        click.echo(
            click.style(f"❌ Deviations above {oracle.ORACLE_TOLERANCE:g}", fg="red"), err=True
        )
        ctx.exit(EXIT_FAILURE)


@cli.command()
@click.option("--coupling", "-c", type=float, required=True, help="Coupling v")
@click.option("--t", "t", type=float, default=0.0, show_default=True, help="Temperature")
@click.option("--convention", type=click.Choice(list(bcs.CONVENTIONS)), default="integral",
              show_default=True, help="Zero-temperature gap convention")
@click.pass_context
def gap(ctx: click.Context, coupling: float, t: float, convention: str):
    """BCS gap at one (v, t) point"""
    try:
        state = bcs.solve_gap(coupling, t)
        t_c = bcs.critical_temperature(coupling)
    except (NumericsError, ValueError) as e:
        _fail(ctx, str(e))
    zero_t = bcs.zero_t_gap(coupling, convention)
    click.echo(f"gap          {format_value(state.gap)}")
    click.echo(f"residual     {state.residual:.3e}")
    click.echo(f"gap(t=0)     {format_value(zero_t)}  ({convention})")
    click.echo(f"t_c          {format_value(t_c)}")
    if t_c > 0:
        click.echo(f"gap(0)/t_c   {bcs.zero_t_gap(coupling) / t_c:.6f}")


@cli.command()
@click.option("--coupling", "-c", type=float, required=True, help="Coupling u")
@click.option("--t", "t", type=float, default=0.0, show_default=True, help="Temperature")
@click.option("--field", type=float, default=0.0, show_default=True, help="Probe field")
@click.pass_context
def equilibrium(ctx: click.Context, coupling: float, t: float, field: float):
    """Self-consistent Stoner magnetization and chemical potential at one (u, t) point"""
    try:
        if t == 0.0:
            momenta = stoner.zero_t_solve(coupling)
            click.echo(f"x            {format_value(momenta.x)}")
            click.echo(f"y            {format_value(momenta.y)}")
            click.echo(f"m            {format_value(momenta.magnetization)}")
            return
        p = StonerParams(u=coupling, t=t, field=field)
        state = stoner.solve_equilibrium(p)
        energy = stoner.free_energy(p, state)
        u_c = stoner.critical_coupling(t)
    except (NumericsError, ValueError) as e:
        _fail(ctx, str(e))
    click.echo(f"m            {format_value(state.m)}")
    click.echo(f"mu           {format_value(state.mu)}")
    click.echo(f"branch       {state.branch}")
    click.echo(f"free energy  {format_value(energy)}")
    click.echo(f"u_c(t)       {format_value(u_c)}")


@cli.command()
@click.option("--coupling", "-c", type=float, required=True, help="Coupling v")
@click.option("--t", "t", type=float, required=True, help="Temperature")
@click.option("--dt", type=float, default=0.0, show_default=True, help="Temperature offset")
@click.option("--dv", type=float, default=1e-3, show_default=True, help="Coupling offset")
@click.option("--eps", "eps_range", default="-0.2:0.2:41", show_default=True,
              metavar="LO:HI:N", help="Mode energies")
@click.pass_context
def uhlmann(ctx: click.Context, coupling: float, t: float, dt: float, dv: float, eps_range: str):
    """Per-mode Uhlmann connection deviation between (v, t) and its neighbor, as CSV"""
    try:
        low, high, count = parse_range(eps_range)
        p = BcsParams(v=coupling, t=t, dt=dt, dv=dv)
        samples = bcs.uhlmann_profile(p, np.linspace(low, high, count))
    except (ParseError, NumericsError, ValueError) as e:
        _fail(ctx, str(e))
    click.echo("eps,uhl_dev,identity_residual")
    for sample in samples:
        click.echo(",".join(format_value(v) for v in (sample.eps, sample.uhl_dev,
                                                       sample.identity_residual)))


@cli.command()
@click.option("--grid", "grid_file", type=click.Path(exists=True, dir_okay=False),
              required=True, help="grid.csv of a sweep")
@click.option("--output", "-o", default="sweep.xlsx", show_default=True,
              help="Workbook file")
@click.pass_context
def export(ctx: click.Context, grid_file: str, output: str):
    """Export a sweep to an Excel workbook"""
    parser = GridParser()
    grid_path = Path(grid_file)
    try:
        grid = parser.parse_grid_file(grid_path)
        line_path = grid_path.parent / "critical_line.csv"
        line = parser.parse_critical_line_file(line_path, grid) if line_path.exists() else None
    except ParseError as e:
        _fail(ctx, str(e))
    dips = scanner.locate_fidelity_dip(grid)
    try:
        export_workbook(grid, Path(output), line, dips)
    except ImportError as e:
        _fail(ctx, str(e))
    click.echo(f"✅ Sweep exported to: {output}")


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def validate(ctx: click.Context, config_file: str):
    """Validate a run configuration or manifest"""
    result = RunConfigValidator().validate_file(Path(config_file))
    if result:
        click.echo(click.style(f"✅ {config_file} is valid", fg="green"))
        return
    click.echo(click.style(f"❌ {config_file} is invalid:", fg="red"), err=True)
    for error in result.errors:
        click.echo(f"  {error}", err=True)
    ctx.exit(EXIT_USAGE)


def main():
    """Main entry point"""
    cli()
