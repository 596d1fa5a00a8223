"""
Hartree Lab
===========

Command line surface of the modified wave operator lab:
validate, run, sweep, report and oracle.

Main Entry Point
"""

import sys
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click
from rich.console import Console
from rich.table import Table

# Repository root on the import path
sys.path.insert(0, str(Path(__file__).parent))

from src.core.application import LabApplication, parse_vary
from src.core.config import load_config
from src.core.errors import ConfigError, ConfigValidationError, LabError, MissingArtifactsError
from src.core.logger import logger
from src.modules.oracles import ORACLES, run_oracle
from src.modules.run_store import load_report

console = Console()

MODULE_ORDER = ["hartree_core", "asymptotics", "cauchy_solver", "transforms", "estimates_lab"]


def _overrides(grid: Optional[int], tfinal: Optional[float], seed: Optional[int]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if grid is not None:
        overrides["grid"] = {"points_per_dim": grid}
    if tfinal is not None:
        overrides["solver"] = {"T": tfinal}
    if seed is not None:
        overrides["initial_data"] = {"seed": seed}
    return overrides


def _load(path: str, grid, tfinal, seed):
    """Config with CLI overrides merged into the file's sections"""
    config = load_config(path)
    dotted = {}
    for section, values in _overrides(grid, tfinal, seed).items():
        for key, value in values.items():
            dotted[f"{section}.{key}"] = value
    return config.with_overrides(dotted) if dotted else config


def _config_failure(error: ConfigError):
    console.print(f"[bold red]Invalid configuration[/bold red]: {error}")
    if isinstance(error, ConfigValidationError):
        for violation in error.violations:
            console.print(f"  [red]✗[/red] {violation}")
    sys.exit(1)


def _fmt(value, spec: str = ".3g") -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return format(value, spec)
    return str(value)


def _verdict(verdict: str, gating: bool) -> str:
    colour = {"pass": "green", "fail": "red", "error": "red", "skipped": "yellow"}.get(verdict, "white")
    suffix = "" if gating else " (diag)"
    return f"[{colour}]{verdict}[/{colour}]{suffix}"


def render_report(result: Dict[str, Any]):
    """One table per module"""
    table = result["table"]
    summary = result["summary"] or {}
    if summary:
        resolution = summary.get("resolution", {})
        console.print(f"[bold]Run[/bold] {summary.get('label')} started {summary.get('started')}, "
                      f"grid {resolution.get('grid')}, K={resolution.get('K')}, T={_fmt(resolution.get('T'))}")

    modules = [m for m in MODULE_ORDER if m in set(table["module"])]
    modules += [m for m in sorted(set(table["module"]) - set(MODULE_ORDER)) if m]
    for module in modules:
        rows = table[table["module"] == module]
        view = Table(title=module, show_lines=False)
        for column in ("quantity", "equation", "predicted", "slope", "band", "verdict"):
            view.add_column(column, overflow="fold")
        for _, row in rows.iterrows():
            view.add_row(str(row["quantity"]), str(row["equation"] or ""), _fmt(row["predicted_exponent"]),
                         _fmt(row["fitted_slope"]), _fmt(row["band_ratio"]),
                         _verdict(str(row["verdict"]), bool(row["gating"])))
        console.print(view)

    if result["csvs"]:
        console.print(f"[bold]Plot-ready CSVs[/bold] ({len(result['csvs'])}): {', '.join(result['csvs'])}")
    if result["missing"]:
        console.print(f"[yellow]Missing artifacts:[/yellow] {', '.join(result['missing'])}")


def common_options(func):
    func = click.option("--seed", type=int, default=None, help="Initial data seed")(func)
    func = click.option("--tfinal", type=float, default=None, help="Final time T (skips calibration)")(func)
    func = click.option("--grid", type=int, default=None, help="Grid points per dimension")(func)
    return func


@click.group()
@click.option("--debug", is_flag=True, help="Console logging at DEBUG level")
def cli(debug: bool):
    """Pseudo-spectral lab for modified wave operators of the long range Hartree equation"""
    if debug:
        logger.set_level("DEBUG")


@cli.command()
@click.argument("config_path", type=click.Path())
@common_options
def validate(config_path: str, grid, tfinal, seed):
    """Print the fully populated config or the violated conditions"""
    try:
        config = _load(config_path, grid, tfinal, seed)
    except ConfigError as e:
        _config_failure(e)
    params = config.to_model_params()
    table = params.exponents
    console.print("[green]✓ Configuration valid[/green]")
    console.print_json(data=config.model_dump(mode="json"))
    console.print(f"lambda_0={table.lambda_(0):.4g} lambda_1={table.lambda_(1):.4g} "
                  f"2 gamma + lambda_1 - 1={table.integrability_exponent:.4g} "
                  f"hoelder={table.holder_exponent(config.rho_prime):.4g}")


@cli.command()
@click.argument("config_path", type=click.Path())
@common_options
@click.option("--progress/--no-progress", default=False, help="Show progress bars")
def run(config_path: str, grid, tfinal, seed, progress: bool):
    """Run one experiment; exit 1 iff any check fails"""
    try:
        config = _load(config_path, grid, tfinal, seed)
    except ConfigError as e:
        _config_failure(e)
    try:
        outcome = LabApplication(config, show_progress=progress).run()
    except LabError as e:
        console.print(f"[bold red]Run failed[/bold red]: {e}")
        sys.exit(1)

    render_report(load_report(outcome.run_dir))
    console.print(f"Run directory: {outcome.run_dir}")
    if not outcome.passed:
        console.print(f"[bold red]Failing checks:[/bold red] {', '.join(outcome.summary['blocking'])}")
        sys.exit(1)
    console.print("[bold green]All checks passed[/bold green]")


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--vary", "vary", multiple=True, required=True, help="key=v1,v2,... (repeatable)")
@common_options
@click.option("--progress/--no-progress", default=False, help="Show progress bars")
def sweep(config_path: str, vary: Tuple[str, ...], grid, tfinal, seed, progress: bool):
    """Run the product of varied keys; the first member calibrates the constants"""
    try:
        config = _load(config_path, grid, tfinal, seed)
        varied: Dict[str, Any] = {}
        for spec in vary:
            varied.update(parse_vary(spec))
        # Validate every member before any compute
        for key, values in varied.items():
            for value in values:
                config.with_overrides({key: value})
    except ConfigError as e:
        _config_failure(e)
    except LabError as e:
        console.print(f"[bold red]Invalid sweep[/bold red]: {e}")
        sys.exit(1)

    try:
        outcome = LabApplication(config, show_progress=progress).sweep(varied)
    except LabError as e:
        console.print(f"[bold red]Sweep failed[/bold red]: {e}")
        sys.exit(1)

    members = Table(title="sweep members")
    for column in ("overrides", "run directory", "verdict"):
        members.add_column(column)
    for member in outcome.members:
        members.add_row(str(member["overrides"]), member["run_dir"], _verdict("pass" if member["passed"] else "fail", True))
    console.print(members)

    stability = Table(title="constant stability")
    stability.add_column("constant")
    stability.add_column("values")
    stability.add_column("max/min")
    for name, row in outcome.stability.items():
        stability.add_row(name, ", ".join(_fmt(v) for v in row["values"]), _fmt(row["max_over_min"]))
    console.print(stability)
    console.print(f"Sweep directory: {outcome.sweep_dir}")
    if not outcome.passed:
        sys.exit(1)


@cli.command()
@click.argument("run_dir", type=click.Path())
def report(run_dir: str):
    """Render the per-module tables of a finished run"""
    try:
        result = load_report(run_dir)
    except MissingArtifactsError as e:
        console.print(f"[bold red]Incomplete run directory[/bold red]: {e}")
        sys.exit(1)
    render_report(result)
    summary = result["summary"]
    if summary is not None and not summary.get("passed", False):
        sys.exit(1)


@cli.command()
@click.argument("name", type=click.Choice(sorted(ORACLES)))
def oracle(name: str):
    """Run a brute-force oracle and print its reference values"""
    result = run_oracle(name)
    table = Table(title=f"oracle: {name}")
    table.add_column("quantity")
    table.add_column("value")
    for key, value in result.values.items():
        table.add_row(key, _fmt(value, ".12g"))
    console.print(table)
    status = "[green]within[/green]" if result.passed else "[red]outside[/red]"
    console.print(f"error {result.error:.3g} {status} tolerance {result.tolerance:g}")
    if not result.passed:
        sys.exit(1)


def main():
    """Main application entry point"""
    try:
        cli(standalone_mode=True)
    except KeyboardInterrupt:
        console.print("\nStopped by user")
        sys.exit(130)


if __name__ == "__main__":
    main()
