"""Command line entry point for the fkcheb analysis tools."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional

import click

from .config import AnalysisConfig, InvalidConfiguration
from .deviation import minimum_grid_for
from .pipelines.analysis_pipeline import AnalysisPipeline, AnalysisReport, write_artifacts
from .problem import Mode, ProblemSpec, ProblemValidationError, bundled_problem, load_problem
from .targets import TargetError

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FAILURE = 3

INPUT_ERRORS = (ProblemValidationError, TargetError, InvalidConfiguration, OSError)


@click.group()
def cli() -> None:
    """Entrypoint for the fkcheb command line interface."""


@cli.command("run")
@click.option("--problem", "problem_ref", required=True, help="Problem JSON file or the name of a bundled problem.")
@click.option("--mode", type=click.Choice([mode.value for mode in Mode]), help="Override the problem's mode.")
@click.option("--grid", "grid_n", type=int, help="Uniform grid size used to locate extreme points.")
@click.option("--out", "output_dir", type=click.Path(file_okay=False, path_type=Path), help="Output directory (defaults to $FKCHEB_OUT).")
@click.option("--tol-extreme", type=float, help="Band below Psi within which points count as extreme.")
@click.option("--hull-tol", type=float, help="Residual accepted by the convex-hull test.")
@click.option("--tau-zero", type=float, help="Threshold below which a_lm counts as zero.")
@click.option("--json", "as_json", is_flag=True, help="Print the report summary as JSON.")
@click.option("--verbose", is_flag=True, help="Log numerical progress at DEBUG level.")
@click.pass_context
def run_command(
    ctx: click.Context,
    problem_ref: str,
    mode: Optional[str],
    grid_n: Optional[int],
    output_dir: Optional[Path],
    tol_extreme: Optional[float],
    hull_tol: Optional[float],
    tau_zero: Optional[float],
    as_json: bool,
    verbose: bool,
) -> None:
    """Analyse or fit the problem in *PROBLEM* and write report.json, deviation.csv and extremes.csv."""

    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        spec = _load(problem_ref)
        if mode is not None:
            spec = spec.with_mode(Mode(mode))
        config = (
            AnalysisConfig.from_env()
            .with_overrides(
                grid_n=spec.grid_n,
                breakpoint_grid=spec.breakpoint_grid,
                tau_zero=spec.tau_zero,
                tol_extreme=spec.tol_extreme,
                hull_tol=spec.hull_tol,
            )
            .with_overrides(
                output_dir=output_dir,
                grid_n=grid_n,
                tau_zero=tau_zero,
                tol_extreme=tol_extreme,
                hull_tol=hull_tol,
            )
        )
        _check_grid(config, spec)
    except INPUT_ERRORS as exc:
        _emit_input_error(exc)
        ctx.exit(EXIT_INPUT)
        return

    report = AnalysisPipeline(config).run(spec)
    try:
        write_artifacts(report, spec, config.output_dir, config.grid_n)
    except OSError as exc:
        LOGGER.error("Cannot write artifacts to %s: %s", config.output_dir, exc)
        _emit_input_error(exc)
        ctx.exit(EXIT_INPUT)
        return

    _emit_report(report, as_json=as_json)
    ctx.exit(EXIT_OK if report.succeeded else EXIT_FAILURE)


@cli.command("validate")
@click.argument("problem_ref")
@click.pass_context
def validate_command(ctx: click.Context, problem_ref: str) -> None:
    """Check that *PROBLEM_REF* follows the problem schema and print its summary."""

    try:
        spec = _load(problem_ref)
    except INPUT_ERRORS as exc:
        _emit_input_error(exc)
        ctx.exit(EXIT_INPUT)
        return
    click.echo(f"Problem '{spec.name}' is valid:")
    for key, value in spec.summary().items():
        click.echo(f"  - {key}: {value}")


def _load(problem_ref: str) -> ProblemSpec:
    path = Path(problem_ref).expanduser()
    if not path.exists() and not path.suffix:
        path = bundled_problem(problem_ref)
    return load_problem(path)


def _check_grid(config: AnalysisConfig, spec: ProblemSpec) -> None:
    floor = minimum_grid_for(spec.degree, spec.pieces)
    if config.grid_n is not None and config.grid_n < floor:
        raise InvalidConfiguration(
            f"Grid size {config.grid_n} is below the minimum {floor} for degree {spec.degree} with {spec.pieces} pieces"
        )


def _emit_input_error(exc: BaseException) -> None:
    messages = exc.errors if isinstance(exc, ProblemValidationError) else [str(exc)]
    for message in messages:
        click.echo(f"error: {message}", err=True)


def _emit_report(report: AnalysisReport, *, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(report.as_dict(), ensure_ascii=False, indent=2))
    else:
        click.echo("Analysis finished:")
        for key, value in report.as_dict().items():
            click.echo(f"  - {key}: {value}")
        for message in report.errors:
            click.echo(f"  ! {message}")


if __name__ == "__main__":  # pragma: no cover - entry point
    cli()
