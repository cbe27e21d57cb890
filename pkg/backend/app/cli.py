import logging
import os
from typing import List, Literal, Optional

import click
from pydantic import Field, ValidationError

from app.core.config import settings
from app.core.errors import InputValidationError, SmaleError
from app.dynamics.utils import load_code_file, load_graph_file, load_point_file
from app.experiments.experiment_manager import ExperimentInputs, ExperimentManager, ExperimentParams
from app.experiments.reports import emit_report

# Set up logging
logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))
logger = logging.getLogger(__name__)

experiment_manager = ExperimentManager()


class ExperimentConfig(ExperimentParams):
    """A fully resolved command line: command, input files, parameters, output."""
    command: str
    graph: Optional[str] = None
    x: List[str] = Field(default_factory=list)
    y: List[str] = Field(default_factory=list)
    code: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    output: Optional[str] = None


def _load_inputs(config: ExperimentConfig) -> ExperimentInputs:
    code = load_code_file(config.code) if config.code else None
    graph = load_graph_file(config.graph) if config.graph else None
    base = graph if graph is not None else (code.codomain if code is not None else None)
    if base is None and (config.x or config.y):
        raise InputValidationError("Points need --graph or --code")
    return ExperimentInputs(
        graph=graph,
        xs=[load_point_file(base, path) for path in config.x],
        ys=[load_point_file(base, path) for path in config.y],
        code=code,
    )


def _env_cap(config: ExperimentConfig) -> ExperimentConfig:
    raw = os.getenv("SMALE_CAP")
    if config.cap is not None or not raw:
        return config
    try:
        cap = int(raw)
    except ValueError:
        raise InputValidationError(f"SMALE_CAP must be a nonnegative integer, got {raw!r}")
    if cap < 0:
        raise InputValidationError(f"SMALE_CAP must be a nonnegative integer, got {raw!r}")
    return config.model_copy(update={"cap": cap})


def _write_output(path: str, data: bytes):
    try:
        with open(path, "wb") as handle:
            handle.write(data)
    except OSError as e:
        raise InputValidationError(f"Cannot write report to {path}: {e}")
    logger.info(f"Report written to {path}")


def run_experiment(config: ExperimentConfig) -> int:
    """
    Run one experiment and write its report.

    Returns:
    - exit status: 0 success, 2 validation error, 3 cap exceeded, 4 undefined measure
    """
    try:
        config = _env_cap(config)
        inputs = _load_inputs(config)
        report = experiment_manager.run(config.command, inputs, config)
        data = emit_report(report, config.format, config.model_dump(mode="json"))
        if config.output:
            _write_output(config.output, data)
    except SmaleError as e:
        logger.error(f"{config.command} failed: {e.message}")
        click.echo(f"error: {e.message}", err=True)
        return e.exit_code
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        return 2

    if not config.output:
        click.echo(data.decode("utf-8"), nl=False)
    return 0


def experiment_options(func):
    options = [
        click.option("--graph", type=click.Path(), help="Graph JSON file."),
        click.option("--x", "x", multiple=True, type=click.Path(), help="Base point of an unstable ray (repeatable)."),
        click.option("--y", "y", multiple=True, type=click.Path(), help="Base point of a stable ray (repeatable)."),
        click.option("-n", "n", multiple=True, type=int, help="Unstable ray parameter (repeatable)."),
        click.option("-m", "m", multiple=True, type=int, help="Stable ray parameter (repeatable)."),
        click.option("-k", "k", type=int, help="Time parameter k."),
        click.option("--k-max", type=int, default=30, show_default=True),
        click.option("--l-max", type=int, default=2, show_default=True, help="Largest cylinder halfwidth."),
        click.option("--period-bound", "-P", type=int, help="Period bound for periodic points."),
        click.option("--cap", type=int, help="Enumeration cap (default SMALE_CAP or 1000000)."),
        click.option("--word", help="Comma separated cylinder word, e.g. a,a."),
        click.option("--code", type=click.Path(), help="One-block code JSON file."),
        click.option("--list-paths", is_flag=True, help="List the middle paths of h^k."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True),
        click.option("--output", "-o", type=click.Path(), help="Report file (default stdout)."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _make_command(name: str, help_text: str):
    @cli.command(name=name, help=help_text)
    @experiment_options
    @click.pass_context
    def command(ctx, graph, x, y, n, m, k, k_max, l_max, period_bound, cap, word, code, list_paths, fmt, output):
        try:
            config = ExperimentConfig(
                command=name,
                graph=graph,
                x=list(x),
                y=list(y),
                n=list(n) or [0],
                m=list(m) or [0],
                k=k,
                k_max=k_max,
                l_max=l_max,
                period_bound=period_bound,
                cap=cap,
                word=word.split(",") if word else None,
                code=code,
                list_paths=list_paths,
                format=fmt,
                output=output,
            )
        except ValidationError as e:
            click.echo(f"error: {e}", err=True)
            ctx.exit(2)
        ctx.exit(run_experiment(config))

    return command


@click.group()
def cli():
    """Bowen measure experiments for shifts of finite type."""


COMMANDS = {
    "analyze": "Irreducibility, period, cyclic classes and entropy of a graph.",
    "perron": "Perron eigenvalue and eigenvectors.",
    "parry": "Parry masses of centered cylinders, with product and conformality checks for --x/--y.",
    "hetero-count": "Exact #h^k, or the middle paths with --list-paths.",
    "hetero-series": "Scaled counts and entropy estimates for k up to --k-max.",
    "weak-star": "Empirical measure of h^k against the Parry measure on cylinders.",
    "irreducible-series": "Growth series for the union of the I pieces of an irreducible graph.",
    "periodic": "Periodic-point measure against the Parry measure.",
    "compare": "Periodic, heteroclinic and Parry masses side by side.",
    "code-check": "Resolving type and fiber probe of a one-block code.",
    "pushforward": "Pushforward of Parry and ray measures through a one-block code.",
}

for _name, _help in COMMANDS.items():
    _make_command(_name, _help)


if __name__ == "__main__":
    cli()
