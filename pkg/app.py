import logging
import sys

import click
from rich.console import Console
from rich.logging import RichHandler

from oracle import agreement_suite
from reports import report_emit
from scenarios import EXIT_INVALID, EXIT_OK, EXIT_VIOLATION, run

logger = logging.getLogger("frameguard")


def configure_logging(verbose: int) -> None:
    """WARNING by default, INFO with -v, DEBUG with -vv; always on stderr."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]", handlers=[handler], force=True)


def _report_options(command):
    command = click.option("--seed-override", type=click.IntRange(0, 2 ** 64 - 1), default=None,
                           help="Replace the seed of every scenario.")(command)
    command = click.option("--jobs", type=click.IntRange(min=1), default=1, envvar="FRAMEGUARD_JOBS",
                           show_default=True, help="Scenario worker threads.")(command)
    command = click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
                           help="Write the report here instead of stdout.")(command)
    command = click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text",
                           show_default=True)(command)
    command = click.argument("config", type=click.Path(dir_okay=False))(command)
    return command


def _run_and_emit(config: str, fmt: str, out: str, jobs: int, seed_override, mode: str) -> None:
    report, code = run(config, jobs=jobs, seed_override=seed_override, mode=mode)
    if report.error is not None:
        click.echo(f"error: {report.error}", err=True)
        sys.exit(code)
    try:
        rendered = report_emit(report, fmt, out, kind=mode)
    except OSError as e:
        logger.error("cannot write report: %s", e)
        sys.exit(EXIT_INVALID)
    if out is None:
        click.echo(rendered, nl=False)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output.")
def main(verbose: int):
    """frameguard: Fréchet-frame bounds and perturbation certificates."""
    configure_logging(verbose)


@main.command()
@_report_options
def bounds(config, fmt, out, jobs, seed_override):
    """Frame bounds of the original and perturbed families per grade."""
    _run_and_emit(config, fmt, out, jobs, seed_override, "bounds")


@main.command()
@_report_options
def certify(config, fmt, out, jobs, seed_override):
    """Run the requested perturbation certifiers."""
    _run_and_emit(config, fmt, out, jobs, seed_override, "certify")


@main.command("construct-norming")
@_report_options
def construct_norming(config, fmt, out, jobs, seed_override):
    """Build norming-functional frames from seeded samples and report coverage."""
    _run_and_emit(config, fmt, out, jobs, seed_override, "norming")


@main.command()
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
def selftest(seed):
    """Cross-check the singular-value path against grid suprema in dims 2 and 3."""
    report = agreement_suite(seed)
    for check in report.checks:
        status = "ok" if check.ok else "FAIL"
        click.echo(f"{status:4} {check.name:9} dim={check.dim} grade={check.grade} "
                   f"primary={check.primary:.9g} grid={check.oracle:.9g} gap={check.gap:.2e}")
    click.echo(f"{len(report.checks)} checks, {len(report.failures)} failures")
    sys.exit(EXIT_OK if report.ok else EXIT_VIOLATION)


if __name__ == "__main__":
    main()
