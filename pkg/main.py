import logging
import sys
from typing import Any, Optional
import click
import structlog
from result import Ok, Err

from app.qtel import slog
from app.qtel.cli.commands import COMMANDS
from app.qtel.cli.config import load_config
from app.qtel.cli.output import dumps, ensure_out
from app.qtel.errors import (ConfigError, ContractViolation, NumericalError,
                             OverdampedRegimeError)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_REGIME = 2
EXIT_NUMERICAL = 3


def configure_logging(level: str) -> None:
    # no timestamps: reruns must produce identical output
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def run_command(name: str, config_path: str, out: str,
                **overrides: Any) -> int:
    log = slog().bind(command=name)
    match load_config(config_path):
        case Err(e):
            click.echo(f"config error: {e}", err=True)
            return EXIT_CONFIG
        case Ok(config):
            pass
    try:
        config = config.with_overrides(**overrides)
        out_dir = ensure_out(out)
    except ValueError as e:
        click.echo(f"config error: {e}", err=True)
        return EXIT_CONFIG
    try:
        report = COMMANDS[name](config, out_dir)
    except OverdampedRegimeError as e:
        click.echo(f"regime error: {e}", err=True)
        return EXIT_REGIME
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        return EXIT_CONFIG
    # LinAlgError and scipy root-finder failures are ValueErrors too
    except (NumericalError, ContractViolation, ValueError) as e:
        log.error("numerical failure", error=str(e))
        click.echo(f"numerical failure: {e}", err=True)
        return EXIT_NUMERICAL
    report.write(out_dir)
    click.echo(dumps(report.document()).decode("utf-8"))
    log.info("done", exit_code=report.exit_code, warnings=len(report.warnings))
    return report.exit_code


def common_options(f):
    options = [
        click.option("--config", "config_path", required=True,
                     type=click.Path(dir_okay=False),
                     help="JSON run configuration"),
        click.option("--td-us", type=float, default=None,
                     help="Detection window t_D in μs"),
        click.option("--eta", type=click.FloatRange(0.0, 1.0), default=None,
                     help="Detector efficiency"),
        click.option("--trajectories", type=click.IntRange(min=1), default=None,
                     help="Monte-Carlo trajectory count"),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                     help="Master seed"),
        click.option("--workers", type=click.IntRange(min=1), default=None,
                     help="Worker threads for trajectory ensembles"),
        click.option("--out", default="out", show_default=True,
                     help="Output directory"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _dispatch(name: str, config_path: str, out: str, td_us: Optional[float],
              eta: Optional[float], trajectories: Optional[int],
              seed: Optional[int], workers: Optional[int]) -> None:
    sys.exit(
        run_command(name,
                    config_path,
                    out,
                    t_d_us=td_us,
                    eta=eta,
                    trajectories=trajectories,
                    seed=seed,
                    workers=workers))


@click.group()
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]),
              help="Log level (logs go to stderr)")
def qtel(log_level: str):
    """
    Cavity-decay atomic teleportation simulator
    """
    configure_logging(log_level)


@qtel.command()
@common_options
def validate(**kw):
    """Check the parameter regime and print derived timings"""
    _dispatch("validate", **kw)


@qtel.command()
@common_options
def teleport(**kw):
    """Monte-Carlo run of the full teleportation protocol"""
    _dispatch("teleport", **kw)


@qtel.command()
@common_options
def fig3(**kw):
    """Haar-average fidelity against the detection window"""
    _dispatch("fig3", **kw)


@qtel.command()
@common_options
def efficiency(**kw):
    """Success probability and fidelity against detector efficiency"""
    _dispatch("efficiency", **kw)


@qtel.command()
@common_options
def entangle(**kw):
    """Heralded atom-atom entanglement and its relative entropy"""
    _dispatch("entangle", **kw)


@qtel.command()
@common_options
def insurance(**kw):
    """Recovery of the input from the reserve atom after a failure"""
    _dispatch("insurance", **kw)


if __name__ == "__main__":
    qtel()  # pylint: disable=no-value-for-parameter
