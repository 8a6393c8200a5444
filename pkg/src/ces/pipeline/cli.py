"""Command-line entry point.

Subcommands: calibrate, emulate, sample, run, darcy-uq, plus `preset` to dump
a bundled experiment preset. Exit codes: 0 success, 2 invalid configuration,
3 numerical failure, 4 I/O failure. The CES_LOG environment variable sets the
log level (DEBUG/INFO/WARNING/ERROR).
"""

import json
import logging
import os
import sys

import click
import numpy as np

from ces.emulation.gp import GpFitError
from ces.models.base import ModelError
from ces.pipeline import runner
from ces.pipeline.config import PRESET_NAMES, ConfigError, load_config, load_preset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

log = logging.getLogger(__name__)


def _setup_logging() -> None:
    level = os.environ.get("CES_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(config_path: str, seed, out):
    config = load_config(config_path)
    if seed is not None:
        config["seed"] = int(seed)
    if out is not None:
        config["output_dir"] = out
    return config


def _execute(action) -> None:
    try:
        action()
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (ModelError, GpFitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except OSError as exc:
        click.echo(f"I/O failure: {exc}", err=True)
        sys.exit(EXIT_IO)
    sys.exit(EXIT_OK)


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      help="Path to the JSON configuration file.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the configured master seed.")(fn)
    fn = click.option("--out", default=None,
                      help="Override the configured output directory.")(fn)
    return fn


@click.group()
def main() -> None:
    """Calibrate-emulate-sample pipeline for Bayesian inversion."""
    _setup_logging()


@main.command()
@_common_options
@click.option("--workers", type=int, default=1,
              help="Concurrent forward evaluations within an iteration.")
def calibrate(config_path, seed, out, workers):
    """Run ensemble Kalman calibration and write snapshots."""
    _execute(lambda: runner.cmd_calibrate(_load(config_path, seed, out),
                                          workers=workers))


@main.command()
@_common_options
def emulate(config_path, seed, out):
    """Train the GP emulator on stored calibration snapshots."""
    _execute(lambda: runner.cmd_emulate(_load(config_path, seed, out)))


@main.command()
@_common_options
@click.option("--burn-in", type=int, default=0,
              help="Samples discarded before computing diagnostics.")
def sample(config_path, seed, out, burn_in):
    """Run random-walk Metropolis chains against the stored emulator."""
    _execute(lambda: runner.cmd_sample(_load(config_path, seed, out),
                                       burn_in=burn_in))


@main.command()
@_common_options
@click.option("--workers", type=int, default=1,
              help="Concurrent forward evaluations within an iteration.")
@click.option("--burn-in", type=int, default=0,
              help="Samples discarded before computing diagnostics.")
def run(config_path, seed, out, workers, burn_in):
    """Calibrate, emulate, and sample in sequence."""
    _execute(lambda: runner.cmd_run(_load(config_path, seed, out),
                                    workers=workers, burn_in=burn_in))


@main.command("darcy-uq")
@_common_options
@click.option("--burn-in", type=int, default=0,
              help="Chain samples discarded before drawing UQ parameters.")
def darcy_uq(config_path, seed, out, burn_in):
    """Forward-UQ exceedance counts from a stored Darcy chain."""
    _execute(lambda: runner.cmd_darcy_uq(_load(config_path, seed, out),
                                         burn_in=burn_in))


@main.command()
@click.argument("name", type=click.Choice(PRESET_NAMES))
def preset(name):
    """Print a bundled experiment preset as JSON."""
    _execute(lambda: click.echo(json.dumps(load_preset(name), indent=2)))


if __name__ == "__main__":
    main()
