"""covar command line: run, validate and sweep experiment configs.

Usage::

    covar validate experiments/recompilation.yaml
    covar run experiments/recompilation.yaml --threads 4 --out-dir out/r1
    covar sweep experiments/nc_sweep.yaml --seed-offset 100
    covar run experiments/recompilation_shadows.yaml --audit

Exit codes: 0 on success, 2 for an invalid config (nothing is written),
1 when a simulation fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from covar import __version__
from covar.errors import ConfigError, CovarError
from covar.runner.config import ExperimentConfig, load_config
from covar.runner.experiments import run_experiment, run_sweep
from covar.runner.formatter import format_result

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covar",
        description="Covariance root finding on simulated variational circuits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run every seed of an experiment config"),
        ("validate", "check a config without simulating anything"),
        ("sweep", "run the config once per sweep point"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="YAML experiment config")
        cmd.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
        cmd.add_argument("--out-dir", default=None, help="overrides output_dir")
        cmd.add_argument("--threads", type=int, default=1, help="seeds run in parallel")
        cmd.add_argument("--audit", action="store_true", help="also write each seed's pool, system and shadows")
        cmd.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load(args: argparse.Namespace) -> ExperimentConfig:
    if args.threads < 1:
        raise ConfigError(f"--threads must be ≥ 1, got {args.threads}")
    config = load_config(args.config)
    if args.seed_offset:
        config = config.with_seed_offset(args.seed_offset)
    if args.out_dir is not None:
        config = config.with_output_dir(args.out_dir)
    if args.audit:
        config = config.with_audit()
    return config


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        config = _load(args)
        if args.command == "sweep" and config.sweep is None:
            raise ConfigError("sweep needs a 'sweep' section")
    except ConfigError as exc:
        print(format_result(False, f"invalid config: {exc}", "covar validate <config>"), file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(format_result(True, f"{args.config}: {config.task.kind} with {len(config.seeds)} seed(s)"))
        return EXIT_OK

    try:
        if config.sweep is not None:
            rows = run_sweep(config, args.threads)
            print(format_result(True, f"sweep of {len(rows)} point(s) written to {config.output_dir}"))
        else:
            summary = run_experiment(config, args.threads)
            print(format_result(True, f"{len(summary.rows)} seed(s) written to {config.output_dir}"))
    except (CovarError, ValueError, ArithmeticError) as exc:
        logger.error("simulation failed: %s", exc)
        print(format_result(False, f"simulation failed: {exc}"), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
