"""Argument parsing and exit-code mapping for the ``tabcds`` command."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from tabcds import __version__
from tabcds.cli.commands import (
    EXIT_CONFIG,
    EXIT_RUNTIME,
    cmd_analyze,
    cmd_evaluate,
    cmd_generate_data,
    cmd_sweep,
    cmd_train,
)
from tabcds.cli.config import load_experiment_config
from tabcds.errors import ConfigError, TabCdsError
from tabcds.utils.notification_manager import NotificationManager, logging_listener

logger = logging.getLogger("tabcds")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabcds", description="Conservative data sharing on tabular multi-task MDPs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate-data", help="build the scenario MDP and per-task datasets")
    generate.add_argument("--config", required=True, type=Path)
    generate.add_argument("--seed", type=int)
    generate.add_argument("--out", required=True, type=Path)

    train = sub.add_parser("train", help="train one sharing strategy")
    train.add_argument("--config", required=True, type=Path)
    train.add_argument("--strategy", required=True,
                       help="NoShare, ShareAll, Skill, Hipi, CdsBasic, CdsQuantile[:k] or CdsWeighted[:k]")
    train.add_argument("--seed", type=int)
    train.add_argument("--data", type=Path, help="directory written by generate-data; generated in memory if absent")
    train.add_argument("--out", required=True, type=Path)

    evaluate = sub.add_parser("evaluate", help="exact returns of a trained policy")
    evaluate.add_argument("run", type=Path)

    analyze = sub.add_parser("analyze", help="compare runs and compute their improvement bounds")
    analyze.add_argument("runs", nargs="+", type=Path)
    analyze.add_argument("--out", required=True, type=Path)

    sweep = sub.add_parser("sweep", help="every (seed, strategy) cell, aggregated")
    sweep.add_argument("--config", required=True, type=Path)
    sweep.add_argument("--seed", type=_int_list, help="seed list overriding evaluation/seeds")
    sweep.add_argument("--strategy", action="append", help="repeatable; overrides sharing/strategies")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out", required=True, type=Path)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stdout, level=level, format="%(levelname)s %(name)s: %(message)s")
    NotificationManager.addListener(logging_listener)


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "evaluate":
        return cmd_evaluate(args.run)
    if args.command == "analyze":
        return cmd_analyze(args.runs, args.out)
    config = load_experiment_config(args.config)
    if args.command == "sweep":
        return cmd_sweep(config, args.out, seeds=args.seed, strategies=args.strategy, jobs=args.jobs)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.command == "generate-data":
        return cmd_generate_data(config, args.out)
    return cmd_train(config, args.strategy, args.out, data_dir=args.data)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except TabCdsError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME
    except Exception:
        logger.exception("unexpected failure in %s", args.command)
        return EXIT_RUNTIME
    finally:
        NotificationManager.removeListener(logging_listener)
