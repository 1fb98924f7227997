import argparse
import logging
import sys

import config
from src.database.operations import get_runs
from src.exceptions import ConfigError, NoiseToolkitError, ValidationFailure
from src.experiments import COMMANDS, ExperimentRunner, load_config
from src.experiments.schema import FAULTS
from utils.date_helpers import format_timestamp, parse_date

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="app.py",
        description="Predict and optimize the quantum intensity noise of light after nonlinear fiber propagation.",
    )
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for command in COMMANDS:
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", default=config.DEFAULT_CONFIG_PATH, help="experiment YAML file")
        sub.add_argument("--out", default=config.OUTPUT_DIR, help="output directory")
        sub.add_argument("--seed", type=int, help="override every seed in the config")
        sub.add_argument("--threads", type=int, default=config.DEFAULT_THREADS, help="worker processes")
        sub.add_argument("--bins", type=int, help="override sensitivity.n_bins")
        sub.add_argument("--inject-fault", choices=FAULTS,
                         help="corrupt one stage on purpose (validate only)")

    runs = subparsers.add_parser("runs", help="list recorded runs")
    runs.add_argument("--since", help='e.g. "yesterday", "3 days ago", "2024-05-01"')
    runs.add_argument("--command", dest="filter_command", choices=COMMANDS)
    return parser


def setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stdout,
    )


def list_runs(since: str = None, command: str = None) -> int:
    since_date = None
    if since:
        since_date = parse_date(since)
        if since_date is None:
            logger.error(f"Could not understand the date '{since}'")
            return EXIT_CONFIG
    runs = get_runs(since_date, command)
    if not runs:
        print("No recorded runs.")
        return EXIT_OK
    for run in runs:
        print(
            f"{run['id']:>5}  {format_timestamp(run['timestamp'])}  {run['command']:<15} "
            f"{run['status']:<18} {run['config_hash']}  {run['wall_clock_s']:8.1f} s"
        )
    return EXIT_OK


def run_command(args) -> int:
    overrides = {"seed": args.seed, "n_bins": args.bins}
    if args.inject_fault is not None:
        overrides["validate.inject_fault"] = args.inject_fault
    try:
        experiment = load_config(args.config, overrides)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG

    try:
        ExperimentRunner(experiment, args.out, args.threads).run(args.command)
    except ValidationFailure as e:
        logger.error(f"Validation failed: {e}")
        return EXIT_VALIDATION
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except NoiseToolkitError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    if args.command == "runs":
        return list_runs(args.since, args.filter_command)
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
