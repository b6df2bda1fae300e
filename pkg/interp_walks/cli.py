"""
Command-line surface for the experiment runner.

Each subcommand maps to one ExperimentSpec algorithm. A --config file
supplies the base spec; inline flags override its values.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import orjson

from .errors import WalkError
from .experiment import GENERATORS, ExperimentSpec, load_spec, run
from .logger_config import ERROR_MESSAGES, setup_logging

logger = logging.getLogger(__name__)

SUBCOMMANDS = {
    "ht": "ht",
    "search-qpe": "alg1",
    "search-qff": "alg2",
    "qsample": "qsample",
    "curve": "curve",
    "adiabatic": "adiabatic",
    "gen": "gen",
}

# flag dest -> ExperimentSpec field
OVERRIDES = {
    "generator": "generator",
    "n": "n",
    "width": "width",
    "height": "height",
    "seed": "seed",
    "path": "path",
    "marked": "marked",
    "r": "r",
    "eps": "epsilon",
    "mode": "mode",
    "schedule": "schedule",
    "track": "track",
    "q": "q",
    "r_max": "r_max",
    "curve_algorithm": "curve_algorithm",
    "ht_method": "ht_method",
    "out": "out",
    "format": "format",
    "jobs": "jobs",
}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON experiment spec to start from")
    parser.add_argument("--generator", choices=GENERATORS, help="Chain generator")
    parser.add_argument("--n", type=int, help="Number of vertices")
    parser.add_argument("--width", type=int, help="Torus width")
    parser.add_argument("--height", type=int, help="Torus height")
    parser.add_argument("--seed", type=int, help="Generator seed")
    parser.add_argument("--path", help="Chain file for the file generator")
    parser.add_argument("--marked", type=int, help="Marked vertex")
    parser.add_argument("--r", type=int, help="Number of interpolation steps")
    parser.add_argument("--eps", type=float, help="Target precision epsilon")
    parser.add_argument("--mode", help="filter | explicit | explicit-literal")
    parser.add_argument("--schedule", choices=("auto", "equal-angle", "stationary"), help="Interpolation schedule")
    parser.add_argument("--track", choices=("auto", "all", "live"), help="Flag tracking for fast-forwarding runs")
    parser.add_argument("--q", type=float, help="Overlap target for the adiabatic sequence")
    parser.add_argument("--r-max", dest="r_max", type=int, help="Largest r on a success curve")
    parser.add_argument("--curve-algorithm", dest="curve_algorithm", choices=("alg1", "alg2"),
                        help="Search driver swept by curve")
    parser.add_argument("--ht-method", dest="ht_method", choices=("spectral", "classical", "max"),
                        help="Hitting-time evaluation for ht")
    parser.add_argument("--out", help="Result file path")
    parser.add_argument("--format", choices=("json", "csv"), help="Result format")
    parser.add_argument("--jobs", type=int, help="Worker threads for sweeps")
    parser.add_argument("--log-level", default="INFO", help="Logging level")
    parser.add_argument("--log-file", help="Also log to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walk_experiment",
        description="Exact simulation of interpolated quantum-walk search",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _common(sub.add_parser(name, help=f"Run the {name} experiment"))
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    base = load_spec(args.config) if args.config else ExperimentSpec()
    overrides: Dict[str, Any] = {field: getattr(args, dest) for dest, field in OVERRIDES.items()}
    overrides["algorithm"] = SUBCOMMANDS[args.command]
    return base.merged(overrides)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(getattr(logging, str(args.log_level).upper(), logging.INFO), args.log_file)
    try:
        spec = spec_from_args(args)
    except WalkError as exc:
        logger.error(ERROR_MESSAGES['config_error'].format(exc.message))
        sys.stderr.write(orjson.dumps(exc.to_record()).decode("utf-8") + "\n")
        return exc.exit_code
    return run(spec)
