#!/usr/bin/env python3
"""
Command-line entry point for the weight toolkit

    python run.py classify --example segment-pair
    python run.py suite --family power-alpha1 --scales 101,201
"""

import sys
import argparse
import logging
from typing import List, Optional

from modules import __version__
from modules.analysis_runner import COMMANDS, AnalysisRunner, RunConfig
from modules.settings_manager import SettingsManager
from modules.space_builder import list_examples
from modules.utils import ErrorHandler, setup_logging

logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run.py",
        description="Weights on finite metric measure spaces: A_p / A_inf constants, "
                    "quasi-distance metrization, mollification and curve modulus",
        epilog=f"examples: {', '.join(list_examples())}",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", metavar="PATH", help="space file (mmspace-1 JSON)")
    parser.add_argument("--example", metavar="NAME", help="built-in example space and weight")
    parser.add_argument("--family", metavar="NAME", help="example family refined by --scales (suite)")
    parser.add_argument("--p-grid", type=_float_list, metavar="LIST", help="exponents p >= 1")
    parser.add_argument("--eps-grid", type=_float_list, metavar="LIST", help="ε values")
    parser.add_argument("--t-grid", type=_float_list, metavar="LIST", help="mollifier scales t")
    parser.add_argument("--r", type=float, metavar="VALUE", help="inner radius for the modulus command")
    parser.add_argument("--p", type=float, default=1.0, metavar="VALUE", help="modulus exponent (default 1)")
    parser.add_argument("--x0", type=int, metavar="ID", help="center point id (default: the space origin)")
    parser.add_argument("--tol", type=float, metavar="VALUE", help="tolerance override")
    parser.add_argument("--restricted-chains", action="store_true", help="also metrize with chains kept in B(x, 2d)")
    parser.add_argument("--open-balls", action="store_true", help="also report doubling with open balls")
    parser.add_argument("--scales", type=_int_list, metavar="LIST", help="points per axis, one per scale")
    parser.add_argument("--out", metavar="PATH", help="report path (directory for the examples command)")
    parser.add_argument("--seed", type=int, help="seed for random example weights")
    parser.add_argument("--config", metavar="PATH", help="config file (default config.json)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Hàm chính: parse tham số, chạy một lệnh và trả về exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0

    settings = SettingsManager(args.config) if args.config else SettingsManager()
    log_settings = settings.get_section("logging")
    setup_logging(args.log_level or log_settings.get("level", "INFO"), log_settings.get("file", "logs/app.log"))

    config = RunConfig(
        command=args.command, input=args.input, example=args.example, family=args.family,
        p_grid=args.p_grid, eps_grid=args.eps_grid, t_grid=args.t_grid, r=args.r, tol=args.tol, p=args.p,
        x0=args.x0, restricted_chains=args.restricted_chains, open_balls=args.open_balls,
        scales=args.scales, out=args.out, seed=args.seed,
    )
    try:
        outcome = AnalysisRunner(settings).run(config)
    except Exception as e:
        ErrorHandler.log_error(e, config.command)
        print(ErrorHandler.describe(e), file=sys.stderr)
        return ErrorHandler.exit_code(e)

    for path in outcome.written:
        print(path)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
