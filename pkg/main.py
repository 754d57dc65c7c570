#!/usr/bin/env python3
"""
skewdrift

Main entry point for the skewdrift experiment harness.
"""

import argparse
import sys

from skewdrift.cli.runner import run
from skewdrift.config.settings import SUBCOMMANDS


def build_parser() -> argparse.ArgumentParser:
    """Build the command-line parser."""
    parser = argparse.ArgumentParser(
        prog="skewdrift",
        description="Numerical experiments for elliptic equations with skew-symmetric drifts.",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", required=True, help="experiment file (key = value with [section] headers)")
        sub.add_argument("--out", help="output directory for reports and CSV files")
        sub.add_argument("--threads", type=int, help="worker threads")
        sub.add_argument("--seed", type=int, help="seed of the random test functions")
        if name == "zhikov":
            sub.add_argument("--resolution", type=int, help="cells per axis of the ball mesh")
            sub.add_argument("--rho", type=float, help="excision radius in (0, 0.1]")
            sub.add_argument("--schedule", help="comma separated truncation levels")
    return parser


def main(argv=None) -> int:
    """Parse arguments, run the experiment and return its exit code."""
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.subcommand == "zhikov":
        overrides = {
            ("zhikov", "resolution"): args.resolution,
            ("zhikov", "rho"): args.rho,
            ("zhikov", "schedule"): args.schedule,
        }
    return run(args.subcommand, args.config, args.out, args.threads, args.seed, overrides)


if __name__ == "__main__":
    sys.exit(main())
