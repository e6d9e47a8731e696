"""Command line entry point: ``kernelid simulate|identify|pipeline``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from .inverse import METHODS, IdentificationError
from .measurement import SignalFormatError
from .pipeline import ConfigError, cmd_identify, cmd_pipeline, cmd_simulate, load_config, paper_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelid",
        description="Identify a relaxation kernel from two synthetic boundary measurements.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_in=False):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", help="JSON experiment configuration")
        src.add_argument("--paper", action="store_true", help="built-in toy-experiment configuration (default)")
        p.add_argument("--method", choices=METHODS, help="identification route")
        p.add_argument("--seed", type=int, help="noise seed")
        p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        if needs_in:
            p.add_argument("--in", dest="indir", help="directory with measurement files (default: --out)")

    common(sub.add_parser("simulate", help="forward synthesis and noisy measurement files"))
    common(sub.add_parser("identify", help="reconstruct M and N from measurement files"), needs_in=True)
    pipe = sub.add_parser("pipeline", help="simulate then identify")
    common(pipe)
    pipe.add_argument("--sweep", type=int, metavar="K", help="repeat over K consecutive seeds")
    return parser


def _config_from_args(args):
    config = load_config(args.config) if args.config else paper_config()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.method is not None:
        config = replace(config, inverse=replace(config.inverse, method=args.method))
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = _config_from_args(args)
        if args.command == "simulate":
            cmd_simulate(config, args.out)
            result = {"out": args.out}
        elif args.command == "identify":
            report = cmd_identify(args.indir or args.out, config, out=args.out)
            result = {"rel_l2_M": report.rel_l2_M, "rel_l2_N": report.rel_l2_N}
        else:
            if args.sweep is not None and args.sweep < 1:
                raise ConfigError("--sweep must be at least 1")
            result = cmd_pipeline(config, args.out, sweep=args.sweep)
    except SignalFormatError as exc:
        print(f"kernelid: {exc}", file=sys.stderr)
        return EXIT_IO
    except (IdentificationError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"kernelid: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"kernelid: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"kernelid: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
