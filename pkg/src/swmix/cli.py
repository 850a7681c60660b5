"""Command line entry point: ``swmix run CONFIG [--out DIR]`` and ``swmix validate CONFIG``.

Exit codes: 0 success, 2 configuration error, 3 an operator is not a Markov
map, 4 an internal invariant or cross-check failed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .errors import DiagnosticError, NumericalError, ValidationError
from .runner import run, validate_operators

OUT_ENV = "SWMIX_OUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_INTERNAL = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swmix", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run every experiment in a config file")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, the config's output_dir, or ./swmix-out)")
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        validate_operators(cfg)
        if args.command == "validate":
            print(f"{args.config}: ok ({len(cfg.experiments)} experiments)")
            return EXIT_OK
        out = Path(args.out or os.environ.get(OUT_ENV) or cfg.output_dir or "swmix-out")
        for path in run(cfg, out):
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DiagnosticError, NumericalError) as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
