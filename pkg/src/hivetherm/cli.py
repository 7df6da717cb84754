"""Command line: ``hivetherm {simulate,fit,segment,forecast,evaluate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import HiveThermError
from .pipeline import COMMANDS, load_config, run_pipeline, write_json


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hivetherm", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--input", nargs="+", default=[], metavar="PATH", help="sensor CSV file(s)")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--hive", nargs="+", metavar="ID", help="only process these hives")
    p.add_argument("--seed", type=int, help="base seed for simulate")
    p.add_argument("--no-plots", action="store_true", help="skip SVG plots")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = None
    try:
        config = load_config(args.config)
        index = run_pipeline(args.command, config, args.input, args.out, args.hive,
                             args.seed, not args.no_plots)
    except (HiveThermError, ValueError, OSError, KeyError, TypeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command,
               "config_hash": config.config_hash() if config else None}
        print(json.dumps(err), file=sys.stderr)
        out = args.out or (config.output_dir if config else None)
        if out:
            try:
                Path(out).mkdir(parents=True, exist_ok=True)
                write_json(Path(out) / "error.json", err)
            except OSError:
                pass
        return 1
    print(json.dumps(index))
    return 0


if __name__ == "__main__":
    sys.exit(main())
