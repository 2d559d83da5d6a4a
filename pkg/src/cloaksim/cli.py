"""Command line: ``cloaksim run|validate|schema``. Exit codes: 0 ok, 2 config error, 3 solver error."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .config import ConfigError, load_config, schema_json
from .experiments import ExperimentFailure, run_experiment
from .gridsolver import SolverError
from .heatmap import emit_heatmap

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

__all__ = ["main", "emit_heatmap", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER"]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cloaksim", description="Cloaking-by-complementary-media experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run the experiment described by a config file")
    r.add_argument("config")
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "schema":
        print(schema_json())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.verb == "validate":
        print(f"{args.config}: ok ({cfg.experiment}, config-hash={cfg.config_hash})")
        return EXIT_OK
    try:
        summary, files = run_experiment(cfg)
    except (ExperimentFailure, SolverError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        print(f"partial outputs in {cfg.output} (see PARTIAL)", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{cfg.experiment}: wrote {len(files) + 1} files to {cfg.output}")
    for k, v in summary.items():
        print(f"  {k} = {v}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
