#!/usr/bin/env python3
"""
Quantum Otto Engine Simulator

Simulates a driven spin engine that charges an oscillator battery over
repeated Otto cycles, with optional counterdiabatic driving, heating and
sideband thermometry, and writes plot-ready data files.

Usage:
    python src/main.py run --preset fig2 --out results/fig2
    python src/main.py validate --config my_run.json
    python src/main.py list-presets

"""

import json
import sys
from typing import Any, Dict, List, Optional

from arg_parser import ArgumentParser  # type: ignore
from config import build_config, load_document, validate  # type: ignore
from errors import (  # type: ignore
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_RUNTIME,
    ConfigError,
    NumericalError,
)
from logging_config import setup_logging  # type: ignore
from presets import list_presets  # type: ignore
from runner import run  # type: ignore


def _report(error: Dict[str, Any]) -> None:
    print(json.dumps(error, sort_keys=True), file=sys.stderr)


def _run(args: Any) -> int:
    if args.preset is None and args.config is None:
        raise ConfigError("run needs --preset or --config")
    document = load_document(args.config) if args.config else {}
    overrides: Dict[str, Any] = {}
    if args.out is not None:
        overrides["output"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs

    config = build_config(document, preset=args.preset, overrides=overrides)
    for path in run(config):
        print(path)
    return EXIT_OK


def _validate(args: Any) -> int:
    diagnostics = validate(load_document(args.config))
    for diagnostic in diagnostics:
        print(diagnostic)
    errors = [d for d in diagnostics if d.level == "error"]
    if errors:
        first = errors[0]
        _report({"error": "config", "message": first.message, "field": first.field})
        return EXIT_CONFIG
    if not diagnostics:
        print("OK")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI application.

    Returns:
        Exit code (0 success, 1 runtime error, 2 config or usage error,
        3 numerical failure)
    """
    try:
        argument_parser = ArgumentParser()
        args = argument_parser.parse_arguments(argv)

        # Setup global logging configuration early
        setup_logging(args.verbose)

        if args.command == "list-presets":
            for line in list_presets():
                print(line)
            return EXIT_OK
        if args.command == "validate":
            return _validate(args)
        return _run(args)

    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        _report(e.to_record())
        return EXIT_CONFIG
    except NumericalError as e:
        _report(e.to_record())
        return EXIT_NUMERICAL
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
