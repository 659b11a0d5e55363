"""Command line interface for the engine simulator."""

import argparse
from pathlib import Path
from typing import Optional

from presets import PRESETS  # type: ignore


class ArgumentParser:
    """Command line argument parser with run, validate and list-presets commands."""

    def __init__(self) -> None:
        """Initialize the argument parser with all subcommands."""
        self.parser = argparse.ArgumentParser(
            description="Simulate a spin heat engine charging an oscillator battery",
            epilog="Example: %(prog)s run --preset fig2 --out results/fig2",
        )
        self._setup_arguments()

    def _setup_arguments(self) -> None:
        """Setup all command line arguments."""
        self.parser.add_argument(
            "--verbose", "-v", action="store_true", help="Enable verbose output"
        )
        commands = self.parser.add_subparsers(dest="command", required=True)

        run = commands.add_parser("run", help="Run a preset or a config file")
        run.add_argument(
            "--preset",
            choices=sorted(PRESETS),
            help="Named experiment to reproduce",
        )
        run.add_argument(
            "--config",
            type=self.validate_file_exists,
            help="JSON config file, applied over the preset",
        )
        run.add_argument("--out", help="Output directory")
        run.add_argument("--seed", type=int, help="Seed for every stochastic stage")
        run.add_argument(
            "--jobs",
            type=self.validate_positive_int,
            help="Number of worker processes for sweeps",
        )

        validate = commands.add_parser("validate", help="Check a config file")
        validate.add_argument(
            "--config",
            type=self.validate_file_exists,
            required=True,
            help="JSON config file to check",
        )

        commands.add_parser("list-presets", help="Show the available presets")

    def validate_positive_int(self, value: str) -> int:
        """Validate that a value is an integer >= 1.

        Raises:
            argparse.ArgumentTypeError: If the value is not a positive integer
        """
        try:
            number = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"Not an integer: {value}")
        if number < 1:
            raise argparse.ArgumentTypeError(f"Must be >= 1: {value}")
        return number

    def validate_file_exists(self, file_path: str) -> str:
        """argparse type for --config: an existing, non-empty regular file.

        Raises:
            argparse.ArgumentTypeError: Naming which of the three checks failed
        """
        path = Path(file_path)
        if not path.exists():
            raise argparse.ArgumentTypeError(f"File not found: {file_path}")
        if not path.is_file():
            raise argparse.ArgumentTypeError(f"Path is not a file: {file_path}")
        if not path.stat().st_size > 0:
            raise argparse.ArgumentTypeError(f"File is empty: {file_path}")

        return file_path

    def parse_arguments(self, args: Optional[list] = None) -> argparse.Namespace:
        """Parse command line arguments.

        Args:
            args: Optional list of arguments (used for testing)

        Returns:
            Parsed arguments namespace
        """
        return self.parser.parse_args(args)
