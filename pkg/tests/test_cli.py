"""Tests for the CLI module."""

import json
import pytest
import tempfile
import sys
from pathlib import Path

# Add src to path for imports
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from arg_parser import ArgumentParser  # noqa: E402 # type: ignore
from main import main  # noqa: E402 # type: ignore


class TestArgumentParsing:
    """Test argument parsing functionality."""

    def setup_method(self):
        """Setup method to create parser instance for each test."""
        self.parser = ArgumentParser()

    def create_config_file(self, document=None) -> str:
        """Create a JSON config file for argument parsing tests."""
        temp_file = tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False)
        json.dump(document or {"preset": "fig2"}, temp_file)
        temp_file.close()
        return temp_file.name

    def test_parse_run_with_preset(self):
        """Test parsing a preset run."""
        args = self.parser.parse_arguments(
            ["run", "--preset", "fig2", "--out", "results/fig2", "--seed", "4"]
        )

        assert args.command == "run"
        assert args.preset == "fig2"
        assert args.out == "results/fig2"
        assert args.seed == 4
        assert args.jobs is None
        assert args.verbose is False

    def test_parse_run_with_config(self):
        """Test parsing a run from a config file with verbose output."""
        filename = self.create_config_file()

        try:
            args = self.parser.parse_arguments(
                ["--verbose", "run", "--config", filename, "--jobs", "2"]
            )

            assert args.config == filename
            assert args.jobs == 2
            assert args.verbose is True
        finally:
            Path(filename).unlink()

    def test_parse_validate(self):
        """Test parsing the validate command."""
        filename = self.create_config_file()

        try:
            args = self.parser.parse_arguments(["validate", "--config", filename])

            assert args.command == "validate"
            assert args.config == filename
        finally:
            Path(filename).unlink()

    def test_parse_list_presets(self):
        args = self.parser.parse_arguments(["list-presets"])

        assert args.command == "list-presets"

    def test_unknown_preset(self):
        """Test that presets are limited to the registry."""
        with pytest.raises(SystemExit):
            self.parser.parse_arguments(["run", "--preset", "fig9"])

    def test_jobs_must_be_positive(self):
        with pytest.raises(SystemExit):
            self.parser.parse_arguments(["run", "--preset", "fig2", "--jobs", "0"])

    def test_missing_config_file(self):
        with pytest.raises(SystemExit):
            self.parser.parse_arguments(["validate", "--config", "nonexistent.json"])

    def test_missing_command(self):
        with pytest.raises(SystemExit):
            self.parser.parse_arguments([])

    def test_validate_positive_int(self):
        assert self.parser.validate_positive_int("3") == 3


class TestMain:
    """Test the main entry point in-process."""

    def test_list_presets(self, capsys):
        assert main(["list-presets"]) == 0

        output = capsys.readouterr().out
        assert "fig2:" in output
        assert "rwa-check:" in output

    def test_run_needs_preset_or_config(self, capsys):
        assert main(["run"]) == 2

        error = json.loads(capsys.readouterr().err)
        assert error["error"] == "config"

    def test_validate_reports_bare_frequency(self, capsys):
        document = {"preset": "fig2", "engine": {"Omega": 1.0}}
        temp_file = tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False)
        json.dump(document, temp_file)
        temp_file.close()

        try:
            assert main(["validate", "--config", temp_file.name]) == 2
        finally:
            Path(temp_file.name).unlink()

        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["field"] == "engine.Omega"
