"""
Shared fixtures for omra-lab tests.
"""

import tempfile
from pathlib import Path
from typing import Any

import pytest
from typer.testing import CliRunner

from omra_lab.cli import app
from omra_lab.frame_io import write_sequence
from tests.fixtures.sequence_generators import (
    translating_sequence,
    write_synthetic_spec,
)


@pytest.fixture
def temp_dir():
    """Scratch directory removed after the test."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def cli_runner():
    return CliRunner()


@pytest.fixture
def small_sequence():
    """Nine 32x32 frames translating one pixel per frame."""
    return translating_sequence(32, 32, 9, vx=1.0, vy=0.0, seed=3)


@pytest.fixture
def sequence_file(temp_dir, small_sequence):
    """``small_sequence`` written as raw-planar."""
    path = temp_dir / "moving.yraw"
    write_sequence(small_sequence, path).unwrap()
    return path


class CLITestHelper:
    """Runs omra-lab subcommands inside a scratch directory."""

    def __init__(self, temp_dir: Path, cli_runner: CliRunner):
        self.temp_dir = temp_dir
        self.cli_runner = cli_runner
        self.last_result: Any | None = None

    def run_cli_command(self, *args: str | Path) -> Any:
        """
        Invoke a subcommand; paths are converted to strings.

        Args:
            args: Subcommand name followed by its flags

        Returns:
            The CliRunner result, also kept as ``last_result``
        """
        self.last_result = self.cli_runner.invoke(app, [str(a) for a in args])
        return self.last_result

    def path(self, name: str) -> Path:
        return self.temp_dir / name

    def create_spec_file(self, name: str = "spec.txt", **values) -> Path:
        """Write a synthetic sequence spec into the scratch directory."""
        return write_synthetic_spec(self.temp_dir / name, **values)

    def assert_cli_output_contains(self, result: Any, fragments: list[str]) -> None:
        for fragment in fragments:
            assert fragment in result.stdout, (
                f"Missing '{fragment}' in output:\n{result.stdout}"
            )

    def assert_cli_success(self, result: Any) -> None:
        assert result.exit_code == 0, (
            f"Exit code {result.exit_code}, output:\n{result.stdout}"
        )

    def assert_cli_failure(self, result: Any, expected_exit_code: int = 2) -> None:
        assert result.exit_code == expected_exit_code, (
            f"Exit code {result.exit_code}, expected {expected_exit_code}, "
            f"output:\n{result.stdout}"
        )


@pytest.fixture
def cli_helper(temp_dir, cli_runner):
    return CLITestHelper(temp_dir, cli_runner)
