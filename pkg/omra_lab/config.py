"""
Line-based ``key=value`` configuration files.

Used for ``--config`` files, raw-planar sidecar headers and synthetic
sequence specs. Keys are normalized to lowercase with underscores, so
``q-step`` and ``q_step`` address the same setting.
"""

from collections.abc import Mapping
from pathlib import Path
from typing import TypeVar

import chardet
from returns.result import Failure, Result, Success

T = TypeVar("T")


def read_key_values(file_path: str | Path) -> Result[dict[str, str], str]:
    """Read a ``key=value`` file into a dictionary (I/O operation)."""
    path = Path(file_path)

    if not path.exists():
        return Failure(f"Could not find '{file_path}'")

    return (
        _detect_encoding(path)
        .bind(lambda encoding: _read_lines(path, encoding))
        .bind(parse_key_values)
    )


def parse_key_values(lines: list[str]) -> Result[dict[str, str], str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values: dict[str, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            return Failure(f"Line {number}: expected key=value, got '{line}'")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if not key:
            return Failure(f"Line {number}: empty key")
        values[key] = value.strip()
    return Success(values)


def normalize_key(key: str) -> str:
    """Canonical key spelling: lowercase, underscores, no leading dashes."""
    return key.strip().lstrip("-").replace("-", "_").lower()


def resolve(
    flag: T | None, config: Mapping[str, str], key: str, default: T, cast=str
) -> T:
    """Pick a setting: explicit flag, then config file, then built-in default."""
    if flag is not None:
        return flag
    if key in config:
        return cast(config[key])
    return default


def require_int(values: Mapping[str, str], key: str) -> Result[int, str]:
    """Fetch an integer entry, failing with a readable message."""
    if key not in values:
        return Failure(f"Missing '{key}' entry")
    try:
        return Success(int(values[key]))
    except ValueError:
        return Failure(f"Entry '{key}' is not an integer: '{values[key]}'")


def optional_float(
    values: Mapping[str, str], key: str, default: float
) -> Result[float, str]:
    """Fetch a real-valued entry with a default."""
    if key not in values:
        return Success(default)
    try:
        return Success(float(values[key]))
    except ValueError:
        return Failure(f"Entry '{key}' is not a number: '{values[key]}'")


def parse_int_tuple(text: str) -> tuple[int, ...]:
    """``"16,32,64"`` -> ``(16, 32, 64)``; raises ValueError on bad items."""
    return tuple(int(part) for part in text.split(",") if part.strip())


# Private helper functions


def _detect_encoding(path: Path) -> Result[str, str]:
    """Detect file encoding using chardet (I/O operation)."""
    try:
        with path.open("rb") as f:
            raw_data = f.read(10000)

        detected = chardet.detect(raw_data)
        encoding = detected.get("encoding") or "utf-8"

        if encoding.lower() in ["utf-8-sig", "utf-8", "ascii"]:
            return Success("utf-8-sig")

        return Success(encoding)
    except OSError as e:
        return Failure(f"Could not detect encoding: {e}")


def _read_lines(path: Path, encoding: str) -> Result[list[str], str]:
    """Read all lines of a text file (I/O operation)."""
    try:
        return Success(path.read_text(encoding=encoding).splitlines())
    except (OSError, UnicodeDecodeError) as e:
        return Failure(f"Could not read file: {e}")
