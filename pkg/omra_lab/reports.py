"""
CSV reports, all read and written with polars.

==================  ==============================================
rdpoints.csv        sequence, variant, q_step, bpp, psnr
bdrate.csv          sequence, anchor, test, bd_rate
complexity.csv      variant, category, macs, kmac_per_pixel
confusion.csv       predicted, gt_1, gt_2, gt_4, gt_8 (counts)
conditionals.csv    predicted, gt_1, gt_2, gt_4, gt_8 (row shares)
candidate_sets.csv  predicted, candidates ("1;2")
search_effort.csv   variant, frames, evals/encodes/classifier calls per frame, bits
layers.csv          variant, layer, S_final, frames
==================  ==============================================

The confusion family is written once per variant with a ``<variant>_`` prefix.
"""

from pathlib import Path

import numpy as np
import polars as pl
from returns.result import Failure, Result, Success

from .complexity import CATEGORIES, ComplexityLedger
from .evaluation import ConfusionMatrix, RdCurve, bd_rate
from .types import FACTORS

RDPOINT_SCHEMA = {
    "sequence": pl.Utf8,
    "variant": pl.Utf8,
    "q_step": pl.Float64,
    "bpp": pl.Float64,
    "psnr": pl.Float64,
}
GT_COLUMNS = [f"gt_{s}" for s in FACTORS]


def rdpoint_frame(
    sequence: str, variant: str, points: list[tuple[float, float, float]]
) -> pl.DataFrame:
    """Rows ``(q_step, bpp, psnr)`` of one sequence and variant."""
    return pl.DataFrame(
        {
            "sequence": [sequence] * len(points),
            "variant": [variant] * len(points),
            "q_step": [p[0] for p in points],
            "bpp": [p[1] for p in points],
            "psnr": [p[2] for p in points],
        },
        schema=RDPOINT_SCHEMA,
    )


def append_rdpoints(frame: pl.DataFrame, file_path: str | Path) -> Result[Path, str]:
    """Append rows to an rd-points CSV, creating it when absent."""
    path = Path(file_path)
    try:
        if path.exists():
            frame = pl.concat([_read_rdpoints(path), frame])
        frame.write_csv(path)
        return Success(path)
    except (OSError, pl.exceptions.PolarsError) as e:
        return Failure(f"Could not write rd points: {e}")


def read_rdpoints(file_path: str | Path) -> Result[pl.DataFrame, str]:
    path = Path(file_path)
    if not path.exists():
        return Failure(f"Could not find '{file_path}'")
    try:
        frame = _read_rdpoints(path)
    except (OSError, pl.exceptions.PolarsError) as e:
        return Failure(f"Could not read rd points '{file_path}': {e}")
    missing = [c for c in RDPOINT_SCHEMA if c not in frame.columns]
    if missing:
        return Failure(f"RD points '{file_path}' lack columns {missing}")
    return Success(frame)


def curves_by_sequence(frame: pl.DataFrame) -> dict[str, RdCurve]:
    """One curve per sequence of an rd-points table (all of one variant)."""
    curves = {}
    for (sequence,), group in frame.group_by(["sequence"], maintain_order=True):
        curves[str(sequence)] = RdCurve.from_points(
            list(zip(group["bpp"].to_list(), group["psnr"].to_list(), strict=True))
        )
    return curves


def bdrate_frame(anchor: pl.DataFrame, test: pl.DataFrame) -> Result[pl.DataFrame, str]:
    """BD-rate per sequence present in both tables."""
    anchor_curves, test_curves = curves_by_sequence(anchor), curves_by_sequence(test)
    shared = [s for s in anchor_curves if s in test_curves]
    if not shared:
        return Failure("No sequence appears in both rd-point tables")

    rows = []
    for sequence in shared:
        match bd_rate(anchor_curves[sequence], test_curves[sequence]):
            case Success(value):
                rows.append((sequence, value))
            case Failure(message):
                return Failure(f"Sequence '{sequence}': {message}")
    return Success(
        pl.DataFrame(
            {
                "sequence": [r[0] for r in rows],
                "anchor": [_variant_of(anchor)] * len(rows),
                "test": [_variant_of(test)] * len(rows),
                "bd_rate": [r[1] for r in rows],
            }
        )
    )


def complexity_frame(variant: str, ledger: ComplexityLedger) -> pl.DataFrame:
    denominator = 1000.0 * max(ledger.pixels * ledger.frames, 1)
    categories = [*CATEGORIES, "total"]
    macs = [ledger.macs[c] for c in CATEGORIES] + [ledger.total]
    return pl.DataFrame(
        {
            "variant": [variant] * len(categories),
            "category": categories,
            "macs": macs,
            "kmac_per_pixel": [m / denominator for m in macs],
        },
        schema={
            "variant": pl.Utf8,
            "category": pl.Utf8,
            "macs": pl.Int64,
            "kmac_per_pixel": pl.Float64,
        },
    )


def read_complexity(file_path: str | Path) -> Result[pl.DataFrame, str]:
    path = Path(file_path)
    if not path.exists():
        return Failure(f"Could not find '{file_path}'")
    try:
        frame = pl.read_csv(path)
    except (OSError, pl.exceptions.PolarsError) as e:
        return Failure(f"Could not read complexity file '{file_path}': {e}")
    expected = ["variant", "category", "macs", "kmac_per_pixel"]
    if frame.columns != expected:
        return Failure(f"Complexity file '{file_path}' must have columns {expected}")
    return Success(frame)


def effort_frame(log: pl.DataFrame) -> pl.DataFrame:
    """Mean per-frame search effort and total bits per variant of a decision log."""
    return (
        log.group_by("variant", maintain_order=True)
        .agg(
            pl.len().alias("frames"),
            pl.col("evals").mean().alias("evals_per_frame"),
            pl.col("encodes").mean().alias("encodes_per_frame"),
            pl.col("classifier_calls").mean().alias("classifier_calls_per_frame"),
            pl.col("bits").sum().alias("bits"),
        )
    )


def matrix_frame(matrix: np.ndarray) -> pl.DataFrame:
    """A 4x4 factor matrix with one row per predicted factor."""
    return pl.DataFrame(
        {
            "predicted": list(FACTORS),
            **{column: matrix[:, i].tolist() for i, column in enumerate(GT_COLUMNS)},
        }
    )


def candidate_sets_frame(sets: dict[int, tuple[int, ...]]) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "predicted": list(sets),
            "candidates": [";".join(str(s) for s in c) for c in sets.values()],
        }
    )


def write_confusion_reports(
    matrix: ConfusionMatrix,
    sets: dict[int, tuple[int, ...]],
    out_dir: str | Path,
    prefix: str = "",
) -> Result[list[Path], str]:
    """confusion.csv, conditionals.csv and candidate_sets.csv under ``out_dir``."""
    directory = Path(out_dir)
    outputs = {
        directory / f"{prefix}confusion.csv": matrix_frame(matrix.counts),
        directory / f"{prefix}conditionals.csv": matrix_frame(matrix.conditionals),
        directory / f"{prefix}candidate_sets.csv": candidate_sets_frame(sets),
    }
    return _write_all(outputs)


def write_frame(frame: pl.DataFrame, file_path: str | Path) -> Result[Path, str]:
    return _write_all({Path(file_path): frame}).map(lambda paths: paths[0])


# Private helper functions


def _read_rdpoints(path: Path) -> pl.DataFrame:
    return pl.read_csv(path, schema_overrides=RDPOINT_SCHEMA)


def _variant_of(frame: pl.DataFrame) -> str:
    variants = frame["variant"].unique(maintain_order=True).to_list()
    return ";".join(str(v) for v in variants)


def _write_all(outputs: dict[Path, pl.DataFrame]) -> Result[list[Path], str]:
    try:
        for path, frame in outputs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.write_csv(path)
        return Success(list(outputs))
    except OSError as e:
        return Failure(f"Could not write report: {e}")
