"""
Tests for CSV report tables.
"""

import numpy as np
import polars as pl
import pytest
from returns.result import Failure, Success

from omra_lab.complexity import ComplexityLedger, WarpEvent, ledger_for
from omra_lab.evaluation import confusion, derive_candidate_sets
from omra_lab.reports import (
    GT_COLUMNS,
    append_rdpoints,
    bdrate_frame,
    complexity_frame,
    curves_by_sequence,
    effort_frame,
    matrix_frame,
    rdpoint_frame,
    read_complexity,
    read_rdpoints,
    write_confusion_reports,
    write_frame,
)

POINTS = [(24.0, 0.1, 30.0), (16.0, 0.2, 33.0), (10.0, 0.4, 36.0), (6.0, 0.8, 39.0)]


def _scaled(points, factor):
    return [(q, bpp * factor, quality) for q, bpp, quality in points]


class TestRdPoints:
    """Test rd-point tables."""

    def test_append_creates_then_extends(self, temp_dir):
        """Test that a second append keeps the first rows."""
        path = temp_dir / "rd.csv"
        append_rdpoints(rdpoint_frame("a", "fixed1", POINTS[:2]), path).unwrap()
        append_rdpoints(rdpoint_frame("a", "fixed1", POINTS[2:]), path).unwrap()
        frame = read_rdpoints(path).unwrap()
        assert frame.height == 4
        assert frame["q_step"].to_list() == [24.0, 16.0, 10.0, 6.0]

    def test_missing_file(self, temp_dir):
        """Test that an absent table fails."""
        assert "Could not find" in read_rdpoints(temp_dir / "rd.csv").failure()

    def test_foreign_table(self, temp_dir):
        """Test that a CSV without rd columns is rejected."""
        path = temp_dir / "rd.csv"
        pl.DataFrame({"x": [1]}).write_csv(path)
        assert isinstance(read_rdpoints(path), Failure)

    def test_curves_by_sequence(self):
        """Test one curve per sequence, ordered by rate."""
        frame = pl.concat(
            [
                rdpoint_frame("a", "mu", list(reversed(POINTS))),
                rdpoint_frame("b", "mu", POINTS),
            ]
        )
        curves = curves_by_sequence(frame)
        assert list(curves) == ["a", "b"]
        assert curves["a"].rates == (0.1, 0.2, 0.4, 0.8)


class TestBdRateTable:
    """Test the per-sequence BD-rate table."""

    def test_shared_sequences(self):
        """Test BD-rate rows and variant names."""
        anchor = rdpoint_frame("a", "fixed1", POINTS)
        test = pl.concat(
            [
                rdpoint_frame("a", "co", _scaled(POINTS, 0.9)),
                rdpoint_frame("z", "co", POINTS),
            ]
        )
        frame = bdrate_frame(anchor, test).unwrap()
        assert frame["sequence"].to_list() == ["a"]
        assert frame.row(0, named=True)["anchor"] == "fixed1"
        assert frame.row(0, named=True)["test"] == "co"
        assert frame["bd_rate"][0] == pytest.approx(-10.0)

    def test_no_shared_sequence(self):
        """Test that disjoint tables fail."""
        result = bdrate_frame(
            rdpoint_frame("a", "fixed1", POINTS), rdpoint_frame("b", "co", POINTS)
        )
        assert isinstance(result, Failure)

    def test_invalid_curve_names_sequence(self):
        """Test that a bad curve is reported with its sequence."""
        result = bdrate_frame(
            rdpoint_frame("a", "fixed1", POINTS), rdpoint_frame("a", "co", POINTS[:3])
        )
        assert "Sequence 'a'" in result.failure()


class TestComplexityTable:
    """Test complexity CSVs."""

    def test_total_row(self):
        """Test one row per category plus the total."""
        ledger = ledger_for([WarpEvent(16, 16)], 16, 16)
        frame = complexity_frame("fixed1", ledger)
        assert frame["category"].to_list()[-1] == "total"
        rows = {r["category"]: r for r in frame.iter_rows(named=True)}
        assert rows["total"]["macs"] == 1024
        assert rows["warping"]["kmac_per_pixel"] == pytest.approx(4 / 1000)

    def test_empty_ledger(self):
        """Test that an empty ledger gives zeros, not a division error."""
        frame = complexity_frame("memc", ComplexityLedger())
        assert frame["kmac_per_pixel"].sum() == 0.0

    def test_round_trip(self, temp_dir):
        """Test writing and reading back."""
        path = temp_dir / "cx.csv"
        frame = complexity_frame("mu", ledger_for([WarpEvent(16, 16)], 16, 16))
        assert isinstance(write_frame(frame, path), Success)
        assert read_complexity(path).unwrap().height == frame.height

    def test_wrong_columns(self, temp_dir):
        """Test that other tables are rejected."""
        path = temp_dir / "cx.csv"
        pl.DataFrame({"variant": ["mu"]}).write_csv(path)
        assert "must have columns" in read_complexity(path).failure()


class TestDecisionTables:
    """Test effort and confusion tables."""

    def test_effort(self):
        """Test per-variant averages and bit totals."""
        log = pl.DataFrame(
            {
                "variant": ["memc", "memc", "co"],
                "evals": [4, 4, 2],
                "encodes": [1, 1, 1],
                "classifier_calls": [0, 0, 1],
                "bits": [100, 50, 80],
            }
        )
        effort = effort_frame(log)
        rows = {r["variant"]: r for r in effort.iter_rows(named=True)}
        assert rows["memc"]["frames"] == 2
        assert rows["memc"]["evals_per_frame"] == 4.0
        assert rows["memc"]["bits"] == 150
        assert rows["co"]["classifier_calls_per_frame"] == 1.0

    def test_matrix_frame(self):
        """Test the predicted column and ground-truth columns."""
        frame = matrix_frame(np.eye(4))
        assert frame.columns == ["predicted", *GT_COLUMNS]
        assert frame["predicted"].to_list() == [1, 2, 4, 8]

    def test_confusion_reports(self, temp_dir):
        """Test the three prefixed files."""
        matrix = confusion([(1, 1), (1, 2), (4, 4)])
        sets = derive_candidate_sets(matrix.conditionals)
        paths = write_confusion_reports(matrix, sets, temp_dir, "co_").unwrap()
        assert sorted(p.name for p in paths) == [
            "co_candidate_sets.csv",
            "co_conditionals.csv",
            "co_confusion.csv",
        ]
        candidates = pl.read_csv(temp_dir / "co_candidate_sets.csv")
        assert candidates["candidates"].to_list()[0] == "1;2"
