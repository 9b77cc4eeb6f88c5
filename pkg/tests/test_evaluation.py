"""
Tests for BD-rate, RD points and decision-quality analysis.
"""

import numpy as np
import polars as pl
import pytest
from returns.result import Failure
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator

from omra_lab.evaluation import (
    ConfusionMatrix,
    RdCurve,
    bd_rate,
    confusion,
    decision_pairs,
    derive_candidate_sets,
    per_layer_summary,
    rd_point,
    temporal_complexity,
    validate_curve,
)
from omra_lab.frame_io import PSNR_CAP_DB, Frame
from tests.fixtures.sequence_generators import static_sequence

ANCHOR = RdCurve.from_points([(0.1, 30.0), (0.2, 33.0), (0.4, 36.0), (0.8, 39.0)])


def _scaled(curve: RdCurve, factor: float) -> RdCurve:
    return RdCurve(tuple(r * factor for r in curve.rates), curve.qualities)


class TestBdRate:
    """Test Bjontegaard rate differences."""

    def test_identical_curves(self):
        """Test that a curve against itself gives zero."""
        assert bd_rate(ANCHOR, ANCHOR).unwrap() == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize(
        "factor,expected", [(0.5, -50.0), (0.9, -10.0), (1.25, 25.0)]
    )
    def test_uniform_rate_scaling(self, factor, expected):
        """Test that scaling every rate shows up exactly."""
        result = bd_rate(ANCHOR, _scaled(ANCHOR, factor)).unwrap()
        assert result == pytest.approx(expected)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_trapezoid_integration(self, seed):
        """Test the closed-form integral against 1000-sample re-integration."""
        rng = np.random.default_rng(seed)
        qualities = tuple(30.0 + np.cumsum(rng.uniform(1.0, 4.0, 4)))
        anchor = RdCurve(tuple(np.cumsum(rng.uniform(0.05, 0.3, 4))), qualities)
        test = RdCurve(tuple(np.cumsum(rng.uniform(0.05, 0.3, 4))), qualities)

        grid = np.linspace(qualities[0], qualities[-1], 1000)
        fit_anchor = PchipInterpolator(qualities, np.log10(anchor.rates))
        fit_test = PchipInterpolator(qualities, np.log10(test.rates))
        mean_diff = trapezoid(fit_test(grid) - fit_anchor(grid), grid) / (
            qualities[-1] - qualities[0]
        )
        expected = (10.0**mean_diff - 1.0) * 100.0
        result = bd_rate(anchor, test).unwrap()
        assert result == pytest.approx(expected, rel=1e-3, abs=1e-3)

    def test_points_are_sorted_by_rate(self):
        """Test that from_points orders the input."""
        curve = RdCurve.from_points([(0.4, 36.0), (0.1, 30.0)])
        assert curve.rates == (0.1, 0.4)

    def test_too_few_points(self):
        """Test that three points are not enough."""
        curve = RdCurve((0.1, 0.2, 0.4), (30.0, 33.0, 36.0))
        assert isinstance(bd_rate(ANCHOR, curve), Failure)

    def test_non_monotonic_quality(self):
        """Test that quality must rise with rate."""
        curve = RdCurve((0.1, 0.2, 0.4, 0.8), (30.0, 29.0, 36.0, 39.0))
        assert "strictly increasing" in validate_curve(curve).failure()

    def test_non_positive_rate(self):
        """Test that zero rates are rejected."""
        curve = RdCurve((0.0, 0.2, 0.4, 0.8), (30.0, 33.0, 36.0, 39.0))
        assert isinstance(validate_curve(curve), Failure)

    def test_disjoint_quality_ranges(self):
        """Test that non-overlapping curves fail."""
        high = RdCurve((1.0, 2.0, 3.0, 4.0), (40.0, 41.0, 42.0, 43.0))
        assert "overlap" in bd_rate(ANCHOR, high).failure()


class TestRdPoint:
    """Test bits per pixel and mean PSNR."""

    def test_perfect_reconstruction(self):
        """Test the capped PSNR and the bpp normalisation."""
        frames = static_sequence(16, 16, 4)
        bpp, quality = rd_point(frames, frames, 2048)
        assert bpp == 2048 / (16 * 16 * 4)
        assert quality == PSNR_CAP_DB

    def test_length_mismatch(self):
        """Test that sequences must align."""
        frames = static_sequence(16, 16, 2)
        with pytest.raises(ValueError):
            rd_point(frames, frames[:1], 10)


class TestConfusion:
    """Test confusion matrices and candidate sets."""

    def test_counts_and_conditionals(self):
        """Test rows = predicted, columns = ground truth."""
        matrix = confusion([(1, 1), (1, 2), (2, 2), (8, 4)])
        assert matrix.counts[0].tolist() == [1, 1, 0, 0]
        assert matrix.counts[3, 2] == 1
        assert matrix.conditionals[0].tolist() == [0.5, 0.5, 0.0, 0.0]
        assert matrix.conditionals[2].tolist() == [0.0, 0.0, 0.0, 0.0]
        assert matrix.accuracy == 0.5

    def test_invalid_factor(self):
        """Test that pairs must use known factors."""
        with pytest.raises(ValueError):
            confusion([(3, 1)])

    def test_empty_pairs(self):
        """Test that an empty comparison is refused."""
        with pytest.raises(ValueError):
            confusion([])

    def test_invalid_counts(self):
        """Test that counts must be a 4x4 non-negative array."""
        with pytest.raises(ValueError):
            ConfusionMatrix(np.zeros((3, 3)))

    def test_candidate_sets(self):
        """Test top-two sets, tie order and empty rows."""
        conditionals = np.array(
            [
                [0.5, 0.3, 0.2, 0.0],
                [0.0, 0.4, 0.4, 0.2],
                [0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
        sets = derive_candidate_sets(conditionals)
        assert sets == {1: (1, 2), 2: (2, 4), 4: (4,), 8: (8,)}

    def test_published_full_resolution_row(self):
        """Test that a 68.75/31.25 split over S=1 and S=2 gives {1, 2}."""
        conditionals = np.zeros((4, 4))
        conditionals[0, :2] = [0.6875, 0.3125]
        assert derive_candidate_sets(conditionals)[1] == (1, 2)


class TestTemporalComplexity:
    """Test the sequence motion measure."""

    def test_static_sequence(self):
        """Test that no change means zero."""
        assert temporal_complexity(static_sequence(16, 16, 3)) == 0.0

    def test_full_swing(self):
        """Test black to white gives one."""
        frames = [Frame.constant(16, 16, 0), Frame.constant(16, 16, 255)]
        assert temporal_complexity(frames) == 1.0

    def test_single_frame(self):
        """Test that one frame has no temporal complexity."""
        with pytest.raises(ValueError):
            temporal_complexity(static_sequence(16, 16, 1))


class TestDecisionLogs:
    """Test log summaries and joins."""

    @pytest.fixture
    def logs(self):
        predicted = pl.DataFrame(
            {"poc": [2, 1, 3], "layer": [1, 2, 2], "S_pred": [4, None, 1]}
        ).with_columns(S_final=pl.Series([4, 1, 2]))
        truth = pl.DataFrame({"poc": [1, 2, 3], "S_final": [1, 8, 2]})
        return predicted, truth

    def test_per_layer_summary(self, logs):
        """Test factor counts per layer."""
        summary = per_layer_summary(logs[0])
        assert summary.rows() == [(1, 4, 1), (2, 1, 1), (2, 2, 1)]

    def test_pairs_on_final_factor(self, logs):
        """Test joining on poc."""
        pairs = decision_pairs(*logs)
        assert sorted(pairs) == [(1, 1), (2, 2), (4, 8)]

    def test_pairs_skip_missing_predictions(self, logs):
        """Test that frames without a prediction are left out."""
        pairs = decision_pairs(*logs, column="S_pred")
        assert sorted(pairs) == [(1, 2), (4, 8)]
