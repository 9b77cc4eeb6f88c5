"""
Coding-efficiency and decision-quality analysis.

BD-rate fits log10(rate) as a monotone piecewise-cubic (PCHIP) function of
PSNR for both curves and integrates the fits exactly over the shared PSNR
interval. Confusion matrices are indexed rows = predicted factor,
columns = ground-truth factor.
"""

import attrs
import numpy as np
import polars as pl
from returns.result import Failure, Result, Success
from scipy.interpolate import PchipInterpolator

from .frame_io import Frame, psnr
from .types import FACTORS, factor_index

MIN_CURVE_POINTS = 4


@attrs.frozen
class RdCurve:
    """Rate (bits per pixel) and PSNR (dB) pairs ordered by rate."""

    rates: tuple[float, ...]
    qualities: tuple[float, ...]

    @classmethod
    def from_points(cls, points: list[tuple[float, float]]) -> "RdCurve":
        ordered = sorted(points)
        return cls(tuple(r for r, _ in ordered), tuple(q for _, q in ordered))


def validate_curve(curve: RdCurve) -> Result[RdCurve, str]:
    """At least four points, positive rates, quality strictly rising with rate."""
    rates, qualities = np.asarray(curve.rates), np.asarray(curve.qualities)
    if len(rates) != len(qualities):
        return Failure("Rate and quality lists differ in length")
    if len(rates) < MIN_CURVE_POINTS:
        return Failure(f"RD curve needs at least {MIN_CURVE_POINTS} points")
    if np.any(rates <= 0):
        return Failure("RD curve rates must be positive")
    if np.any(np.diff(rates) <= 0) or np.any(np.diff(qualities) <= 0):
        return Failure("RD curve must be strictly increasing in rate and quality")
    return Success(curve)


def bd_rate(anchor: RdCurve, test: RdCurve) -> Result[float, str]:
    """Average rate difference of ``test`` against ``anchor`` at equal PSNR, in %."""
    return validate_curve(anchor).bind(
        lambda a: validate_curve(test).bind(lambda t: _bd_rate(a, t))
    )


def _bd_rate(anchor: RdCurve, test: RdCurve) -> Result[float, str]:
    low = max(anchor.qualities[0], test.qualities[0])
    high = min(anchor.qualities[-1], test.qualities[-1])
    if high <= low:
        return Failure("RD curves do not overlap in quality")
    fit_anchor = PchipInterpolator(anchor.qualities, np.log10(anchor.rates))
    fit_test = PchipInterpolator(test.qualities, np.log10(test.rates))
    mean_diff = (fit_test.integrate(low, high) - fit_anchor.integrate(low, high)) / (
        high - low
    )
    return Success(float((10.0**mean_diff - 1.0) * 100.0))


def rd_point(
    frames: list[Frame], recons: list[Frame], total_bits: int
) -> tuple[float, float]:
    """Bits per pixel over the sequence and mean per-frame PSNR."""
    if len(frames) != len(recons) or not frames:
        raise ValueError("Source and reconstruction must have the same frame count")
    pixels = frames[0].width * frames[0].height * len(frames)
    qualities = [psnr(a, b) for a, b in zip(frames, recons, strict=True)]
    return total_bits / pixels, float(np.mean(qualities))


# Decision quality


@attrs.frozen(eq=False)
class ConfusionMatrix:
    """4x4 counts, rows = predicted factor, columns = ground-truth factor."""

    counts: np.ndarray

    def __attrs_post_init__(self) -> None:
        if self.counts.shape != (len(FACTORS), len(FACTORS)) or np.any(self.counts < 0):
            raise ValueError("Confusion counts must be a non-negative 4x4 array")

    @property
    def conditionals(self) -> np.ndarray:
        """P(ground truth | predicted); empty rows stay all-zero."""
        totals = self.counts.sum(axis=1, keepdims=True)
        return np.divide(
            self.counts,
            totals,
            out=np.zeros(self.counts.shape, dtype=np.float64),
            where=totals > 0,
        )

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else 0.0


def confusion(pairs: list[tuple[int, int]]) -> ConfusionMatrix:
    """Count (predicted, ground truth) factor pairs."""
    if not pairs:
        raise ValueError("Confusion needs at least one pair")
    counts = np.zeros((len(FACTORS), len(FACTORS)), dtype=np.int64)
    for predicted, truth in pairs:
        counts[factor_index(predicted), factor_index(truth)] += 1
    return ConfusionMatrix(counts)


def accuracy(matrix: ConfusionMatrix) -> float:
    return matrix.accuracy


def derive_candidate_sets(conditionals: np.ndarray) -> dict[int, tuple[int, ...]]:
    """Per predicted factor, its two likeliest ground-truth factors, ascending."""
    sets = {}
    for row, predicted in zip(conditionals, FACTORS, strict=True):
        if not np.any(row > 0):
            sets[predicted] = (predicted,)
            continue
        # Stable sort keeps smaller factors first among equal probabilities.
        ranked = [FACTORS[i] for i in np.argsort(-row, kind="stable") if row[i] > 0]
        sets[predicted] = tuple(sorted(ranked[:2]))
    return sets


def temporal_complexity(frames: list[Frame]) -> float:
    """Mean absolute difference of consecutive frames, scaled to [0, 1]."""
    if len(frames) < 2:
        raise ValueError("Temporal complexity needs at least two frames")
    diffs = [
        np.mean(np.abs(b.as_float() - a.as_float()))
        for a, b in zip(frames, frames[1:], strict=False)
    ]
    return float(np.mean(diffs) / 255.0)


def per_layer_summary(log: pl.DataFrame) -> pl.DataFrame:
    """Count of each chosen factor per temporal layer of a decision log."""
    return (
        log.group_by(["layer", "S_final"])
        .agg(pl.len().alias("frames"))
        .sort(["layer", "S_final"])
    )


def decision_pairs(
    predicted: pl.DataFrame, truth: pl.DataFrame, column: str = "S_final"
) -> list[tuple[int, int]]:
    """Join two decision logs on poc and pair the prediction with the truth."""
    joined = predicted.select(["poc", column]).join(
        truth.select(["poc", pl.col("S_final").alias("S_truth")]), on="poc"
    )
    return [
        (int(p), int(t))
        for p, t in zip(joined[column], joined["S_truth"], strict=True)
        if p is not None
    ]
