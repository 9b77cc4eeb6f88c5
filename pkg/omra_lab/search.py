"""
Reference resolution-decision procedures.

``omra_exhaustive`` codes the frame at every factor and keeps the cheapest
stream. ``memc_search`` ranks candidate factors by warped prediction error
without coding anything. ``memc_star`` skips the search on the top temporal
layer, where references are one frame away.
"""

import logging
from collections.abc import Iterable

import attrs
import numpy as np

from .codec import EncodeResult, QuantConfig, RdRecord, encode_bframe
from .frame_io import Frame
from .gop import FrameSlot
from .motion import FlowField, MotionConfig, estimate_bidirectional, prediction_error
from .types import FACTORS

logger = logging.getLogger(__name__)


@attrs.frozen
class ExhaustiveResult:
    factor: int
    record: RdRecord
    best: EncodeResult

    @property
    def encodes(self) -> int:
        return len(self.record.entries)


@attrs.frozen
class MemcResult:
    """Winning factor, per-candidate prediction errors and the flows behind them."""

    factor: int
    errors: dict[int, float]
    flows: dict[int, tuple[FlowField, FlowField]] = attrs.field(factory=dict)

    @property
    def evaluations(self) -> int:
        return len(self.errors)

    @property
    def winning_flows(self) -> tuple[FlowField, FlowField] | None:
        return self.flows.get(self.factor)


def omra_exhaustive(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    cfg: QuantConfig,
    motion: MotionConfig | None = None,
) -> ExhaustiveResult:
    """Encode at every factor and keep the minimum-RD-cost encoding."""
    results = {
        factor: encode_bframe(x_t, ref_past, ref_future, factor, cfg, motion)
        for factor in FACTORS
    }
    record = RdRecord.from_results(results, cfg.lmbda)
    best = record.best_factor
    logger.debug("Exhaustive costs %s -> S=%d", record.costs, best)
    return ExhaustiveResult(best, record, results[best])


def candidate_error(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    factor: int,
    motion: MotionConfig | None = None,
) -> float:
    """Full-resolution warped prediction error of one candidate factor."""
    return _evaluate(x_t, ref_past, ref_future, factor, motion)[0]


def memc_search(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    candidates: Iterable[int],
    motion: MotionConfig | None = None,
) -> MemcResult:
    """Pick the candidate with the lowest prediction error; ties go to smaller S."""
    ordered = sorted(set(candidates))
    if not ordered:
        raise ValueError("Candidate set must not be empty")
    if any(s not in FACTORS for s in ordered):
        raise ValueError(f"Candidates must be drawn from {FACTORS}")

    evaluated = {s: _evaluate(x_t, ref_past, ref_future, s, motion) for s in ordered}
    errors = {s: error for s, (error, _) in evaluated.items()}
    winner = ordered[int(np.argmin([errors[s] for s in ordered]))]
    logger.debug("MEMC errors %s -> S=%d", errors, winner)
    return MemcResult(winner, errors, {s: flows for s, (_, flows) in evaluated.items()})


def memc_star(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    slot: FrameSlot,
    motion: MotionConfig | None = None,
) -> MemcResult:
    """MEMC search that returns S=1 unevaluated when both references are adjacent."""
    if slot.is_intra:
        raise ValueError("memc_star needs a B-frame slot")
    if slot.k == 1:
        return MemcResult(1, {})
    return memc_search(x_t, ref_past, ref_future, FACTORS, motion)


# Private helper functions


def _evaluate(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    factor: int,
    motion: MotionConfig | None,
) -> tuple[float, tuple[FlowField, FlowField]]:
    flows = estimate_bidirectional(x_t, ref_past, ref_future, factor, motion)
    error = prediction_error(x_t, ref_past, ref_future, *flows, factor)
    return error, flows
