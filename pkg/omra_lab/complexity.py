"""
Multiply-accumulate cost model of the encoder.

Every costed operation is an event descriptor; ``mac_model`` maps a
descriptor to an integer MAC count from a fixed catalog (version
``CATALOG_VERSION``):

==========================  ==============================================
SAD block search            1 MAC per absolute difference, every position
half-pel refinement         8 neighbours x (4 bilinear + 1 SAD) per pixel
box downsampling            4 per output sample of every 2x2 pass
flow resampling             4 per output cell
bilinear warp               4 per output pixel
prediction error            1 per pixel and direction
8x8 DCT (either direction)  1024 per block
quantization + entropy      2 per coefficient
classifier forward          analytic sum over the layers
==========================  ==============================================

A ledger groups the counts into five categories and is additive across
frames.
"""

import attrs
from returns.result import Failure, Result, Success

from .classifier import DEFAULT_WIDTHS, INPUT_SIZE, forward_macs
from .entropy import BLOCK
from .motion import MotionConfig
from .types import FACTORS, Refinement

CATALOG_VERSION = 1
CATEGORIES = (
    "motion_estimation",
    "warping",
    "resampling",
    "transform_quant_entropy",
    "classifier",
)
DCT_MACS_PER_BLOCK = 2 * BLOCK * BLOCK * BLOCK
HALF_PEL_NEIGHBOURS = 8


@attrs.frozen
class MotionSearchEvent:
    """Block search of one flow field on a ``width x height`` grid."""

    width: int
    height: int
    block_size: int = 8
    search_range: int = 8
    refinement: Refinement = Refinement.NONE
    category = "motion_estimation"


@attrs.frozen
class PredictionErrorEvent:
    width: int
    height: int
    category = "motion_estimation"


@attrs.frozen
class DownsampleEvent:
    width: int
    height: int
    factor: int
    category = "resampling"


@attrs.frozen
class ResampleEvent:
    """Flow resampled onto a ``width x height`` grid."""

    width: int
    height: int
    category = "resampling"


@attrs.frozen
class WarpEvent:
    width: int
    height: int
    category = "warping"


@attrs.frozen
class TransformEvent:
    """One pass of the 8x8 DCT (forward or inverse) over a frame."""

    width: int
    height: int
    category = "transform_quant_entropy"


@attrs.frozen
class QuantEntropyEvent:
    width: int
    height: int
    category = "transform_quant_entropy"


@attrs.frozen
class ClassifierEvent:
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    num_outputs: int = len(FACTORS)
    size: int = INPUT_SIZE
    category = "classifier"


Event = (
    MotionSearchEvent
    | PredictionErrorEvent
    | DownsampleEvent
    | ResampleEvent
    | WarpEvent
    | TransformEvent
    | QuantEntropyEvent
    | ClassifierEvent
)


def mac_model(event: object) -> Result[int, str]:
    """MAC count of one event descriptor."""
    match event:
        case MotionSearchEvent(width, height, block, reach, refinement):
            padded = _round_up(width, block) * _round_up(height, block)
            macs = padded * (2 * reach + 1) ** 2
            if refinement is Refinement.HALF_PEL:
                macs += padded * HALF_PEL_NEIGHBOURS * 5
            return Success(macs)
        case PredictionErrorEvent(width, height):
            return Success(width * height)
        case DownsampleEvent(width, height, factor):
            if factor not in FACTORS:
                return Failure(f"Unknown downsampling factor {factor}")
            macs, side_w, side_h = 0, width, height
            for _ in range(factor.bit_length() - 1):
                side_w, side_h = side_w // 2, side_h // 2
                macs += 4 * side_w * side_h
            return Success(macs)
        case ResampleEvent(width, height) | WarpEvent(width, height):
            return Success(4 * width * height)
        case TransformEvent(width, height):
            return Success(_blocks(width, height) * DCT_MACS_PER_BLOCK)
        case QuantEntropyEvent(width, height):
            return Success(2 * width * height)
        case ClassifierEvent(widths, num_outputs, size):
            return Success(forward_macs(widths, num_outputs, size))
        case _:
            return Failure(f"Unknown operation descriptor: {event!r}")


@attrs.frozen
class ComplexityLedger:
    """MAC tallies per category over ``frames`` frames of ``pixels`` pixels each."""

    macs: dict[str, int] = attrs.field(factory=lambda: dict.fromkeys(CATEGORIES, 0))
    frames: int = 0
    pixels: int = 0

    @property
    def total(self) -> int:
        return sum(self.macs.values())

    @property
    def kmac_per_pixel(self) -> float:
        if not self.frames or not self.pixels:
            return 0.0
        return self.total / (1000.0 * self.pixels * self.frames)

    def __add__(self, other: "ComplexityLedger") -> "ComplexityLedger":
        if self.pixels and other.pixels and self.pixels != other.pixels:
            raise ValueError("Ledgers of different frame sizes cannot be added")
        return ComplexityLedger(
            {c: self.macs[c] + other.macs[c] for c in CATEGORIES},
            self.frames + other.frames,
            self.pixels or other.pixels,
        )


def ledger_for(
    events: list[Event], width: int, height: int, frames: int = 1
) -> ComplexityLedger:
    """Tally events into a ledger; unknown descriptors raise ValueError."""
    macs = dict.fromkeys(CATEGORIES, 0)
    for event in events:
        match mac_model(event):
            case Success(count):
                macs[event.category] += count
            case Failure(message):
                raise ValueError(message)
    return ComplexityLedger(macs, frames, width * height)


def sum_ledgers(ledgers: list[ComplexityLedger]) -> ComplexityLedger:
    total = ComplexityLedger()
    for ledger in ledgers:
        total = total + ledger
    return total


# Event recipes of the encoder's building blocks


def motion_events(
    width: int, height: int, factor: int, motion: MotionConfig
) -> list[Event]:
    """Downsampling of three frames plus bidirectional block search at ``factor``."""
    grid_w, grid_h = width // factor, height // factor
    search = MotionSearchEvent(
        grid_w, grid_h, motion.block_size, motion.search_range, motion.refinement
    )
    events: list[Event] = [search, search]
    if factor > 1:
        events += [DownsampleEvent(width, height, factor)] * 3
    return events


def compensation_events(width: int, height: int, factor: int) -> list[Event]:
    events: list[Event] = [WarpEvent(width, height)] * 2
    if factor > 1:
        events += [ResampleEvent(width, height)] * 2
    return events


def evaluation_events(
    width: int, height: int, factor: int, motion: MotionConfig
) -> list[Event]:
    """One warped-quality candidate evaluation."""
    return (
        motion_events(width, height, factor, motion)
        + compensation_events(width, height, factor)
        + [PredictionErrorEvent(width, height)] * 2
    )


def residual_events(width: int, height: int) -> list[Event]:
    """Forward and inverse transform plus quantization and entropy coding."""
    return [
        TransformEvent(width, height),
        TransformEvent(width, height),
        QuantEntropyEvent(width, height),
    ]


def encode_events(
    width: int,
    height: int,
    factor: int,
    motion: MotionConfig,
    reuse_motion: bool = False,
) -> list[Event]:
    """A B-frame encode; ``reuse_motion`` drops the search already paid for."""
    events = [] if reuse_motion else motion_events(width, height, factor, motion)
    events += compensation_events(width, height, factor)
    return events + residual_events(width, height)


def intra_events(width: int, height: int) -> list[Event]:
    return residual_events(width, height)


def classifier_events(
    widths: tuple[int, ...], num_outputs: int, size: int = INPUT_SIZE
) -> list[Event]:
    return [ClassifierEvent(tuple(widths), num_outputs, size)]


# Private helper functions


def _round_up(value: int, block: int) -> int:
    return -(-value // block) * block


def _blocks(width: int, height: int) -> int:
    return (width // BLOCK) * (height // BLOCK)
