"""
Hierarchical B-frame schedule.

Intra frames sit at every multiple of the intra period and on the final
frame. Every intra-bounded interval is bisected recursively; each midpoint is
a B-frame predicted from the two interval ends, so a B-frame at distance ``k``
from its references belongs to temporal layer ``log2(gop) - log2(k)``.
"""

import math
from pathlib import Path

import attrs
import polars as pl
from returns.result import Failure, Result, Success

from .types import FrameKind

GOP_SIZES = (2, 4, 8, 16, 32)
SCHEDULE_COLUMNS = ["poc", "kind", "layer", "ref_past", "ref_future", "k"]


@attrs.frozen
class GopConfig:
    """GOP geometry of a coded sequence."""

    gop_size: int = 32
    intra_period: int = 32
    num_frames: int = 33

    def __attrs_post_init__(self) -> None:
        if self.gop_size not in GOP_SIZES:
            raise ValueError(f"gop_size must be one of {GOP_SIZES}")
        if self.intra_period < self.gop_size or self.intra_period % self.gop_size:
            raise ValueError("intra_period must be a multiple of gop_size")
        if self.num_frames < 1:
            raise ValueError("num_frames must be at least 1")

    @property
    def num_b_layers(self) -> int:
        return int(math.log2(self.gop_size))


@attrs.frozen
class FrameSlot:
    """One entry of the coding schedule."""

    poc: int
    kind: FrameKind
    temporal_layer: int = 0
    ref_past: int | None = None
    ref_future: int | None = None

    @property
    def k(self) -> int:
        """Distance to either reference; zero for intra frames."""
        if self.ref_past is None:
            return 0
        return self.poc - self.ref_past

    @property
    def is_intra(self) -> bool:
        return self.kind is FrameKind.INTRA


def num_b_layers(config: GopConfig) -> int:
    """Number of B temporal layers in a full GOP."""
    return config.num_b_layers


def layer_for_distance(k: int, config: GopConfig) -> int:
    """Temporal layer of a B-frame whose references are ``k`` frames away."""
    # Intervals longer than one GOP (intra_period > gop_size) stay in layer 1.
    return max(1, config.num_b_layers - int(math.log2(k)))


def build_schedule(config: GopConfig) -> list[FrameSlot]:
    """Frame slots in coding order."""
    anchors = _intra_positions(config)
    schedule = [FrameSlot(poc=anchors[0], kind=FrameKind.INTRA)]

    for past, future in zip(anchors, anchors[1:], strict=False):
        schedule.append(FrameSlot(poc=future, kind=FrameKind.INTRA))
        bframes = _bisect(past, future, config)
        schedule.extend(sorted(bframes, key=lambda s: (-s.k, s.poc)))

    return schedule


def temporal_layer_of(poc: int, config: GopConfig) -> int:
    """Temporal layer of a display index; 0 for intra frames."""
    if not 0 <= poc < config.num_frames:
        raise ValueError(f"poc {poc} outside [0, {config.num_frames})")
    layers = {slot.poc: slot.temporal_layer for slot in build_schedule(config)}
    return layers[poc]


def layer_histogram(schedule: list[FrameSlot]) -> dict[int, int]:
    """Number of frames per temporal layer."""
    histogram: dict[int, int] = {}
    for slot in schedule:
        histogram[slot.temporal_layer] = histogram.get(slot.temporal_layer, 0) + 1
    return dict(sorted(histogram.items()))


def schedule_frame(schedule: list[FrameSlot]) -> pl.DataFrame:
    """Schedule as a table with the dump columns."""
    return pl.DataFrame(
        {
            "poc": [s.poc for s in schedule],
            "kind": [s.kind.value for s in schedule],
            "layer": [s.temporal_layer for s in schedule],
            "ref_past": [s.ref_past for s in schedule],
            "ref_future": [s.ref_future for s in schedule],
            "k": [s.k for s in schedule],
        },
        schema={
            "poc": pl.Int64,
            "kind": pl.Utf8,
            "layer": pl.Int64,
            "ref_past": pl.Int64,
            "ref_future": pl.Int64,
            "k": pl.Int64,
        },
    )


def write_schedule(
    schedule: list[FrameSlot], file_path: str | Path
) -> Result[Path, str]:
    """Dump the schedule as CSV (I/O operation)."""
    try:
        schedule_frame(schedule).write_csv(file_path)
        return Success(Path(file_path))
    except OSError as e:
        return Failure(f"Could not write schedule: {e}")


# Private helper functions


def _intra_positions(config: GopConfig) -> list[int]:
    """Intra anchors, including split points of a truncated tail."""
    last = config.num_frames - 1
    positions = list(range(0, last + 1, config.intra_period))
    if positions[-1] != last:
        tail_start = positions[-1]
        positions.extend(_tail_anchors(tail_start, last))
    return positions


def _tail_anchors(start: int, end: int) -> list[int]:
    """Split a non-dyadic tail at the largest power-of-two offset, recursively."""
    anchors = []
    while not _is_power_of_two(end - start):
        start += 1 << ((end - start).bit_length() - 1)
        anchors.append(start)
    anchors.append(end)
    return anchors


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


def _bisect(past: int, future: int, config: GopConfig) -> list[FrameSlot]:
    if future - past < 2:
        return []
    mid = (past + future) // 2
    slot = FrameSlot(
        poc=mid,
        kind=FrameKind.BFRAME,
        temporal_layer=layer_for_distance(mid - past, config),
        ref_past=past,
        ref_future=future,
    )
    return [slot, *_bisect(past, mid, config), *_bisect(mid, future, config)]
