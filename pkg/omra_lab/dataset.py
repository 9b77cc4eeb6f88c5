"""
Oracle-labelled training samples.

Every B-frame of every sequence is coded at each rate point with the
exhaustive search; the four RD costs become a hard label (argmin) and a soft
label. References are the reconstructions chosen by the oracle, exactly as
the encoder would see them.

Binary dataset layout (little-endian)::

    b"OMDS" | u32 sample count
    per sample: i32 sequence | i32 poc | i32 layer | i32 rate point
                u8 hard label | u16 input side
                4 x f64 RD costs | 4 x f64 soft label
                3 x side x side f32 input tensor

A CSV manifest with one row per sample is written next to it.
"""

import logging
import struct
from pathlib import Path

import attrs
import numpy as np
import polars as pl
from returns.result import Failure, Result, Success

from .classifier import INPUT_SIZE, IN_CHANNELS, preprocess
from .codec import QuantConfig, RdRecord, encode_intra
from .frame_io import Frame
from .gop import GopConfig, build_schedule, layer_histogram
from .losses import DEFAULT_SOFT_TEMPERATURE, soft_label
from .motion import MotionConfig
from .search import omra_exhaustive
from .types import FACTORS

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"OMDS"
MANIFEST_SUFFIX = ".manifest.csv"

_DATASET_HEADER = struct.Struct("<4sI")
_SAMPLE_HEADER = struct.Struct("<iiiiBH")
_LABELS = struct.Struct("<8d")


@attrs.frozen(eq=False)
class LabeledSample:
    """One classifier training example with its oracle labels."""

    inputs: np.ndarray
    rd_costs: np.ndarray
    hard_label: int
    soft_label: np.ndarray
    temporal_layer: int
    rate_point: int
    poc: int = 0
    sequence: int = 0

    def __attrs_post_init__(self) -> None:
        if abs(float(self.soft_label.sum()) - 1.0) > 1e-9:
            raise ValueError("Soft label must sum to 1")
        if int(np.argmax(self.soft_label)) != self.hard_label:
            raise ValueError("Soft label argmax must match the hard label")

    @property
    def optimal_factor(self) -> int:
        return FACTORS[self.hard_label]

    @property
    def full_resolution(self) -> bool:
        """Binary target of the Bi-Class network."""
        return self.hard_label == 0


def make_sample(
    inputs: np.ndarray,
    record: RdRecord,
    temporal_layer: int,
    rate_point: int,
    temperature: float = DEFAULT_SOFT_TEMPERATURE,
    poc: int = 0,
    sequence: int = 0,
) -> LabeledSample:
    costs = np.asarray(record.costs, dtype=np.float64)
    return LabeledSample(
        inputs=inputs,
        rd_costs=costs,
        hard_label=int(np.argmin(costs)),
        soft_label=soft_label(costs, temperature),
        temporal_layer=temporal_layer,
        rate_point=rate_point,
        poc=poc,
        sequence=sequence,
    )


def build_dataset(
    sequences: list[list[Frame]],
    gop: GopConfig,
    quants: list[QuantConfig],
    motion: MotionConfig | None = None,
    temperature: float = DEFAULT_SOFT_TEMPERATURE,
    input_size: int = INPUT_SIZE,
) -> list[LabeledSample]:
    """Samples ordered by sequence, then rate point, then coding order."""
    samples = []
    for seq_index, frames in enumerate(sequences):
        config = attrs.evolve(gop, num_frames=len(frames))
        for rate_point, cfg in enumerate(quants):
            samples.extend(
                _label_sequence(
                    frames,
                    config,
                    cfg,
                    motion,
                    temperature,
                    input_size,
                    seq_index,
                    rate_point,
                )
            )
        logger.info(
            "Labelled sequence %d (%d frames, frames per layer %s)",
            seq_index,
            len(frames),
            layer_histogram(build_schedule(config)),
        )
    return samples


def stack_inputs(samples: list[LabeledSample]) -> np.ndarray:
    return np.stack([s.inputs for s in samples])


# Dataset files (I/O operations)


def manifest_frame(samples: list[LabeledSample]) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "sequence": [s.sequence for s in samples],
            "poc": [s.poc for s in samples],
            "layer": [s.temporal_layer for s in samples],
            "rate_point": [s.rate_point for s in samples],
            "S_opt": [s.optimal_factor for s in samples],
            **{
                f"cost_{factor}": [float(s.rd_costs[i]) for s in samples]
                for i, factor in enumerate(FACTORS)
            },
        },
        schema={
            "sequence": pl.Int64,
            "poc": pl.Int64,
            "layer": pl.Int64,
            "rate_point": pl.Int64,
            "S_opt": pl.Int64,
            **{f"cost_{factor}": pl.Float64 for factor in FACTORS},
        },
    )


def manifest_path(file_path: str | Path) -> Path:
    path = Path(file_path)
    return path.with_name(path.name + MANIFEST_SUFFIX)


def write_dataset(
    samples: list[LabeledSample], file_path: str | Path
) -> Result[Path, str]:
    """Write the binary dataset and its CSV manifest."""
    chunks = [_DATASET_HEADER.pack(DATASET_MAGIC, len(samples))]
    for s in samples:
        chunks.append(
            _SAMPLE_HEADER.pack(
                s.sequence,
                s.poc,
                s.temporal_layer,
                s.rate_point,
                s.hard_label,
                s.inputs.shape[-1],
            )
        )
        chunks.append(_LABELS.pack(*s.rd_costs, *s.soft_label))
        chunks.append(s.inputs.astype("<f4").tobytes())
    try:
        Path(file_path).write_bytes(b"".join(chunks))
        manifest_frame(samples).write_csv(manifest_path(file_path))
        return Success(Path(file_path))
    except OSError as e:
        return Failure(f"Could not write dataset: {e}")


def read_dataset(file_path: str | Path) -> Result[list[LabeledSample], str]:
    """Read a dataset written by ``write_dataset``."""
    try:
        data = Path(file_path).read_bytes()
    except OSError as e:
        return Failure(f"Could not read dataset: {e}")
    return _parse_dataset(data).alt(lambda message: f"{file_path}: {message}")


# Private helper functions


def _label_sequence(
    frames: list[Frame],
    gop: GopConfig,
    cfg: QuantConfig,
    motion: MotionConfig | None,
    temperature: float,
    input_size: int,
    sequence: int,
    rate_point: int,
) -> list[LabeledSample]:
    recons: dict[int, Frame] = {}
    samples = []
    for slot in build_schedule(gop):
        x_t = frames[slot.poc]
        if slot.is_intra:
            recons[slot.poc] = encode_intra(x_t, cfg).recon
            continue
        past, future = recons[slot.ref_past], recons[slot.ref_future]
        result = omra_exhaustive(x_t, past, future, cfg, motion)
        recons[slot.poc] = result.best.recon
        samples.append(
            make_sample(
                preprocess(x_t, past, future, input_size),
                result.record,
                slot.temporal_layer,
                rate_point,
                temperature,
                slot.poc,
                sequence,
            )
        )
    return samples


def _parse_dataset(data: bytes) -> Result[list[LabeledSample], str]:
    if len(data) < _DATASET_HEADER.size:
        return Failure("Malformed dataset: header too short")
    magic, count = _DATASET_HEADER.unpack_from(data)
    if magic != DATASET_MAGIC:
        return Failure("Malformed dataset: bad magic")

    samples = []
    offset = _DATASET_HEADER.size
    try:
        for _ in range(count):
            sequence, poc, layer, rate_point, hard, side = _SAMPLE_HEADER.unpack_from(
                data, offset
            )
            offset += _SAMPLE_HEADER.size
            labels = np.array(_LABELS.unpack_from(data, offset))
            offset += _LABELS.size
            size = IN_CHANNELS * side * side
            if offset + 4 * size > len(data):
                return Failure("Malformed dataset: truncated input tensor")
            tensor = np.frombuffer(data, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            samples.append(
                LabeledSample(
                    inputs=tensor.reshape(IN_CHANNELS, side, side).astype(np.float64),
                    rd_costs=labels[:4],
                    hard_label=hard,
                    soft_label=labels[4:],
                    temporal_layer=layer,
                    rate_point=rate_point,
                    poc=poc,
                    sequence=sequence,
                )
            )
    except struct.error:
        return Failure("Malformed dataset: truncated sample header")
    except ValueError as e:
        return Failure(f"Malformed dataset: {e}")
    if offset != len(data):
        return Failure("Malformed dataset: trailing bytes")
    return Success(samples)
