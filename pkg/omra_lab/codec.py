"""
Simplified B-frame codec with explicit bit accounting.

A B-frame stream is: a 4-bit factor header, the two block-flow fields coded
as signed exp-Golomb residuals against a zero predictor, then the 8x8 DCT
residual of the bi-prediction. Intra streams carry only the transform
coefficients of the frame itself (offset by 128). Encoder and decoder share
every reconstruction step, so the decoder output is bit-exact.
"""

import struct

import attrs
import numpy as np
from returns.result import Failure, Result, Success
from scipy import fft

from .entropy import (
    BLOCK,
    Bitstream,
    BitReader,
    BitstreamError,
    BitWriter,
    read_block_levels,
    write_block_levels,
)
from .frame_io import Frame, mse, round_half_away, to_samples
from .gop import GopConfig, build_schedule
from .motion import (
    FlowField,
    MotionConfig,
    estimate_bidirectional,
    resample_flow,
    warp,
)
from .types import FACTORS, FlowPrecision, Refinement, factor_index

HEADER_BITS = 4
CONTAINER_MAGIC = b"OMRL"
CONTAINER_VERSION = 1
RATE_LADDER: tuple[tuple[float, float], ...] = (
    (24.0, 0.4),
    (16.0, 1.0),
    (10.0, 2.5),
    (6.0, 6.0),
)

_CONTAINER_HEADER = struct.Struct("<4sBIIIdBdIIBBB")
_FRAME_LENGTH = struct.Struct("<I")


@attrs.frozen
class QuantConfig:
    """Residual quantizer step, flow precision and RD Lagrange multiplier."""

    q_step: float = 16.0
    flow_precision: FlowPrecision = FlowPrecision.HALF_PEL
    lmbda: float = 1.0

    def __attrs_post_init__(self) -> None:
        if self.q_step < 1:
            raise ValueError("q_step must be at least 1")
        if self.lmbda <= 0:
            raise ValueError("lambda must be positive")


def rate_ladder(
    ladder: tuple[tuple[float, float], ...] = RATE_LADDER,
    flow_precision: FlowPrecision = FlowPrecision.HALF_PEL,
) -> list[QuantConfig]:
    """Quant configs of a ``(q_step, lambda)`` ladder."""
    return [QuantConfig(q, flow_precision, lam) for q, lam in ladder]


def parse_rate_ladder(text: str) -> Result[tuple[tuple[float, float], ...], str]:
    """Parse ``q:lambda`` pairs separated by commas, e.g. ``24:0.4,16:1.0``."""
    ladder = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        q_step, sep, lmbda = item.partition(":")
        if not sep:
            return Failure(f"Rate point '{item}' is not of the form q:lambda")
        try:
            ladder.append((float(q_step), float(lmbda)))
        except ValueError:
            return Failure(f"Rate point '{item}' is not numeric")
    if not ladder:
        return Failure("Rate ladder is empty")
    return Success(tuple(ladder))


@attrs.frozen
class EncodeResult:
    """One coded frame with its reconstruction and rate breakdown."""

    bitstream: Bitstream
    recon: Frame
    distortion: float
    factor: int | None = None
    header_bits: int = 0
    flow_bits: int = 0
    residual_bits: int = 0

    @property
    def rate(self) -> int:
        return self.bitstream.bit_count

    @property
    def stats(self) -> tuple[float, int]:
        return self.distortion, self.rate


@attrs.frozen
class RdEntry:
    factor: int
    distortion: float
    rate: int
    cost: float


@attrs.frozen
class RdRecord:
    """RD outcome of every downsampling factor tried on one frame."""

    lmbda: float
    entries: tuple[RdEntry, ...]

    def __attrs_post_init__(self) -> None:
        if tuple(e.factor for e in self.entries) != FACTORS:
            raise ValueError(f"RdRecord needs one entry per factor {FACTORS}")

    def entry(self, factor: int) -> RdEntry:
        return self.entries[factor_index(factor)]

    @property
    def costs(self) -> list[float]:
        return [e.cost for e in self.entries]

    @property
    def best_factor(self) -> int:
        """Factor of minimum cost, ties toward the smaller factor."""
        return FACTORS[int(np.argmin(self.costs))]

    @classmethod
    def from_results(cls, results: dict[int, EncodeResult], lmbda: float) -> "RdRecord":
        return cls(
            lmbda,
            tuple(
                RdEntry(
                    factor=s,
                    distortion=results[s].distortion,
                    rate=results[s].rate,
                    cost=rd_cost(results[s].distortion, results[s].rate, lmbda),
                )
                for s in FACTORS
            ),
        )


def rd_cost(distortion: float, rate: float, lmbda: float) -> float:
    """Lagrangian cost ``lambda * D + r``."""
    if distortion < 0 or rate < 0:
        raise ValueError("Distortion and rate must be non-negative")
    return lmbda * distortion + rate


# Frame coding


def encode_bframe(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    factor: int,
    cfg: QuantConfig,
    motion: MotionConfig | None = None,
    flows: tuple[FlowField, FlowField] | None = None,
) -> EncodeResult:
    """
    Code ``x_t`` from two reconstructed references, motion at scale ``factor``.

    ``flows`` lets a caller that already estimated motion at this scale (a
    warped-quality search) skip the second estimation.
    """
    motion = motion or MotionConfig()
    if factor not in FACTORS:
        raise ValueError(f"Downsampling factor must be one of {FACTORS}")
    if not x_t.shape == ref_past.shape == ref_future.shape:
        raise ValueError("Dimension mismatch between frame and references")
    if flows is None:
        flows = estimate_bidirectional(x_t, ref_past, ref_future, factor, motion)
    elif any(flow.scale != factor for flow in flows):
        raise ValueError(f"Precomputed flows were not estimated at scale {factor}")

    header = BitWriter()
    header.write_bits(factor, HEADER_BITS)

    flow_bits = BitWriter()
    decoded = []
    for flow in flows:
        codes = _quantize_flow(flow.block_vectors(motion.block_size), cfg)
        for dx, dy in codes.reshape(-1, 2):
            flow_bits.write_se(int(dx))
            flow_bits.write_se(int(dy))
        decoded.append(_dequantized_flow(codes, flow, motion, cfg))

    prediction = bi_predict(ref_past, ref_future, *decoded)
    residual = x_t.samples.astype(np.int64) - prediction
    levels = quantize(forward_dct(residual), cfg.q_step)

    residual_bits = BitWriter()
    _write_levels(residual_bits, levels)
    recon = Frame(to_samples(prediction + inverse_dct(dequantize(levels, cfg.q_step))))

    writer = BitWriter()
    for part in (header, flow_bits, residual_bits):
        writer.extend(part)
    return EncodeResult(
        bitstream=writer.to_bitstream(),
        recon=recon,
        distortion=mse(x_t, recon),
        factor=factor,
        header_bits=len(header),
        flow_bits=len(flow_bits),
        residual_bits=len(residual_bits),
    )


def decode_bframe(
    stream: Bitstream,
    ref_past: Frame,
    ref_future: Frame,
    cfg: QuantConfig,
    motion: MotionConfig | None = None,
) -> Result[Frame, str]:
    """Rebuild a B-frame; fails on malformed or exhausted streams."""
    motion = motion or MotionConfig()
    try:
        reader = BitReader(stream)
        factor = reader.read_bits(HEADER_BITS)
        if factor not in FACTORS:
            return Failure(f"Malformed stream: invalid factor code {factor}")

        height, width = ref_past.shape
        grid_h, grid_w = height // factor, width // factor
        blocks_h = -(-grid_h // motion.block_size)
        blocks_w = -(-grid_w // motion.block_size)

        decoded = []
        for _ in range(2):
            codes = np.array(
                [reader.read_se() for _ in range(blocks_h * blocks_w * 2)],
                dtype=np.int64,
            ).reshape(blocks_h, blocks_w, 2)
            shell = FlowField(np.zeros((grid_h, grid_w, 2)), factor)
            decoded.append(_dequantized_flow(codes, shell, motion, cfg))

        prediction = bi_predict(ref_past, ref_future, *decoded)
        levels = _read_levels(reader, height, width)
        _expect_end(reader)
        residual = inverse_dct(dequantize(levels, cfg.q_step))
        return Success(Frame(to_samples(prediction + residual)))
    except BitstreamError as e:
        return Failure(str(e))


def read_factor(stream: Bitstream) -> Result[int, str]:
    """Downsampling factor from a B-frame header."""
    try:
        factor = BitReader(stream).read_bits(HEADER_BITS)
    except BitstreamError as e:
        return Failure(str(e))
    if factor not in FACTORS:
        return Failure(f"Malformed stream: invalid factor code {factor}")
    return Success(factor)


def encode_intra(x_t: Frame, cfg: QuantConfig) -> EncodeResult:
    """Transform-code a frame without prediction."""
    levels = quantize(forward_dct(x_t.samples.astype(np.int64) - 128), cfg.q_step)
    writer = BitWriter()
    _write_levels(writer, levels)
    recon = Frame(to_samples(128 + inverse_dct(dequantize(levels, cfg.q_step))))
    return EncodeResult(
        bitstream=writer.to_bitstream(),
        recon=recon,
        distortion=mse(x_t, recon),
        residual_bits=len(writer),
    )


def decode_intra(
    stream: Bitstream, width: int, height: int, cfg: QuantConfig
) -> Result[Frame, str]:
    try:
        reader = BitReader(stream)
        levels = _read_levels(reader, height, width)
        _expect_end(reader)
        return Success(
            Frame(to_samples(128 + inverse_dct(dequantize(levels, cfg.q_step))))
        )
    except BitstreamError as e:
        return Failure(str(e))


# Shared reconstruction steps


def bi_predict(
    ref_past: Frame, ref_future: Frame, flow_past: FlowField, flow_future: FlowField
) -> np.ndarray:
    """Rounded average of both references warped by full-resolution flows."""
    past = warp(ref_past, resample_flow(flow_past, 1)).samples.astype(np.int64)
    future = warp(ref_future, resample_flow(flow_future, 1)).samples.astype(np.int64)
    return (past + future + 1) // 2


def forward_dct(plane: np.ndarray) -> np.ndarray:
    """Orthonormal 8x8 type-II DCT of every block; shape (by, bx, 8, 8)."""
    blocks = _to_blocks(plane.astype(np.float64))
    return fft.dctn(blocks, type=2, norm="ortho", axes=(2, 3))


def inverse_dct(coefficients: np.ndarray) -> np.ndarray:
    return _from_blocks(fft.idctn(coefficients, type=2, norm="ortho", axes=(2, 3)))


def quantize(coefficients: np.ndarray, q_step: float) -> np.ndarray:
    """Dead-zone quantizer: ``sign(c) * floor(|c| / q)``."""
    return (np.sign(coefficients) * np.floor(np.abs(coefficients) / q_step)).astype(
        np.int64
    )


def dequantize(levels: np.ndarray, q_step: float) -> np.ndarray:
    """Reconstruct nonzero levels at the centre of their bin."""
    magnitude = np.where(levels != 0, np.abs(levels) + 0.5, 0.0)
    return np.sign(levels) * magnitude * q_step


# Sequence container


@attrs.frozen
class ContainerHeader:
    gop: GopConfig
    quant: QuantConfig
    width: int
    height: int
    motion: MotionConfig


def encode_container(header: ContainerHeader, streams: list[Bitstream]) -> bytes:
    """``OMRL`` container: fixed header then length-prefixed frames in coding order."""
    packed = _CONTAINER_HEADER.pack(
        CONTAINER_MAGIC,
        CONTAINER_VERSION,
        header.gop.gop_size,
        header.gop.intra_period,
        header.gop.num_frames,
        header.quant.q_step,
        list(FlowPrecision).index(header.quant.flow_precision),
        header.quant.lmbda,
        header.width,
        header.height,
        header.motion.block_size,
        header.motion.search_range,
        list(Refinement).index(header.motion.refinement),
    )
    body = b"".join(
        _FRAME_LENGTH.pack(stream.bit_count) + stream.payload for stream in streams
    )
    return packed + body


def decode_container(
    data: bytes,
) -> Result[tuple[ContainerHeader, list[Bitstream]], str]:
    """Split a container into its header and per-frame streams."""
    if len(data) < _CONTAINER_HEADER.size:
        return Failure("Malformed container: header too short")
    fields = _CONTAINER_HEADER.unpack_from(data)
    if fields[0] != CONTAINER_MAGIC:
        return Failure("Malformed container: bad magic")
    if fields[1] != CONTAINER_VERSION:
        return Failure(f"Unsupported container version {fields[1]}")
    try:
        header = ContainerHeader(
            gop=GopConfig(fields[2], fields[3], fields[4]),
            quant=QuantConfig(fields[5], list(FlowPrecision)[fields[6]], fields[7]),
            width=fields[8],
            height=fields[9],
            motion=MotionConfig(fields[10], fields[11], list(Refinement)[fields[12]]),
        )
    except (ValueError, IndexError) as e:
        return Failure(f"Malformed container: {e}")

    streams = []
    offset = _CONTAINER_HEADER.size
    while offset < len(data):
        if offset + _FRAME_LENGTH.size > len(data):
            return Failure("Malformed container: truncated frame length")
        (bit_count,) = _FRAME_LENGTH.unpack_from(data, offset)
        offset += _FRAME_LENGTH.size
        size = (bit_count + 7) // 8
        if offset + size > len(data):
            return Failure("Malformed container: truncated frame payload")
        streams.append(Bitstream(data[offset : offset + size], bit_count))
        offset += size

    if len(streams) != header.gop.num_frames:
        return Failure(
            f"Malformed container: {len(streams)} frames, "
            f"expected {header.gop.num_frames}"
        )
    return Success((header, streams))


def decode_sequence(data: bytes) -> Result[list[Frame], str]:
    """Decode every frame of a container; frames come back in display order."""
    return decode_container(data).bind(lambda parsed: decode_frames(*parsed))


def decode_frames(
    header: ContainerHeader, streams: list[Bitstream]
) -> Result[list[Frame], str]:
    """Reconstruct the frames of an already parsed container."""
    decoded: dict[int, Frame] = {}
    for slot, stream in zip(build_schedule(header.gop), streams, strict=True):
        if slot.is_intra:
            result = decode_intra(stream, header.width, header.height, header.quant)
        else:
            result = decode_bframe(
                stream,
                decoded[slot.ref_past],
                decoded[slot.ref_future],
                header.quant,
                header.motion,
            )
        match result:
            case Success(frame):
                decoded[slot.poc] = frame
            case Failure(message):
                return Failure(f"Frame {slot.poc}: {message}")
    return Success([decoded[poc] for poc in sorted(decoded)])


# Private helper functions


def _to_blocks(plane: np.ndarray) -> np.ndarray:
    rows, cols = plane.shape
    blocks = plane.reshape(rows // BLOCK, BLOCK, cols // BLOCK, BLOCK)
    return blocks.transpose(0, 2, 1, 3)


def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    by, bx = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(by * BLOCK, bx * BLOCK)


def _write_levels(writer: BitWriter, levels: np.ndarray) -> None:
    for row in levels:
        for block in row:
            write_block_levels(writer, block)


def _read_levels(reader: BitReader, height: int, width: int) -> np.ndarray:
    by, bx = height // BLOCK, width // BLOCK
    levels = np.zeros((by, bx, BLOCK, BLOCK), dtype=np.int64)
    for i in range(by):
        for j in range(bx):
            levels[i, j] = read_block_levels(reader)
    return levels


def _expect_end(reader: BitReader) -> None:
    if reader.remaining:
        raise BitstreamError(f"Malformed stream: {reader.remaining} trailing bits")


def _flow_unit(cfg: QuantConfig) -> float:
    return 0.5 if cfg.flow_precision is FlowPrecision.HALF_PEL else 1.0


def _quantize_flow(blocks: np.ndarray, cfg: QuantConfig) -> np.ndarray:
    return round_half_away(blocks / _flow_unit(cfg)).astype(np.int64)


def _dequantized_flow(
    codes: np.ndarray, flow: FlowField, motion: MotionConfig, cfg: QuantConfig
) -> FlowField:
    return FlowField.from_block_vectors(
        codes * _flow_unit(cfg),
        motion.block_size,
        flow.grid_w,
        flow.grid_h,
        flow.scale,
    )
