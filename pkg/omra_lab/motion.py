"""
Multi-resolution block motion estimation, flow resampling and warping.

Flow vectors are stored in units of their own grid. A field estimated on
frames downsampled by ``S`` has ``W/S x H/S`` cells; resampling it to another
scale rescales both the grid and the vectors. Warping is backward: the output
pixel at ``(x, y)`` samples the reference at ``(x + dx, y + dy)``.
"""

import struct
from pathlib import Path

import attrs
import numpy as np
from returns.result import Failure, Result, Success
from scipy import ndimage

from .frame_io import Frame, mse, to_samples
from .types import FACTORS, Refinement

BLOCK_SIZES = (4, 8, 16)
FLOW_HEADER = struct.Struct("<iii")


@attrs.frozen
class MotionConfig:
    """Block-matching parameters; the search range is in grid pixels."""

    block_size: int = 8
    search_range: int = 8
    refinement: Refinement = Refinement.HALF_PEL

    def __attrs_post_init__(self) -> None:
        if self.block_size not in BLOCK_SIZES:
            raise ValueError(f"block_size must be one of {BLOCK_SIZES}")
        if self.search_range < 1:
            raise ValueError("search_range must be at least 1")


@attrs.frozen(eq=False)
class FlowField:
    """Dense motion-vector grid; ``vectors[y, x] = (dx, dy)``."""

    vectors: np.ndarray = attrs.field(converter=np.asarray)
    scale: int = 1

    def __attrs_post_init__(self) -> None:
        if self.vectors.ndim != 3 or self.vectors.shape[2] != 2:
            raise ValueError("Flow vectors must have shape (grid_h, grid_w, 2)")
        if self.scale not in FACTORS:
            raise ValueError(f"Flow scale must be one of {FACTORS}")
        self.vectors.setflags(write=False)

    @property
    def grid_w(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def grid_h(self) -> int:
        return int(self.vectors.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowField):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(
            self.vectors, other.vectors
        )

    @classmethod
    def uniform(
        cls, grid_w: int, grid_h: int, dx: float, dy: float, scale: int = 1
    ) -> "FlowField":
        vectors = np.empty((grid_h, grid_w, 2), dtype=np.float64)
        vectors[..., 0], vectors[..., 1] = dx, dy
        return cls(vectors, scale)

    def block_vectors(self, block_size: int) -> np.ndarray:
        """One vector per block (the block's top-left cell)."""
        return np.array(self.vectors[::block_size, ::block_size])

    @classmethod
    def from_block_vectors(
        cls, blocks: np.ndarray, block_size: int, grid_w: int, grid_h: int, scale: int
    ) -> "FlowField":
        """Replicate per-block vectors over every cell of the block."""
        dense = np.repeat(np.repeat(blocks, block_size, axis=0), block_size, axis=1)
        return cls(np.array(dense[:grid_h, :grid_w], dtype=np.float64), scale)


# Resolution changes


def downsample_frame(frame: Frame, factor: int) -> Frame:
    """Repeated 2x2 box averaging, rounding half away from zero."""
    if factor not in FACTORS:
        raise ValueError(f"Downsampling factor must be one of {FACTORS}")
    if frame.width % factor or frame.height % factor:
        raise ValueError(
            f"{frame.width}x{frame.height} is not divisible by factor {factor}"
        )
    plane = frame.samples.astype(np.int64)
    for _ in range(int(np.log2(factor))):
        h, w = plane.shape
        sums = plane.reshape(h // 2, 2, w // 2, 2).sum(axis=(1, 3))
        plane = (sums + 2) // 4
    return frame if factor == 1 else Frame(plane.astype(np.uint8))


def resample_flow(flow: FlowField, to_scale: int) -> FlowField:
    """Bilinear resampling of the vector grid to another scale."""
    if to_scale not in FACTORS:
        raise ValueError(f"Target scale must be one of {FACTORS}")
    if to_scale == flow.scale:
        return flow

    ratio = flow.scale / to_scale
    grid_h = int(round(flow.grid_h * ratio))
    grid_w = int(round(flow.grid_w * ratio))
    # Pixel-centre alignment between the two grids.
    ys = (np.arange(grid_h) + 0.5) / ratio - 0.5
    xs = (np.arange(grid_w) + 0.5) / ratio - 0.5
    coords = np.meshgrid(ys, xs, indexing="ij")

    vectors = np.stack(
        [
            ndimage.map_coordinates(
                flow.vectors[..., c], coords, order=1, mode="nearest"
            )
            for c in range(2)
        ],
        axis=-1,
    )
    return FlowField(vectors * ratio, to_scale)


# Estimation


def estimate_flow(
    cur: Frame, ref: Frame, cfg: MotionConfig | None = None, scale: int = 1
) -> FlowField:
    """
    Full-search SAD block matching of ``cur`` against ``ref``.

    Candidates are visited in order of ``(|dx| + |dy|, dy, dx)`` and only a
    strictly smaller SAD replaces the incumbent, so ties resolve toward the
    shortest vector. The optional half-pel pass tries the eight neighbours of
    the integer winner with bilinear samples, within the search range.
    """
    cfg = cfg or MotionConfig()
    if cur.shape != ref.shape:
        raise ValueError(f"Dimension mismatch: {cur.shape} vs {ref.shape}")

    block, reach = cfg.block_size, cfg.search_range
    height, width = cur.shape
    pad_h, pad_w = -height % block, -width % block
    current = np.pad(cur.as_float(), ((0, pad_h), (0, pad_w)), mode="edge")
    reference = np.pad(
        ref.as_float(), ((reach, reach + pad_h), (reach, reach + pad_w)), mode="edge"
    )
    rows, cols = current.shape

    candidates = integer_candidates(reach)
    sads = np.empty((len(candidates), rows // block, cols // block))
    for i, (dx, dy) in enumerate(candidates):
        top, left = reach + dy, reach + dx
        shifted = reference[top : top + rows, left : left + cols]
        sads[i] = _block_sums(np.abs(current - shifted), block)

    # argmin returns the first minimum, i.e. the tie-break order of candidates.
    winner = np.argmin(sads, axis=0)
    best = np.asarray(candidates, dtype=np.float64)[winner]
    best_sad = np.take_along_axis(sads, winner[None], axis=0)[0]

    if cfg.refinement is Refinement.HALF_PEL:
        best = _refine_half_pel(current, ref.as_float(), best, best_sad, cfg)

    return FlowField.from_block_vectors(best, block, width, height, scale)


def integer_candidates(reach: int) -> list[tuple[int, int]]:
    """Search positions in tie-break order."""
    positions = [
        (dx, dy) for dy in range(-reach, reach + 1) for dx in range(-reach, reach + 1)
    ]
    return sorted(positions, key=lambda v: (abs(v[0]) + abs(v[1]), v[1], v[0]))


def estimate_bidirectional(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    factor: int,
    cfg: MotionConfig | None = None,
) -> tuple[FlowField, FlowField]:
    """Flows toward both references, estimated on frames downsampled by ``factor``."""
    cur = downsample_frame(x_t, factor)
    return (
        estimate_flow(cur, downsample_frame(ref_past, factor), cfg, factor),
        estimate_flow(cur, downsample_frame(ref_future, factor), cfg, factor),
    )


# Compensation


def warp(ref: Frame, flow: FlowField) -> Frame:
    """Backward bilinear warp with border clamping, rounded to 8 bits."""
    if flow.scale != 1 or (flow.grid_h, flow.grid_w) != ref.shape:
        raise ValueError("Warping needs a full-resolution flow matching the frame")
    return Frame(to_samples(sample_bilinear(ref.as_float(), flow.vectors)))


def sample_bilinear(plane: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Sample ``plane`` at every grid cell displaced by ``vectors``; edges clamp."""
    ys, xs = np.indices(vectors.shape[:2], dtype=np.float64)
    return ndimage.map_coordinates(
        plane, [ys + vectors[..., 1], xs + vectors[..., 0]], order=1, mode="nearest"
    )


def prediction_error(
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    flow_past: FlowField,
    flow_future: FlowField,
    factor: int,
) -> float:
    """Mean of the two directional MSEs after full-resolution warping."""
    if flow_past.scale != factor or flow_future.scale != factor:
        raise ValueError(f"Flows were not estimated at scale {factor}")
    if not x_t.shape == ref_past.shape == ref_future.shape:
        raise ValueError("Dimension mismatch between frame and references")
    warped_past = warp(ref_past, resample_flow(flow_past, 1))
    warped_future = warp(ref_future, resample_flow(flow_future, 1))
    return (mse(x_t, warped_past) + mse(x_t, warped_future)) / 2


# Flow dumps (I/O operations)


def write_flow(flow: FlowField, file_path: str | Path) -> Result[Path, str]:
    """Binary dump: ``grid_w, grid_h, S`` as int32 then float32 ``(dx, dy)`` rows."""
    try:
        payload = FLOW_HEADER.pack(flow.grid_w, flow.grid_h, flow.scale)
        payload += flow.vectors.astype("<f4").tobytes()
        Path(file_path).write_bytes(payload)
        return Success(Path(file_path))
    except OSError as e:
        return Failure(f"Could not write flow: {e}")


def read_flow(file_path: str | Path) -> Result[FlowField, str]:
    """Read a flow dump written by ``write_flow``."""
    try:
        payload = Path(file_path).read_bytes()
    except OSError as e:
        return Failure(f"Could not read flow: {e}")

    if len(payload) < FLOW_HEADER.size:
        return Failure("Malformed flow header")
    grid_w, grid_h, scale = FLOW_HEADER.unpack_from(payload)
    body = payload[FLOW_HEADER.size :]
    if grid_w <= 0 or grid_h <= 0 or scale not in FACTORS:
        return Failure("Malformed flow header")
    if len(body) != grid_w * grid_h * 2 * 4:
        return Failure("Truncated flow payload")
    vectors = np.frombuffer(body, dtype="<f4").reshape(grid_h, grid_w, 2)
    return Success(FlowField(vectors.astype(np.float64), scale))


# Private helper functions


def _block_sums(values: np.ndarray, block: int) -> np.ndarray:
    rows, cols = values.shape
    return values.reshape(rows // block, block, cols // block, block).sum(axis=(1, 3))


def _refine_half_pel(
    current: np.ndarray,
    reference: np.ndarray,
    best: np.ndarray,
    best_sad: np.ndarray,
    cfg: MotionConfig,
) -> np.ndarray:
    block, reach = cfg.block_size, cfg.search_range
    offsets = [offset for offset in integer_candidates(1) if offset != (0, 0)]
    base = best.copy()
    best = best.copy()
    best_sad = best_sad.copy()

    for ox, oy in offsets:
        trial = base + np.array([ox, oy]) * 0.5
        valid = np.all(np.abs(trial) <= reach, axis=-1)
        dense = np.repeat(np.repeat(trial, block, axis=0), block, axis=1)
        sampled = sample_bilinear(reference, dense)
        sad = _block_sums(np.abs(current - sampled), block)
        improved = valid & (sad < best_sad)
        best[improved] = trial[improved]
        best_sad[improved] = sad[improved]
    return best
