"""
Luma frames, sequence files and pixel-domain quality metrics.

Two on-disk formats are supported:

- raw-planar: ``name.yraw`` holds ``frames`` luma planes back to back and a
  sidecar ``name.yraw.hdr`` carries ``width=``, ``height=``, ``frames=`` lines.
- Y4M: ``C420*`` and ``Cmono`` streams; only the luma plane is kept.
"""

import math
from pathlib import Path

import attrs
import numpy as np
from returns.iterables import Fold
from returns.result import Failure, Result, Success
from scipy import ndimage

from .config import optional_float, read_key_values, require_int
from .types import SequenceFormat

PSNR_CAP_DB = 99.0
Y4M_MAGIC = b"YUV4MPEG2"
FRAME_INDICATOR = b"FRAME"


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def to_samples(values: np.ndarray) -> np.ndarray:
    """Round and clip real values into an 8-bit sample plane."""
    return np.clip(round_half_away(values), 0, 255).astype(np.uint8)


@attrs.frozen(eq=False)
class Frame:
    """Immutable planar 8-bit luma raster, rows first."""

    samples: np.ndarray = attrs.field(converter=np.asarray)

    def __attrs_post_init__(self) -> None:
        if self.samples.ndim != 2 or self.samples.size == 0:
            raise ValueError("Frame samples must be a non-empty 2-D plane")
        if self.samples.dtype != np.uint8:
            raise ValueError(f"Frame samples must be uint8, got {self.samples.dtype}")
        self.samples.setflags(write=False)

    @property
    def width(self) -> int:
        return int(self.samples.shape[1])

    @property
    def height(self) -> int:
        return int(self.samples.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def as_float(self) -> np.ndarray:
        return self.samples.astype(np.float64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    @classmethod
    def constant(cls, width: int, height: int, value: int) -> "Frame":
        return cls(np.full((height, width), value, dtype=np.uint8))


@attrs.frozen
class SyntheticSpec:
    """Parameters of a synthetic globally translating sequence."""

    width: int
    height: int
    num_frames: int
    velocity: tuple[float, float] = (0.0, 0.0)
    texture_seed: int = 0
    occluder: tuple[int, tuple[float, float]] | None = None

    def __attrs_post_init__(self) -> None:
        check_codable_dimensions(self.width, self.height)
        if self.num_frames < 1:
            raise ValueError("num_frames must be at least 1")
        vx, vy = self.velocity
        if abs(vx) > self.width / 4 or abs(vy) > self.width / 4:
            raise ValueError("Velocity must not exceed width/4 pixels per frame")
        if self.occluder is not None and not 0 < self.occluder[0] <= min(
            self.width, self.height
        ):
            raise ValueError("Occluder size must fit inside the frame")


def check_codable_dimensions(width: int, height: int) -> None:
    """Source frames must be at least 16x16 and multiples of 16."""
    if width < 16 or height < 16 or width % 16 or height % 16:
        raise ValueError(
            f"Frame dimensions must be multiples of 16 and at least 16, "
            f"got {width}x{height}"
        )


# Quality metrics (pure functions)


def mse(a: Frame, b: Frame) -> float:
    """Mean squared sample difference."""
    if a.shape != b.shape:
        raise ValueError(f"Dimension mismatch: {a.shape} vs {b.shape}")
    diff = a.as_float() - b.as_float()
    return float(np.mean(diff * diff))


def psnr(a: Frame, b: Frame) -> float:
    """PSNR in dB, capped for identical frames."""
    error = mse(a, b)
    if error == 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(255.0**2 / error))


# Synthetic content


def smooth_texture(width: int, height: int, seed: int) -> np.ndarray:
    """Seeded white noise, box-blurred 5x5 twice, stretched to [0, 255]."""
    rng = np.random.default_rng(seed)
    noise = rng.random((height, width))
    blurred = ndimage.uniform_filter(noise, size=5, mode="wrap")
    blurred = ndimage.uniform_filter(blurred, size=5, mode="wrap")
    low, high = float(blurred.min()), float(blurred.max())
    stretched = (blurred - low) * (255.0 / max(high - low, 1e-12))
    return to_samples(stretched)


def generate_synthetic(spec: SyntheticSpec) -> list[Frame]:
    """Frames of a seeded texture translating with toroidal wrap."""
    base = smooth_texture(spec.width, spec.height, spec.texture_seed)
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    vx, vy = spec.velocity

    frames = []
    for t in range(spec.num_frames):
        shifted = ndimage.map_coordinates(
            base.astype(np.float64),
            [ys - t * vy, xs - t * vx],
            order=1,
            mode="grid-wrap",
        )
        plane = to_samples(shifted)
        if spec.occluder is not None:
            plane = _draw_occluder(plane, spec.occluder, t)
        frames.append(Frame(plane))
    return frames


def _draw_occluder(
    plane: np.ndarray, occluder: tuple[int, tuple[float, float]], t: int
) -> np.ndarray:
    size, (ovx, ovy) = occluder
    height, width = plane.shape
    top = int(round_half_away(np.array((height - size) / 2 + t * ovy)))
    left = int(round_half_away(np.array((width - size) / 2 + t * ovx)))
    rows = (top + np.arange(size)) % height
    cols = (left + np.arange(size)) % width
    out = plane.copy()
    out[np.ix_(rows, cols)] = 255
    return out


def read_synthetic_spec(file_path: str | Path) -> Result[SyntheticSpec, str]:
    """Parse a ``key=value`` synthetic spec file (I/O operation)."""
    return read_key_values(file_path).bind(_synthetic_spec_from_values)


def _synthetic_spec_from_values(values: dict[str, str]) -> Result[SyntheticSpec, str]:
    seed = require_int(values, "seed") if "seed" in values else Success(0)
    return Fold.collect(
        [
            require_int(values, "width"),
            require_int(values, "height"),
            require_int(values, "frames"),
            seed,
            optional_float(values, "vx", 0.0),
            optional_float(values, "vy", 0.0),
        ],
        Success(()),
    ).bind(
        lambda fields: _occluder_from_values(values).bind(
            lambda occluder: _build_synthetic_spec(*fields, occluder)
        )
    )


def _occluder_from_values(
    values: dict[str, str],
) -> Result[tuple[int, tuple[float, float]] | None, str]:
    if "occluder_size" not in values:
        return Success(None)
    return require_int(values, "occluder_size").bind(
        lambda size: optional_float(values, "occluder_vx", 0.0).bind(
            lambda vx: optional_float(values, "occluder_vy", 0.0).map(
                lambda vy: (size, (vx, vy))
            )
        )
    )


def _build_synthetic_spec(
    width: int,
    height: int,
    frames: int,
    seed: int,
    vx: float,
    vy: float,
    occluder: tuple[int, tuple[float, float]] | None,
) -> Result[SyntheticSpec, str]:
    try:
        return Success(SyntheticSpec(width, height, frames, (vx, vy), seed, occluder))
    except ValueError as e:
        return Failure(f"Invalid synthetic spec: {e}")


# Sequence files (I/O operations)


def detect_format(path: Path) -> SequenceFormat:
    if path.suffix.lower() == ".y4m":
        return SequenceFormat.Y4M
    return SequenceFormat.RAW_PLANAR


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".hdr")


def read_sequence(
    file_path: str | Path, fmt: SequenceFormat | None = None, crop: bool = False
) -> Result[list[Frame], str]:
    """
    Read a luma sequence in display order (I/O operation).

    With ``crop`` set, frames are cropped to the largest multiple-of-16 size
    (1920x1080 becomes 1920x1072) instead of being rejected.
    """
    path = Path(file_path)
    if not path.exists():
        return Failure(f"Could not find '{file_path}'")

    match fmt or detect_format(path):
        case SequenceFormat.Y4M:
            parsed = _read_payload(path).bind(_parse_y4m)
        case _:
            parsed = _read_raw_header(path).bind(
                lambda dims: _read_payload(path).bind(
                    lambda payload: _parse_raw(payload, *dims)
                )
            )
    return parsed.bind(lambda frames: _codable(frames, crop))


def write_sequence(
    frames: list[Frame],
    file_path: str | Path,
    fmt: SequenceFormat | None = None,
    mono: bool = False,
) -> Result[Path, str]:
    """Write frames as raw-planar (+ sidecar) or Y4M (I/O operation)."""
    if not frames:
        return Failure("Cannot write an empty sequence")
    if any(frame.shape != frames[0].shape for frame in frames):
        return Failure("All frames must share the same dimensions")

    path = Path(file_path)
    width, height = frames[0].width, frames[0].height
    try:
        match fmt or detect_format(path):
            case SequenceFormat.Y4M:
                path.write_bytes(_encode_y4m(frames, mono))
            case _:
                path.write_bytes(b"".join(f.samples.tobytes() for f in frames))
                sidecar_path(path).write_text(
                    f"width={width}\nheight={height}\nframes={len(frames)}\n",
                    encoding="utf-8",
                )
        return Success(path)
    except OSError as e:
        return Failure(f"Could not write sequence: {e}")


def _read_payload(path: Path) -> Result[bytes, str]:
    try:
        return Success(path.read_bytes())
    except OSError as e:
        return Failure(f"Could not read file: {e}")


def _read_raw_header(path: Path) -> Result[tuple[int, int, int], str]:
    header = sidecar_path(path)
    if not header.exists():
        return Failure(f"Malformed header: missing sidecar '{header.name}'")
    return read_key_values(header).bind(
        lambda values: require_int(values, "width").bind(
            lambda width: require_int(values, "height").bind(
                lambda height: require_int(values, "frames").map(
                    lambda count: (width, height, count)
                )
            )
        )
    ).alt(lambda message: f"Malformed header: {message}")


def _parse_raw(
    payload: bytes, width: int, height: int, count: int
) -> Result[list[Frame], str]:
    if width <= 0 or height <= 0 or count <= 0:
        return Failure("Malformed header: dimensions and frame count must be positive")
    if len(payload) != width * height * count:
        return Failure("Truncated payload")
    planes = np.frombuffer(payload, dtype=np.uint8).reshape(count, height, width)
    return Success([Frame(plane.copy()) for plane in planes])


def _codable(frames: list[Frame], crop: bool) -> Result[list[Frame], str]:
    height, width = frames[0].shape
    if crop:
        height, width = height - height % 16, width - width % 16
    try:
        check_codable_dimensions(width, height)
    except ValueError as e:
        return Failure(str(e))
    if (height, width) != frames[0].shape:
        frames = [Frame(f.samples[:height, :width].copy()) for f in frames]
    return Success(frames)


def _parse_y4m(payload: bytes) -> Result[list[Frame], str]:
    end = payload.find(b"\n")
    if end < 0 or not payload.startswith(Y4M_MAGIC):
        return Failure("Malformed header: not a YUV4MPEG2 stream")

    params = {
        token[:1].decode("ascii"): token[1:].decode("ascii")
        for token in payload[len(Y4M_MAGIC) : end].split()
    }
    try:
        width, height = int(params["W"]), int(params["H"])
    except (KeyError, ValueError):
        return Failure("Malformed header: missing or invalid W/H")

    colorspace = params.get("C", "420jpeg")
    if colorspace.startswith("420"):
        chroma = 2 * ((width + 1) // 2) * ((height + 1) // 2)
    elif colorspace == "mono":
        chroma = 0
    else:
        return Failure(f"Malformed header: unsupported colorspace C{colorspace}")

    luma = width * height
    frames: list[Frame] = []
    offset = end + 1
    while offset < len(payload):
        line_end = payload.find(b"\n", offset)
        if line_end < 0 or not payload.startswith(FRAME_INDICATOR, offset):
            return Failure("Malformed header: expected FRAME marker")
        start = line_end + 1
        if start + luma + chroma > len(payload):
            return Failure("Truncated payload")
        plane = np.frombuffer(payload, dtype=np.uint8, count=luma, offset=start)
        frames.append(Frame(plane.reshape(height, width).copy()))
        offset = start + luma + chroma

    if not frames:
        return Failure("Truncated payload")
    return Success(frames)


def _encode_y4m(frames: list[Frame], mono: bool) -> bytes:
    width, height = frames[0].width, frames[0].height
    colorspace = "mono" if mono else "420jpeg"
    header = f"YUV4MPEG2 W{width} H{height} F30:1 Ip A1:1 C{colorspace}\n"
    chroma = b"" if mono else bytes([128]) * (2 * (width // 2) * (height // 2))
    body = b"".join(b"FRAME\n" + f.samples.tobytes() + chroma for f in frames)
    return header.encode("ascii") + body
