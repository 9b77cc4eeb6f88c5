"""
TinyCnn: a three-layer strided convolutional classifier in plain numpy.

The network maps a 3-channel tensor (past reference, current frame, future
reference) to C logits: three 3x3 stride-2 convolutions with ReLU, global
average pooling and a linear head. C is 1 for the Bi-Class head (probability
of full-resolution motion) and 4 for the Mu-Class head (one logit per factor).

Models are immutable; training produces new models through ``with_params``.
Gradients are computed analytically with an im2col formulation.
"""

import struct
from pathlib import Path

import attrs
import numpy as np
from returns.result import Failure, Result, Success
from scipy import ndimage

from .frame_io import Frame
from .motion import downsample_frame
from .types import FACTORS, ClassifierMode

INPUT_SIZE = 64
DEFAULT_WIDTHS = (16, 32, 64)
IN_CHANNELS = 3
KERNEL = 3
MODEL_MAGIC = b"TCNN"
SHARED_LAYER = -1

_MODEL_HEADER = struct.Struct("<4sBiI")
_U32 = struct.Struct("<I")


@attrs.frozen(eq=False)
class TinyCnn:
    """Weights of one classifier; kernels are ``(c_out, c_in, 3, 3)``."""

    mode: ClassifierMode
    kernels: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    head_weight: np.ndarray
    head_bias: np.ndarray
    layer: int = SHARED_LAYER

    def __attrs_post_init__(self) -> None:
        if len(self.kernels) != len(self.biases):
            raise ValueError("Each convolution needs a bias vector")
        for previous, kernel in zip(self.kernels, self.kernels[1:], strict=False):
            if kernel.shape[1] != previous.shape[0]:
                raise ValueError("Convolution channel widths do not chain")
        expected = (self.mode.num_outputs, self.kernels[-1].shape[0])
        if self.head_weight.shape != expected:
            raise ValueError(f"Head weight must have shape {expected}")
        if not all(np.isfinite(p).all() for p in self.params()):
            raise ValueError("Model weights must be finite")

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(int(k.shape[0]) for k in self.kernels)

    @property
    def in_channels(self) -> int:
        return int(self.kernels[0].shape[1])

    def params(self) -> list[np.ndarray]:
        """Parameter tensors in a fixed order: kernels, biases, head."""
        return [*self.kernels, *self.biases, self.head_weight, self.head_bias]

    def with_params(self, params: list[np.ndarray]) -> "TinyCnn":
        n = len(self.kernels)
        return TinyCnn(
            mode=self.mode,
            kernels=tuple(params[:n]),
            biases=tuple(params[n : 2 * n]),
            head_weight=params[2 * n],
            head_bias=params[2 * n + 1],
            layer=self.layer,
        )

    def equals(self, other: "TinyCnn", atol: float = 0.0) -> bool:
        return (
            self.mode is other.mode
            and self.layer == other.layer
            and all(
                a.shape == b.shape and np.allclose(a, b, rtol=0.0, atol=atol)
                for a, b in zip(self.params(), other.params(), strict=True)
            )
        )


def init_model(
    mode: ClassifierMode,
    seed: int = 0,
    widths: tuple[int, ...] = DEFAULT_WIDTHS,
    layer: int = SHARED_LAYER,
    in_channels: int = IN_CHANNELS,
) -> TinyCnn:
    """Fan-in scaled uniform initialization from a seeded generator."""
    rng = np.random.default_rng(seed)
    kernels, biases = [], []
    c_in = in_channels
    for c_out in widths:
        bound = 1.0 / np.sqrt(c_in * KERNEL * KERNEL)
        kernels.append(rng.uniform(-bound, bound, (c_out, c_in, KERNEL, KERNEL)))
        biases.append(rng.uniform(-bound, bound, c_out))
        c_in = c_out
    bound = 1.0 / np.sqrt(c_in)
    head_weight = rng.uniform(-bound, bound, (mode.num_outputs, c_in))
    head_bias = rng.uniform(-bound, bound, mode.num_outputs)
    return TinyCnn(mode, tuple(kernels), tuple(biases), head_weight, head_bias, layer)


def zero_model(
    mode: ClassifierMode,
    widths: tuple[int, ...] = DEFAULT_WIDTHS,
    layer: int = SHARED_LAYER,
) -> TinyCnn:
    """Model with every weight and bias at zero."""
    model = init_model(mode, 0, widths, layer)
    return model.with_params([np.zeros_like(p) for p in model.params()])


# Input preparation


def preprocess(
    x_t: Frame, ref_past: Frame, ref_future: Frame, size: int = INPUT_SIZE
) -> np.ndarray:
    """Stack (past, current, future) as a ``3 x size x size`` tensor in [-0.5, 0.5]."""
    if not x_t.shape == ref_past.shape == ref_future.shape:
        raise ValueError("Dimension mismatch between frame and references")
    return np.stack([_resize(frame, size) for frame in (ref_past, x_t, ref_future)])


def _resize(frame: Frame, size: int) -> np.ndarray:
    factor = 1
    for candidate in FACTORS:
        fits = frame.width // candidate >= size and frame.height // candidate >= size
        divides = frame.width % candidate == 0 and frame.height % candidate == 0
        if fits and divides:
            factor = candidate
    plane = downsample_frame(frame, factor).as_float()
    if plane.shape != (size, size):
        ys = (np.arange(size) + 0.5) * plane.shape[0] / size - 0.5
        xs = (np.arange(size) + 0.5) * plane.shape[1] / size - 0.5
        grid = np.meshgrid(ys, xs, indexing="ij")
        plane = ndimage.map_coordinates(plane, grid, order=1, mode="nearest")
    return plane / 255.0 - 0.5


# Forward and backward passes


@attrs.frozen(eq=False)
class ForwardCache:
    """Activations kept by ``forward_cached`` for the backward pass."""

    columns: tuple[np.ndarray, ...]
    activations: tuple[np.ndarray, ...]
    pooled: np.ndarray


def forward(model: TinyCnn, inputs: np.ndarray) -> np.ndarray:
    """Logits for a single ``(3, H, W)`` input or a ``(N, 3, H, W)`` batch."""
    single = inputs.ndim == 3
    logits, _ = forward_cached(model, inputs[None] if single else inputs)
    return logits[0] if single else logits


def forward_cached(
    model: TinyCnn, batch: np.ndarray
) -> tuple[np.ndarray, ForwardCache]:
    if batch.ndim != 4 or batch.shape[1] != model.in_channels:
        raise ValueError(
            f"Expected input of shape (N, {model.in_channels}, H, W), got {batch.shape}"
        )
    columns, activations = [], []
    x = batch.astype(np.float64)
    for kernel, bias in zip(model.kernels, model.biases, strict=True):
        cols = _im2col(x)
        x = np.maximum(_convolve(cols, kernel, bias), 0.0)
        columns.append(cols)
        activations.append(x)
    pooled = x.mean(axis=(2, 3))
    logits = pooled @ model.head_weight.T + model.head_bias
    if not np.isfinite(logits).all():
        raise FloatingPointError("Non-finite activation in forward pass")
    return logits, ForwardCache(tuple(columns), tuple(activations), pooled)


def backward(
    model: TinyCnn, cache: ForwardCache, dlogits: np.ndarray
) -> list[np.ndarray]:
    """Parameter gradients (same order as ``params``) given dLoss/dlogits."""
    d_head_weight = dlogits.T @ cache.pooled
    d_head_bias = dlogits.sum(axis=0)

    last = cache.activations[-1]
    grad = (dlogits @ model.head_weight)[:, :, None, None] / (
        last.shape[2] * last.shape[3]
    )
    grad = np.broadcast_to(grad, last.shape)

    d_kernels: list[np.ndarray] = []
    d_biases: list[np.ndarray] = []
    for index in reversed(range(len(model.kernels))):
        grad = grad * (cache.activations[index] > 0)
        cols = cache.columns[index]
        d_kernels.insert(0, np.tensordot(grad, cols, axes=([0, 2, 3], [0, 4, 5])))
        d_biases.insert(0, grad.sum(axis=(0, 2, 3)))
        if index:
            d_cols = np.tensordot(grad, model.kernels[index], axes=([1], [0]))
            d_cols = d_cols.transpose(0, 3, 4, 5, 1, 2)
            grad = _col2im(d_cols, cache.activations[index - 1].shape)
    return [*d_kernels, *d_biases, d_head_weight, d_head_bias]


def forward_macs(
    widths: tuple[int, ...] = DEFAULT_WIDTHS,
    num_outputs: int = len(FACTORS),
    size: int = INPUT_SIZE,
    in_channels: int = IN_CHANNELS,
) -> int:
    """Multiply-accumulates of one forward pass on a ``size x size`` input."""
    total, c_in, side = 0, in_channels, size
    for c_out in widths:
        side = _output_side(side)
        total += KERNEL * KERNEL * c_in * c_out * side * side
        c_in = c_out
    return total + c_in * num_outputs


# Prediction


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = np.exp(z - z.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def predict_bi(model: TinyCnn, inputs: np.ndarray) -> float:
    """Probability that full-resolution motion (S=1) is the right choice."""
    _require_mode(model, ClassifierMode.BI)
    return float(sigmoid(forward(model, inputs)[0]))


def predict_bi_batch(model: TinyCnn, batch: np.ndarray) -> np.ndarray:
    _require_mode(model, ClassifierMode.BI)
    return sigmoid(forward(model, batch)[:, 0])


def predict_mu(model: TinyCnn, inputs: np.ndarray) -> int:
    """Factor with the highest logit; ties go to the smaller factor."""
    _require_mode(model, ClassifierMode.MU)
    return FACTORS[int(np.argmax(forward(model, inputs)))]


def predict_mu_batch(model: TinyCnn, batch: np.ndarray) -> np.ndarray:
    _require_mode(model, ClassifierMode.MU)
    return np.asarray(FACTORS)[np.argmax(forward(model, batch), axis=1)]


# Model files (I/O operations)


def save_model(model: TinyCnn, file_path: str | Path) -> Result[Path, str]:
    """Write a ``TCNN`` model file; weights are stored as float32."""
    params = model.params()
    chunks = [
        _MODEL_HEADER.pack(
            MODEL_MAGIC,
            list(ClassifierMode).index(model.mode),
            model.layer,
            len(params),
        )
    ]
    for tensor in params:
        chunks.append(_U32.pack(tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(tensor.astype("<f4").tobytes())
    try:
        Path(file_path).write_bytes(b"".join(chunks))
        return Success(Path(file_path))
    except OSError as e:
        return Failure(f"Could not write model: {e}")


def load_model(file_path: str | Path) -> Result[TinyCnn, str]:
    """Read a model written by ``save_model``."""
    try:
        data = Path(file_path).read_bytes()
    except OSError as e:
        return Failure(f"Could not read model: {e}")
    return _parse_model(data).alt(lambda message: f"{file_path}: {message}")


def _parse_model(data: bytes) -> Result[TinyCnn, str]:
    if len(data) < _MODEL_HEADER.size:
        return Failure("Malformed model: header too short")
    magic, mode_code, layer, count = _MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        return Failure("Malformed model: bad magic")
    if mode_code >= len(ClassifierMode) or count < 4 or count % 2:
        return Failure("Malformed model: bad mode or tensor count")

    tensors = []
    offset = _MODEL_HEADER.size
    try:
        for _ in range(count):
            (ndim,) = _U32.unpack_from(data, offset)
            offset += _U32.size
            shape = struct.unpack_from(f"<{ndim}I", data, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) * 4
            if offset + size > len(data):
                return Failure("Malformed model: truncated tensor")
            tensor = np.frombuffer(data, dtype="<f4", count=size // 4, offset=offset)
            tensors.append(tensor.reshape(shape).astype(np.float64))
            offset += size
    except struct.error:
        return Failure("Malformed model: truncated tensor header")
    if offset != len(data):
        return Failure("Malformed model: trailing bytes")

    n = (count - 2) // 2
    try:
        return Success(
            TinyCnn(
                mode=list(ClassifierMode)[mode_code],
                kernels=tuple(tensors[:n]),
                biases=tuple(tensors[n : 2 * n]),
                head_weight=tensors[2 * n],
                head_bias=tensors[2 * n + 1],
                layer=layer,
            )
        )
    except ValueError as e:
        return Failure(f"Malformed model: {e}")


# Private helper functions


def _require_mode(model: TinyCnn, mode: ClassifierMode) -> None:
    if model.mode is not mode:
        raise ValueError(f"Expected a {mode.value} model, got {model.mode.value}")


def _output_side(side: int) -> int:
    return (side - 1) // 2 + 1


def _im2col(x: np.ndarray) -> np.ndarray:
    """Patches of a 3x3 stride-2 pad-1 convolution: ``(N, C, 3, 3, OH, OW)``."""
    n, c, h, w = x.shape
    oh, ow = _output_side(h), _output_side(w)
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((n, c, KERNEL, KERNEL, oh, ow))
    for i in range(KERNEL):
        for j in range(KERNEL):
            cols[:, :, i, j] = padded[:, :, i : i + 2 * oh : 2, j : j + 2 * ow : 2]
    return cols


def _col2im(d_cols: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Scatter-add patch gradients back onto the input plane."""
    n, c, h, w = shape
    oh, ow = d_cols.shape[4:]
    padded = np.zeros((n, c, h + 2, w + 2))
    for i in range(KERNEL):
        for j in range(KERNEL):
            padded[:, :, i : i + 2 * oh : 2, j : j + 2 * ow : 2] += d_cols[:, :, i, j]
    return padded[:, :, 1 : h + 1, 1 : w + 1]


def _convolve(cols: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    out = np.tensordot(cols, kernel, axes=([1, 2, 3], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
