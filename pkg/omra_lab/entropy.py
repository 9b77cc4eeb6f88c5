"""
Bit-level coding primitives: exp-Golomb codes, zig-zag scan and the
run-level coefficient coder shared by intra and residual coding.
"""

import attrs
import numpy as np

BLOCK = 8


class BitstreamError(ValueError):
    """Raised while parsing a malformed or exhausted stream."""


@attrs.frozen
class Bitstream:
    """Coded bits packed big-endian into bytes; trailing pad bits are zero."""

    payload: bytes
    bit_count: int

    def __attrs_post_init__(self) -> None:
        if not 0 <= self.bit_count <= 8 * len(self.payload):
            raise ValueError("bit_count does not fit the payload")
        if len(self.payload) != (self.bit_count + 7) // 8:
            raise ValueError("payload length must be ceil(bit_count / 8)")

    def bits(self) -> str:
        if not self.payload:
            return ""
        value = int.from_bytes(self.payload, "big")
        return bin(value)[2:].zfill(8 * len(self.payload))[: self.bit_count]

    @classmethod
    def from_bits(cls, bits: str) -> "Bitstream":
        padded = bits + "0" * (-len(bits) % 8)
        payload = int(padded, 2).to_bytes(len(padded) // 8, "big") if padded else b""
        return cls(payload, len(bits))

    def truncated(self, bit_count: int) -> "Bitstream":
        return Bitstream.from_bits(self.bits()[:bit_count])


def ue_code(value: int) -> str:
    """Unsigned exp-Golomb order-0 codeword."""
    if value < 0:
        raise ValueError("ue(v) needs a non-negative value")
    body = bin(value + 1)[2:]
    return "0" * (len(body) - 1) + body


def se_code(value: int) -> str:
    """Signed exp-Golomb codeword (positive values map to odd code numbers)."""
    return ue_code(2 * value - 1 if value > 0 else -2 * value)


def ue_length(values: np.ndarray) -> np.ndarray:
    """Codeword lengths of ``ue`` for an array of non-negative integers."""
    values = np.asarray(values, dtype=np.int64)
    return 2 * np.floor(np.log2(values + 1)).astype(np.int64) + 1


def se_length(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return ue_length(np.where(values > 0, 2 * values - 1, -2 * values))


class BitWriter:
    """Append-only bit accumulator."""

    def __init__(self) -> None:
        self._chunks: list[str] = []
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def write_bits(self, value: int, width: int) -> None:
        if not 0 <= value < (1 << width):
            raise ValueError(f"{value} does not fit in {width} bits")
        self._append(format(value, f"0{width}b") if width else "")

    def write_ue(self, value: int) -> None:
        self._append(ue_code(value))

    def write_se(self, value: int) -> None:
        self._append(se_code(value))

    def extend(self, other: "BitWriter") -> None:
        self._chunks.extend(other._chunks)
        self._count += other._count

    def to_bitstream(self) -> Bitstream:
        return Bitstream.from_bits("".join(self._chunks))

    def _append(self, code: str) -> None:
        self._chunks.append(code)
        self._count += len(code)


class BitReader:
    """Sequential reader over a Bitstream; raises BitstreamError when exhausted."""

    def __init__(self, stream: Bitstream) -> None:
        self._bits = stream.bits()
        self._pos = 0

    @property
    def position(self) -> int:
        return self._pos

    @property
    def remaining(self) -> int:
        return len(self._bits) - self._pos

    def read_bits(self, width: int) -> int:
        if width == 0:
            return 0
        if self._pos + width > len(self._bits):
            raise BitstreamError("Exhausted bits")
        value = int(self._bits[self._pos : self._pos + width], 2)
        self._pos += width
        return value

    def read_ue(self) -> int:
        marker = self._bits.find("1", self._pos)
        if marker < 0:
            raise BitstreamError("Exhausted bits")
        zeros = marker - self._pos
        if marker + zeros + 1 > len(self._bits):
            raise BitstreamError("Exhausted bits")
        value = int(self._bits[marker : marker + zeros + 1], 2) - 1
        self._pos = marker + zeros + 1
        return value

    def read_se(self) -> int:
        code = self.read_ue()
        return (code + 1) // 2 if code % 2 else -(code // 2)


# Coefficient scan and run-level coding


def zigzag_order(size: int = BLOCK) -> np.ndarray:
    """Flat indices of a ``size x size`` block in zig-zag order."""
    cells = [(i, j) for i in range(size) for j in range(size)]
    cells.sort(key=lambda c: (c[0] + c[1], c[0] if (c[0] + c[1]) % 2 else -c[0]))
    return np.array([i * size + j for i, j in cells])


ZIGZAG = zigzag_order()


def write_block_levels(writer: BitWriter, levels: np.ndarray) -> None:
    """Code one block: ``ue(nonzero count)`` then ``ue(run), se(level)`` pairs."""
    scanned = levels.reshape(-1)[ZIGZAG]
    positions = np.flatnonzero(scanned)
    writer.write_ue(len(positions))
    previous = -1
    for pos in positions:
        writer.write_ue(int(pos - previous - 1))
        writer.write_se(int(scanned[pos]))
        previous = pos


def read_block_levels(reader: BitReader) -> np.ndarray:
    """Inverse of ``write_block_levels``."""
    count = reader.read_ue()
    if count > BLOCK * BLOCK:
        raise BitstreamError("Malformed block: too many coefficients")
    scanned = np.zeros(BLOCK * BLOCK, dtype=np.int64)
    pos = -1
    for _ in range(count):
        pos += reader.read_ue() + 1
        if pos >= BLOCK * BLOCK:
            raise BitstreamError("Malformed block: run past end of block")
        scanned[pos] = reader.read_se()
    levels = np.zeros(BLOCK * BLOCK, dtype=np.int64)
    levels[ZIGZAG] = scanned
    return levels.reshape(BLOCK, BLOCK)


def block_levels_length(levels: np.ndarray) -> int:
    """Bits ``write_block_levels`` would emit, counted independently."""
    scanned = levels.reshape(-1)[ZIGZAG]
    positions = np.flatnonzero(scanned)
    runs = np.diff(np.concatenate([[-1], positions])) - 1
    return int(
        ue_length(np.array([len(positions)]))[0]
        + ue_length(runs).sum()
        + se_length(scanned[positions]).sum()
    )
