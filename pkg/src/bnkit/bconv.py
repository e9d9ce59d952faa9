"""Binarization and 3x3 binary convolution.

Two interchangeable evaluation paths: a plain +/-1 integer reference and a
channel-packed xnor/popcount path. With n valid lanes per window, the
popcount of the xnor counts bit agreements, and the +/-1 dot product is
2*popcount - n.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bintensor import (
    SEQ_BITS,
    BinaryKernel,
    PackedKernel,
    _pack_bit_lanes,
    _unpack_bit_lanes,
)
from .errors import FormatError, ShapeError

FEATURE_MAGIC = b"BNF1"
INT_FEATURE_MAGIC = b"BNI1"

KERNEL_SIZE = 3

PAD_VALID = "valid"
PAD_MINUS_ONE = "minus_one"


@dataclass(frozen=True)
class FloatFeatureMap:
    channels: int
    height: int
    width: int
    data: np.ndarray  # float32, shape (channels, height, width)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.shape != (self.channels, self.height, self.width):
            raise ShapeError(f"data shape {data.shape} does not match dims")
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class BitFeatureMap:
    """Binary feature map, channel-packed like PackedKernel: lane j of the
    word at (group, y, x) is the bit of channel group*R + j."""

    channels: int
    height: int
    width: int
    register_width: int
    words: tuple  # words[g][y][x] -> int of up to R bits

    @property
    def num_groups(self) -> int:
        return -(-self.channels // self.register_width)

    def valid_lanes(self, group: int) -> int:
        if group < self.num_groups - 1:
            return self.register_width
        return self.channels - group * self.register_width

    @classmethod
    def from_bits(cls, bits, register_width: int = 128) -> "BitFeatureMap":
        """Pack a (channels, height, width) array of {0, 1}."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 3:
            raise ShapeError("bits must be (channels, height, width)")
        channels, height, width = bits.shape
        R = register_width
        words = tuple(
            tuple(
                tuple(
                    _pack_bit_lanes(bits[g * R : (g + 1) * R, y, x])
                    for x in range(width)
                )
                for y in range(height)
            )
            for g in range(-(-channels // R))
        )
        return cls(channels, height, width, R, words)

    def to_bits(self) -> np.ndarray:
        bits = np.zeros((self.channels, self.height, self.width), dtype=np.uint8)
        for g in range(self.num_groups):
            lanes = self.valid_lanes(g)
            base = g * self.register_width
            for y in range(self.height):
                for x in range(self.width):
                    bits[base : base + lanes, y, x] = _unpack_bit_lanes(
                        self.words[g][y][x], lanes
                    )
        return bits

    def to_values(self) -> np.ndarray:
        """Expand to {+1, -1} integers."""
        return np.where(self.to_bits(), 1, -1).astype(np.int8)


@dataclass(frozen=True)
class IntFeatureMap:
    out_channels: int
    height: int
    width: int
    data: np.ndarray  # int64, shape (out_channels, height, width)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.int64)
        if data.shape != (self.out_channels, self.height, self.width):
            raise ShapeError(f"data shape {data.shape} does not match dims")
        object.__setattr__(self, "data", data)

    def __eq__(self, other):
        if not isinstance(other, IntFeatureMap):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


def binarize(fmap: FloatFeatureMap, register_width: int = 128) -> BitFeatureMap:
    """Bit 1 where the value is >= 0, else 0. NaN fails the test and maps to 0."""
    with np.errstate(invalid="ignore"):
        bits = (fmap.data >= 0).astype(np.uint8)
    return BitFeatureMap.from_bits(bits, register_width)


def _out_dims(height: int, width: int, stride: int, padding_policy: str):
    if padding_policy == PAD_VALID:
        ih, iw, pad = height, width, 0
    elif padding_policy == PAD_MINUS_ONE:
        ih, iw, pad = height + 2, width + 2, 1
    else:
        raise ShapeError(f"unknown padding policy {padding_policy!r}")
    if ih < KERNEL_SIZE or iw < KERNEL_SIZE:
        raise ShapeError("feature map smaller than the 3x3 kernel")
    return (ih - KERNEL_SIZE) // stride + 1, (iw - KERNEL_SIZE) // stride + 1, pad


def conv_reference(
    weights: BinaryKernel,
    inputs: BitFeatureMap,
    stride: int = 1,
    padding_policy: str = PAD_VALID,
) -> IntFeatureMap:
    """Plain +/-1 integer convolution; oracle for the packed path."""
    if weights.in_channels != inputs.channels:
        raise ShapeError(
            f"kernel expects {weights.in_channels} channels, map has {inputs.channels}"
        )
    if stride < 1:
        raise ShapeError("stride must be >= 1")
    out_h, out_w, pad = _out_dims(inputs.height, inputs.width, stride, padding_policy)
    x = inputs.to_values().astype(np.int64)
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), constant_values=-1)
    w = weights.channel_values().astype(np.int64)  # (out, in, 3, 3)
    out = np.zeros((weights.out_channels, out_h, out_w), dtype=np.int64)
    for i in range(out_h):
        for j in range(out_w):
            window = x[:, i * stride : i * stride + 3, j * stride : j * stride + 3]
            out[:, i, j] = np.einsum("ocrs,crs->o", w, window)
    return IntFeatureMap(weights.out_channels, out_h, out_w, out)


def _padded_words(inputs: BitFeatureMap) -> BitFeatureMap:
    """One-pixel border of all-zero words, i.e. -1 inputs on every lane."""
    zero = 0
    h, w = inputs.height + 2, inputs.width + 2
    words = tuple(
        tuple(
            tuple(
                inputs.words[g][y - 1][x - 1]
                if 1 <= y <= inputs.height and 1 <= x <= inputs.width
                else zero
                for x in range(w)
            )
            for y in range(h)
        )
        for g in range(inputs.num_groups)
    )
    return BitFeatureMap(inputs.channels, h, w, inputs.register_width, words)


def conv_packed(
    weights: PackedKernel,
    inputs: BitFeatureMap,
    stride: int = 1,
    padding_policy: str = PAD_VALID,
    return_popcount: bool = False,
) -> IntFeatureMap:
    """xnor/popcount convolution over channel-packed words.

    With return_popcount the raw agreement count is emitted instead of the
    affine-corrected +/-1 dot product.
    """
    if weights.register_width != inputs.register_width:
        raise ShapeError(
            f"register width mismatch: kernel {weights.register_width},"
            f" inputs {inputs.register_width}"
        )
    if weights.in_channels != inputs.channels:
        raise ShapeError(
            f"kernel expects {weights.in_channels} channels, map has {inputs.channels}"
        )
    if stride < 1:
        raise ShapeError("stride must be >= 1")
    out_h, out_w, pad = _out_dims(inputs.height, inputs.width, stride, padding_policy)
    x = _padded_words(inputs) if pad else inputs
    masks = [(1 << weights.valid_lanes(g)) - 1 for g in range(weights.num_groups)]
    n = SEQ_BITS * weights.in_channels
    out = np.zeros((weights.out_channels, out_h, out_w), dtype=np.int64)
    for o in range(weights.out_channels):
        for i in range(out_h):
            for j in range(out_w):
                agreements = 0
                for g in range(weights.num_groups):
                    mask = masks[g]
                    wwords = weights.words[o][g]
                    for p in range(SEQ_BITS):
                        xw = x.words[g][i * stride + p // 3][j * stride + p % 3]
                        agreements += (~(wwords[p] ^ xw) & mask).bit_count()
                out[o, i, j] = agreements if return_popcount else 2 * agreements - n
    return IntFeatureMap(weights.out_channels, out_h, out_w, out)


def save_bit_feature_map(fmap: BitFeatureMap, path) -> None:
    """"BNF1" file with packed words, little-endian, group/row-major order."""
    word_bytes = (fmap.register_width + 7) // 8
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", fmap.channels, fmap.height, fmap.width))
        for g in range(fmap.num_groups):
            for y in range(fmap.height):
                for x in range(fmap.width):
                    fh.write(int(fmap.words[g][y][x]).to_bytes(word_bytes, "little"))


def load_bit_feature_map(path, register_width: int = 128) -> BitFeatureMap:
    with open(path, "rb") as fh:
        raw = fh.read()
    channels, height, width = _read_feature_header(raw, FEATURE_MAGIC)
    word_bytes = (register_width + 7) // 8
    num_groups = -(-channels // register_width)
    expected = 16 + num_groups * height * width * word_bytes
    if len(raw) != expected:
        raise FormatError(
            f"expected {expected} bytes for R={register_width}, got {len(raw)}",
            offset=len(raw),
        )
    offset = 16
    words = []
    for _ in range(num_groups):
        rows = []
        for _ in range(height):
            row = []
            for _ in range(width):
                row.append(int.from_bytes(raw[offset : offset + word_bytes], "little"))
                offset += word_bytes
            rows.append(tuple(row))
        words.append(tuple(rows))
    return BitFeatureMap(channels, height, width, register_width, tuple(words))


def save_float_feature_map(fmap: FloatFeatureMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", fmap.channels, fmap.height, fmap.width))
        fh.write(fmap.data.astype("<f4").tobytes())


def load_float_feature_map(path) -> FloatFeatureMap:
    with open(path, "rb") as fh:
        raw = fh.read()
    channels, height, width = _read_feature_header(raw, FEATURE_MAGIC)
    count = channels * height * width
    if len(raw) != 16 + 4 * count:
        raise FormatError(f"expected {16 + 4 * count} bytes, got {len(raw)}", offset=len(raw))
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=16)
    return FloatFeatureMap(channels, height, width, data.reshape(channels, height, width).copy())


def save_int_feature_map(fmap: IntFeatureMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(INT_FEATURE_MAGIC)
        fh.write(struct.pack("<III", fmap.out_channels, fmap.height, fmap.width))
        fh.write(fmap.data.astype("<i4").tobytes())


def load_int_feature_map(path) -> IntFeatureMap:
    with open(path, "rb") as fh:
        raw = fh.read()
    channels, height, width = _read_feature_header(raw, INT_FEATURE_MAGIC)
    count = channels * height * width
    if len(raw) != 16 + 4 * count:
        raise FormatError(f"expected {16 + 4 * count} bytes, got {len(raw)}", offset=len(raw))
    data = np.frombuffer(raw, dtype="<i4", count=count, offset=16)
    return IntFeatureMap(channels, height, width, data.reshape(channels, height, width).astype(np.int64))


def _read_feature_header(raw: bytes, magic: bytes) -> tuple[int, int, int]:
    if raw[:4] != magic:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {magic!r}", offset=0)
    if len(raw) < 16:
        raise FormatError("truncated header", offset=len(raw))
    channels, height, width = struct.unpack_from("<III", raw, 4)
    if min(channels, height, width) < 1:
        raise FormatError("dimensions must be positive", offset=4)
    return channels, height, width
