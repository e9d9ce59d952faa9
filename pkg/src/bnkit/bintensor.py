"""Binary 3x3 kernels, the 9-bit channel mapping, and channel packing.

Each channel of a 3x3 binary kernel holds nine values in {+1, -1} and is
identified by a single integer in [0, 511]: the value at position (0, 0)
is the most significant bit and the value at (2, 2) the least significant.
A stored bit of 1 means +1 and a bit of 0 means -1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError

SEQ_BITS = 9
NUM_SEQUENCES = 512
KERNEL_MAGIC = b"BNK1"

# Bit weight of kernel position p (row-major): (0,0) -> 2^8 ... (2,2) -> 2^0.
_POSITION_SHIFTS = np.arange(SEQ_BITS - 1, -1, -1, dtype=np.int64)


def seq_to_index(channel) -> int:
    """Map a 3x3 array of {+1, -1} values to its sequence index."""
    arr = np.asarray(channel)
    if arr.size != SEQ_BITS:
        raise ShapeError(f"channel must hold 9 values, got {arr.size}")
    flat = arr.reshape(SEQ_BITS)
    if not np.isin(flat, (-1, 1)).all():
        raise ValueError("channel values must be +1 or -1")
    bits = (flat == 1).astype(np.int64)
    return int((bits << _POSITION_SHIFTS).sum())


def index_to_seq(index: int) -> np.ndarray:
    """Inverse of seq_to_index: sequence index -> 3x3 array of {+1, -1}."""
    index = int(index)
    if not 0 <= index < NUM_SEQUENCES:
        raise ValueError(f"sequence index {index} outside [0, 511]")
    bits = (index >> _POSITION_SHIFTS) & 1
    return np.where(bits, 1, -1).reshape(3, 3).astype(np.int8)


def sequence_bits(indices: np.ndarray) -> np.ndarray:
    """Bits of each sequence by kernel position: shape (..., 9), MSB first."""
    indices = np.asarray(indices, dtype=np.int64)
    return ((indices[..., None] >> _POSITION_SHIFTS) & 1).astype(np.uint8)


@dataclass(frozen=True)
class BinaryKernel:
    """One 3x3 binary layer: a grid of sequence indices per (out, in) channel."""

    out_channels: int
    in_channels: int
    sequences: np.ndarray  # uint16, shape (out_channels, in_channels)

    def __post_init__(self):
        if self.out_channels < 1 or self.in_channels < 1:
            raise ShapeError("channel counts must be positive")
        seqs = np.asarray(self.sequences, dtype=np.uint16)
        if seqs.shape != (self.out_channels, self.in_channels):
            raise ShapeError(
                f"expected sequences of shape {(self.out_channels, self.in_channels)},"
                f" got {seqs.shape}"
            )
        if seqs.size and int(seqs.max()) >= NUM_SEQUENCES:
            raise ValueError("sequence index outside [0, 511]")
        object.__setattr__(self, "sequences", seqs)
        self.sequences.setflags(write=False)

    @classmethod
    def from_sequences(cls, sequences) -> "BinaryKernel":
        seqs = np.asarray(sequences, dtype=np.uint16)
        if seqs.ndim != 2:
            raise ShapeError("sequences must be a 2D (out, in) array")
        return cls(seqs.shape[0], seqs.shape[1], seqs)

    def channel_values(self) -> np.ndarray:
        """Expand to {+1, -1} weights of shape (out, in, 3, 3)."""
        bits = sequence_bits(self.sequences)
        return np.where(bits, 1, -1).reshape(
            self.out_channels, self.in_channels, 3, 3
        ).astype(np.int8)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryKernel):
            return NotImplemented
        return (
            self.out_channels == other.out_channels
            and self.in_channels == other.in_channels
            and np.array_equal(self.sequences, other.sequences)
        )

    def __hash__(self):
        return hash((self.out_channels, self.in_channels, self.sequences.tobytes()))


@dataclass(frozen=True)
class PackedKernel:
    """Channel-packed kernel: per output channel and sub-group of R input
    channels, nine R-bit words (one per kernel position).

    Lane j of the word for position p holds bit p of input channel
    (group_base + j); the final sub-group may be partial and records how
    many lanes are valid.
    """

    register_width: int
    out_channels: int
    in_channels: int
    # words[o][g][p] is a Python int of up to register_width bits.
    words: tuple

    def __post_init__(self):
        if self.register_width < 1:
            raise ShapeError("register width must be >= 1")
        if len(self.words) != self.out_channels:
            raise ShapeError("word table does not match out_channels")

    @property
    def num_groups(self) -> int:
        return -(-self.in_channels // self.register_width)

    def valid_lanes(self, group: int) -> int:
        """Number of populated lanes in a sub-group (last one may be partial)."""
        if group < self.num_groups - 1:
            return self.register_width
        return self.in_channels - group * self.register_width

    def lane_channel(self, group: int, lane: int) -> int:
        """Input channel stored in a given (group, lane); identity layout."""
        return group * self.register_width + lane


def _pack_bit_lanes(bits: np.ndarray) -> int:
    """Pack a 1D array of lane bits into an int, lane 0 as bit 0."""
    packed = np.packbits(bits, bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _unpack_bit_lanes(word: int, lanes: int) -> np.ndarray:
    nbytes = (lanes + 7) // 8
    raw = np.frombuffer(word.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:lanes]


def channel_pack(kernel: BinaryKernel, register_width: int = 128) -> PackedKernel:
    """Pack same-position bits from consecutive input channels into R-bit words."""
    if register_width < 1:
        raise ShapeError("register width must be >= 1")
    R = register_width
    bits = sequence_bits(kernel.sequences)  # (out, in, 9)
    num_groups = -(-kernel.in_channels // R)
    words = []
    for o in range(kernel.out_channels):
        groups = []
        for g in range(num_groups):
            lane_bits = bits[o, g * R : (g + 1) * R]  # (lanes, 9)
            groups.append(
                tuple(_pack_bit_lanes(lane_bits[:, p]) for p in range(SEQ_BITS))
            )
        words.append(tuple(groups))
    return PackedKernel(R, kernel.out_channels, kernel.in_channels, tuple(words))


def channel_unpack(packed: PackedKernel) -> BinaryKernel:
    """Exact inverse of channel_pack."""
    if packed.in_channels < 1 or packed.num_groups == 0:
        raise ShapeError("packed kernel has no input channels")
    seqs = np.zeros((packed.out_channels, packed.in_channels), dtype=np.uint16)
    for o, groups in enumerate(packed.words):
        if len(groups) != packed.num_groups:
            raise ShapeError(
                f"output channel {o}: expected {packed.num_groups} sub-groups,"
                f" got {len(groups)}"
            )
        for g, group in enumerate(groups):
            if len(group) != SEQ_BITS:
                raise ShapeError(f"sub-group {g} must hold 9 words")
            lanes = packed.valid_lanes(g)
            base = g * packed.register_width
            for p, word in enumerate(group):
                lane_bits = _unpack_bit_lanes(word, lanes)
                seqs[o, base : base + lanes] |= lane_bits.astype(np.uint16) << (
                    SEQ_BITS - 1 - p
                )
    return BinaryKernel(packed.out_channels, packed.in_channels, seqs)


def save_kernel(kernel: BinaryKernel, path) -> None:
    """Write the uncompressed kernel file: "BNK1", u32 out/in, u16 indices."""
    with open(path, "wb") as fh:
        fh.write(KERNEL_MAGIC)
        fh.write(struct.pack("<II", kernel.out_channels, kernel.in_channels))
        fh.write(kernel.sequences.astype("<u2").tobytes())


def load_kernel(path) -> BinaryKernel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != KERNEL_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {KERNEL_MAGIC!r}", offset=0)
    if len(raw) < 12:
        raise FormatError("truncated header", offset=len(raw))
    out_channels, in_channels = struct.unpack_from("<II", raw, 4)
    if out_channels < 1 or in_channels < 1:
        raise FormatError("channel counts must be positive", offset=4)
    expected = 12 + 2 * out_channels * in_channels
    if len(raw) < expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes, got {len(raw)}",
            offset=len(raw),
        )
    seqs = np.frombuffer(raw, dtype="<u2", count=out_channels * in_channels, offset=12)
    bad = np.nonzero(seqs >= NUM_SEQUENCES)[0]
    if bad.size:
        raise FormatError(
            f"sequence value {int(seqs[bad[0]])} outside [0, 511]",
            offset=12 + 2 * int(bad[0]),
        )
    return BinaryKernel(
        out_channels, in_channels, seqs.reshape(out_channels, in_channels).copy()
    )
