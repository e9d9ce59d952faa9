"""Fixed-shape 4-node prefix code over bit sequences.

Instead of a full Huffman tree, the code has a handful of nodes; each node
owns a prefix, a table of sequences, and a fixed number of index bits. A
codeword is the node prefix followed by the table index of the sequence.
Sequences are assigned to nodes in descending frequency order, so the most
common ones land in the node with the shortest codewords.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bintensor import NUM_SEQUENCES, SEQ_BITS, BinaryKernel
from .errors import BnkitError, CapacityError, DecodeError, EncodeError, FormatError
from .stats import FrequencyTable

COMPRESSED_MAGIC = b"BNC1"

# Shortest prefix-free strings giving codeword lengths 6/8/9/12 with node
# capacities 32/64/64/256. "1111" is reserved and never a valid prefix.
DEFAULT_LAYOUT = (("0", 5), ("10", 6), ("110", 6), ("1110", 8))


@dataclass(frozen=True)
class NodeSpec:
    prefix: str
    index_bits: int

    def __post_init__(self):
        if not self.prefix or set(self.prefix) - {"0", "1"}:
            raise BnkitError(f"prefix {self.prefix!r} must be a non-empty bit string")
        if self.index_bits < 0:
            raise BnkitError("index_bits must be >= 0")

    @property
    def capacity(self) -> int:
        return 1 << self.index_bits

    @property
    def codeword_length(self) -> int:
        return len(self.prefix) + self.index_bits


def _check_prefix_free(nodes: Sequence[NodeSpec]) -> None:
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            if a.prefix.startswith(b.prefix) or b.prefix.startswith(a.prefix):
                raise BnkitError(
                    f"layout is not prefix-free: {a.prefix!r} vs {b.prefix!r}"
                )


@dataclass(frozen=True)
class HuffmanSpec:
    """Node layout plus the per-node uncompressed tables."""

    nodes: tuple[NodeSpec, ...]
    tables: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        _check_prefix_free(self.nodes)
        if len(self.tables) != len(self.nodes):
            raise BnkitError("one table per node required")
        for node, table in zip(self.nodes, self.tables):
            if len(table) > node.capacity:
                raise BnkitError(
                    f"table for prefix {node.prefix!r} exceeds capacity {node.capacity}"
                )
        seen = set()
        for table in self.tables:
            for seq in table:
                if not 0 <= seq < NUM_SEQUENCES:
                    raise BnkitError(f"table entry {seq} outside [0, 511]")
                if seq in seen:
                    raise BnkitError(f"sequence {seq} assigned twice")
                seen.add(seq)

    @property
    def assignment(self) -> dict[int, tuple[int, int]]:
        """Map sequence -> (node_id, table index)."""
        return {
            seq: (n, i)
            for n, table in enumerate(self.tables)
            for i, seq in enumerate(table)
        }

    def codeword_length(self, sequence: int) -> int:
        node, _ = self.assignment[sequence]
        return self.nodes[node].codeword_length

    def length_by_sequence(self) -> np.ndarray:
        """Codeword length per sequence index; 0 where unassigned."""
        lengths = np.zeros(NUM_SEQUENCES, dtype=np.int64)
        for node, table in zip(self.nodes, self.tables):
            lengths[list(table)] = node.codeword_length
        return lengths


@dataclass(frozen=True)
class CompressedStream:
    count: int
    payload: bytes
    # Exact payload bits before padding; None when only the file is known
    # (decode re-derives and validates it).
    bit_length: int | None = None

    def __post_init__(self):
        if self.bit_length is not None and self.bit_length > 8 * len(self.payload):
            raise BnkitError("bit_length exceeds payload size")


def build_spec(
    table: FrequencyTable, layout: Sequence[tuple[str, int]] = DEFAULT_LAYOUT
) -> HuffmanSpec:
    """Assign sequences to nodes in descending rank order.

    Occupied sequences fill the nodes first; zero-frequency sequences are
    backfilled into spare capacity (ascending index) so held-out kernels
    stay encodable whenever the layout has room.
    """
    nodes = tuple(NodeSpec(prefix, bits) for prefix, bits in layout)
    _check_prefix_free(nodes)
    total_capacity = sum(n.capacity for n in nodes)
    occupied = [int(s) for s in table.occupied()]
    if len(occupied) > total_capacity:
        raise CapacityError(len(occupied) - total_capacity, total_capacity)
    spare = [s for s in range(NUM_SEQUENCES) if table.counts[s] == 0]
    ordered = occupied + spare[: total_capacity - len(occupied)]
    tables = []
    cursor = 0
    for node in nodes:
        chunk = ordered[cursor : cursor + node.capacity]
        tables.append(tuple(chunk))
        cursor += len(chunk)
    return HuffmanSpec(nodes, tuple(tables))


def _codeword_arrays(spec: HuffmanSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sequence codeword value, length, and assigned flag."""
    values = np.zeros(NUM_SEQUENCES, dtype=np.int64)
    lengths = np.zeros(NUM_SEQUENCES, dtype=np.int64)
    assigned = np.zeros(NUM_SEQUENCES, dtype=bool)
    for node, table in zip(spec.nodes, spec.tables):
        prefix_val = int(node.prefix, 2)
        for index, seq in enumerate(table):
            values[seq] = (prefix_val << node.index_bits) | index
            lengths[seq] = node.codeword_length
            assigned[seq] = True
    return values, lengths, assigned


def kernel_sequence_order(kernels: Sequence[BinaryKernel]) -> np.ndarray:
    """Traversal order: kernel list order, output-channel-major, input ascending."""
    return np.concatenate([k.sequences.ravel() for k in kernels])


def encode(kernels: Sequence[BinaryKernel], spec: HuffmanSpec) -> CompressedStream:
    """Concatenate codewords MSB-first; the final byte is zero-padded."""
    symbols = kernel_sequence_order(kernels).astype(np.int64)
    values, lengths, assigned = _codeword_arrays(spec)
    if not assigned[symbols].all():
        missing = symbols[~assigned[symbols]][0]
        raise EncodeError(int(missing))
    sym_lengths = lengths[symbols]
    total_bits = int(sym_lengths.sum())
    offsets = np.cumsum(sym_lengths) - sym_lengths
    bits = np.zeros(total_bits, dtype=np.uint8)
    for node in set(int(l) for l in sym_lengths):
        mask = sym_lengths == node
        vals = values[symbols[mask]]
        offs = offsets[mask]
        for j in range(node):
            bits[offs + j] = (vals >> (node - 1 - j)) & 1
    payload = np.packbits(bits).tobytes() if total_bits else b""
    return CompressedStream(len(symbols), payload, total_bits)


class _BitReader:
    def __init__(self, payload: bytes):
        self._bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
        self.position = 0

    @property
    def remaining(self) -> int:
        return len(self._bits) - self.position

    def take(self, n: int) -> int:
        if n > self.remaining:
            raise DecodeError("stream exhausted mid-codeword", self.position)
        value = 0
        for _ in range(n):
            value = (value << 1) | int(self._bits[self.position])
            self.position += 1
        return value


def decode(stream: CompressedStream, spec: HuffmanSpec) -> list[int]:
    """Pure software reference decoder for the compressed stream."""
    reader = _BitReader(stream.payload)
    prefixes = {node.prefix: n for n, node in enumerate(spec.nodes)}
    max_prefix = max(len(node.prefix) for node in spec.nodes)
    out = []
    for _ in range(stream.count):
        start = reader.position
        accum = ""
        while accum not in prefixes:
            if len(accum) >= max_prefix:
                raise DecodeError(f"bits {accum!r} match no node prefix", start)
            accum += str(reader.take(1))
        node = spec.nodes[prefixes[accum]]
        index = reader.take(node.index_bits)
        table = spec.tables[prefixes[accum]]
        if index >= len(table):
            raise DecodeError(
                f"index {index} beyond populated table of node {prefixes[accum]}", start
            )
        out.append(table[index])
    if stream.bit_length is not None and reader.position != stream.bit_length:
        raise DecodeError("declared bit length does not match decoded bits", reader.position)
    pad_bits = 8 * len(stream.payload) - reader.position
    if pad_bits >= 8:
        raise DecodeError("trailing bytes after last codeword", reader.position)
    if pad_bits and stream.payload[-1] & ((1 << pad_bits) - 1):
        raise DecodeError("non-zero padding after last codeword", reader.position)
    return out


def mean_codeword_length(table: FrequencyTable, spec: HuffmanSpec) -> float:
    """Frequency-weighted mean codeword length in bits."""
    if table.total == 0:
        raise BnkitError("mean length undefined for an empty table")
    lengths = spec.length_by_sequence()
    occupied = table.counts > 0
    if (lengths[occupied] == 0).any():
        missing = int(np.nonzero(occupied & (lengths == 0))[0][0])
        raise EncodeError(missing)
    return float((table.counts * lengths).sum()) / table.total


def compression_ratio(table: FrequencyTable, spec: HuffmanSpec) -> float:
    """Ratio of the 9-bit-per-channel baseline to the mean codeword length."""
    return SEQ_BITS / mean_codeword_length(table, spec)


def ratio_from_node_usage(
    fractions: Sequence[float], lengths: Sequence[int]
) -> float:
    """Analytic ratio from per-node usage fractions and codeword lengths."""
    if len(fractions) != len(lengths):
        raise BnkitError("one usage fraction per codeword length required")
    mean = sum(f * l for f, l in zip(fractions, lengths))
    return SEQ_BITS / mean


def model_ratio(
    storage_shares: dict[str, float], conv3x3_ratio: float, key: str = "conv3x3"
) -> float:
    """Whole-model ratio when only the 3x3-convolution share is compressed."""
    total = sum(storage_shares.values())
    if abs(total - 1.0) > 1e-6:
        raise BnkitError(f"storage shares sum to {total}, expected 1.0")
    if key not in storage_shares:
        raise BnkitError(f"storage shares missing component {key!r}")
    share = storage_shares[key]
    return 1.0 / (share / conv3x3_ratio + (1.0 - share))


def pack_spec_block(spec: HuffmanSpec) -> bytes:
    """Serialize a HuffmanSpec: node count, then per node the prefix length,
    prefix bits (right-aligned in one byte), index bits, and table entries."""
    out = bytearray([len(spec.nodes)])
    for node, table in zip(spec.nodes, spec.tables):
        if len(node.prefix) > 8:
            raise BnkitError("prefix longer than 8 bits cannot be serialized")
        out.append(len(node.prefix))
        out.append(int(node.prefix, 2))
        out.append(node.index_bits)
        out += struct.pack("<H", len(table))
        out += np.asarray(table, dtype="<u2").tobytes()
    return bytes(out)


def unpack_spec_block(raw: bytes, offset: int = 0) -> tuple[HuffmanSpec, int]:
    """Inverse of pack_spec_block; returns the spec and the next offset."""
    try:
        node_count = raw[offset]
        offset += 1
        nodes, tables = [], []
        for _ in range(node_count):
            prefix_len, prefix_val, index_bits = raw[offset : offset + 3]
            offset += 3
            if prefix_len == 0 or prefix_len > 8:
                raise FormatError("prefix length outside [1, 8]", offset=offset - 3)
            (table_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            entries = np.frombuffer(raw, dtype="<u2", count=table_len, offset=offset)
            offset += 2 * table_len
            nodes.append(NodeSpec(format(prefix_val, f"0{prefix_len}b"), index_bits))
            tables.append(tuple(int(e) for e in entries))
    except (IndexError, struct.error, ValueError) as exc:
        raise FormatError(f"truncated spec block: {exc}", offset=offset) from exc
    try:
        return HuffmanSpec(tuple(nodes), tuple(tables)), offset
    except BnkitError as exc:
        raise FormatError(f"invalid spec block: {exc}", offset=offset) from exc


def write_compressed(path, stream: CompressedStream, spec: HuffmanSpec) -> None:
    """Compressed kernel file: "BNC1", u32 count, spec block, payload bytes."""
    with open(path, "wb") as fh:
        fh.write(COMPRESSED_MAGIC)
        fh.write(struct.pack("<I", stream.count))
        fh.write(pack_spec_block(spec))
        fh.write(stream.payload)


def read_compressed(path) -> tuple[CompressedStream, HuffmanSpec]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != COMPRESSED_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}", offset=0)
    if len(raw) < 8:
        raise FormatError("truncated header", offset=len(raw))
    (count,) = struct.unpack_from("<I", raw, 4)
    spec, offset = unpack_spec_block(raw, 8)
    return CompressedStream(count, raw[offset:]), spec
