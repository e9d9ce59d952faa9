"""Functional, cycle-approximate model of the LSU-attached decoding unit.

The unit has two halves: a streaming unit that fetches the compressed
stream in fixed-size requests and walks prefix -> length table -> banked
uncompressed table, and a packing unit that lane-packs each decoded 9-bit
sequence into a set of nine R-bit registers. `lddu` loads a configuration
blob and resets the unit; `ldps` pops the oldest completed register set.

The cycle model is deliberately simple and configurable: one outstanding
memory request with a fixed latency, one cycle per decode iteration, one
cycle per packing-lane write. It supports overlap and throughput studies,
not microarchitectural fidelity.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

from .bintensor import SEQ_BITS
from .codec import HuffmanSpec, unpack_spec_block
from .errors import (
    ConfigurationFault,
    DecodeFault,
    FormatError,
    NotReadyFault,
    StreamUnderrunFault,
)

DEFAULT_FETCH_BYTES = 16
DEFAULT_INPUT_BUFFER = 256
DEFAULT_UNCOMPRESSED_TABLE = 1024
DEFAULT_REGISTER_WIDTH = 128
DEFAULT_REGISTER_FILE = 256
PACKING_REGISTERS = 9  # one per 3x3 kernel position
DEFAULT_FETCH_LATENCY = 20


@dataclass(frozen=True)
class DecodingUnitConfig:
    sequence_count: int
    stream_base: int
    stream_length: int
    spec: HuffmanSpec
    fetch_granularity: int = DEFAULT_FETCH_BYTES
    input_buffer_size: int = DEFAULT_INPUT_BUFFER
    uncompressed_table_size: int = DEFAULT_UNCOMPRESSED_TABLE
    packing_width: int = DEFAULT_REGISTER_WIDTH
    packing_register_count: int = PACKING_REGISTERS
    register_file_size: int = DEFAULT_REGISTER_FILE
    fetch_latency: int = DEFAULT_FETCH_LATENCY
    # In-flight packed sets the register file holds before decode stalls.
    queue_capacity: int = 2

    def __post_init__(self):
        if self.sequence_count < 0 or self.stream_length < 0:
            raise ConfigurationFault("negative sequence count or stream length")
        if self.fetch_granularity < 1 or self.input_buffer_size < self.fetch_granularity:
            raise ConfigurationFault("input buffer smaller than one fetch")
        if self.packing_register_count != PACKING_REGISTERS:
            raise ConfigurationFault("packing register count is fixed at 9")
        table_bytes = sum(len(t) for t in self.spec.tables) * 2
        if table_bytes > self.uncompressed_table_size:
            raise ConfigurationFault(
                f"node tables need {table_bytes} bytes, scratchpad holds"
                f" {self.uncompressed_table_size}"
            )

    @property
    def max_codeword_bits(self) -> int:
        # Parser width: derived, not configured.
        return max(n.codeword_length for n in self.spec.nodes)

    def pack_blob(self) -> bytes:
        """Configuration structure: u32 sequence count, u64 stream pointer,
        u32 stream length, then the serialized code tables."""
        from .codec import pack_spec_block

        return (
            struct.pack("<IQI", self.sequence_count, self.stream_base, self.stream_length)
            + pack_spec_block(self.spec)
        )


def parse_config_blob(memory: bytes, config_address: int, **overrides) -> DecodingUnitConfig:
    try:
        count, base, length = struct.unpack_from("<IQI", memory, config_address)
    except struct.error as exc:
        raise ConfigurationFault(f"truncated configuration structure: {exc}") from exc
    try:
        spec, _ = unpack_spec_block(memory, config_address + 16)
    except FormatError as exc:
        raise ConfigurationFault(f"bad node tables: {exc}") from exc
    return DecodingUnitConfig(count, base, length, spec, **overrides)


@dataclass
class CycleReport:
    cycles: int
    sequences_decoded: int
    bytes_fetched: int
    fetch_requests: int
    stall_events: int
    stall_cycles: int
    bits_consumed: int
    fetch_latency: int = DEFAULT_FETCH_LATENCY

    @property
    def mean_bits_per_sequence(self) -> float:
        return self.bits_consumed / self.sequences_decoded if self.sequences_decoded else 0.0

    @property
    def fetch_overlap(self) -> float:
        """Fraction of memory-latency cycles hidden under decode work."""
        total_latency = self.fetch_requests * self.fetch_latency
        if total_latency == 0:
            return 1.0
        return max(0.0, 1.0 - self.stall_cycles / total_latency)

    def to_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "sequences_decoded": self.sequences_decoded,
            "bytes_fetched": self.bytes_fetched,
            "fetch_requests": self.fetch_requests,
            "stall_events": self.stall_events,
            "stall_cycles": self.stall_cycles,
            "bits_consumed": self.bits_consumed,
            "mean_bits_per_sequence": self.mean_bits_per_sequence,
            "fetch_overlap": self.fetch_overlap,
        }


class DecodingUnitState:
    """Deterministic single-threaded state machine for the decoding unit."""

    def __init__(self, config: DecodingUnitConfig, memory: bytes):
        self.config = config
        self.memory = memory
        self.reset()

    def reset(self):
        cfg = self.config
        self.input_buffer: deque[int] = deque()  # fetched bytes awaiting the parser
        self.bit_cursor = 0  # consumed bits of input_buffer[0]
        self.stream_offset = 0  # bytes requested so far
        self.pending_fetch: tuple[int, int] | None = None  # (arrival_cycle, nbytes)
        self.cycle = 0
        self.node_address = 0
        self.decoded_address_register = 0
        self.length_table = [n.index_bits for n in cfg.spec.nodes]
        self.packing_registers = [0] * cfg.packing_register_count
        self.lane_counter = 0
        self.output_queue: deque[list[int]] = deque()
        self.sequences_decoded = 0
        self.bytes_fetched = 0
        self.fetch_requests = 0
        self.stall_events = 0
        self.stall_cycles = 0
        self.bits_consumed = 0
        self._prefixes = {n.prefix: i for i, n in enumerate(cfg.spec.nodes)}
        self._issue_fetch()

    @property
    def done(self) -> bool:
        return self.sequences_decoded >= self.config.sequence_count

    # -- streaming unit ----------------------------------------------------

    def _issue_fetch(self):
        cfg = self.config
        remaining = cfg.stream_length - self.stream_offset
        if remaining <= 0 or self.pending_fetch is not None:
            return
        free = cfg.input_buffer_size - len(self.input_buffer)
        if free < cfg.fetch_granularity:
            return
        nbytes = min(cfg.fetch_granularity, remaining)
        self.pending_fetch = (self.cycle + cfg.fetch_latency, nbytes)
        self.fetch_requests += 1

    def _absorb_fetch(self, wait: bool) -> bool:
        """Move an arrived (or awaited) fetch into the input buffer."""
        if self.pending_fetch is None:
            return False
        arrival, nbytes = self.pending_fetch
        if self.cycle < arrival:
            if not wait:
                return False
            self.stall_events += 1
            self.stall_cycles += arrival - self.cycle
            self.cycle = arrival
        base = self.config.stream_base + self.stream_offset
        chunk = self.memory[base : base + nbytes]
        if len(chunk) < nbytes:
            raise StreamUnderrunFault(
                f"memory image ends inside the stream at byte {self.stream_offset}"
            )
        self.input_buffer.extend(chunk)
        self.stream_offset += nbytes
        self.bytes_fetched += nbytes
        self.pending_fetch = None
        self._issue_fetch()
        return True

    def _buffered_bits(self) -> int:
        return 8 * len(self.input_buffer) - self.bit_cursor

    def _take_bit(self) -> int:
        while self._buffered_bits() == 0:
            if self.pending_fetch is None:
                raise StreamUnderrunFault(
                    f"stream exhausted after {self.bits_consumed} bits with"
                    f" {self.sequences_decoded}/{self.config.sequence_count}"
                    " sequences decoded"
                )
            self._absorb_fetch(wait=True)
        byte = self.input_buffer[0]
        bit = (byte >> (7 - self.bit_cursor)) & 1
        self.bit_cursor += 1
        if self.bit_cursor == 8:
            self.input_buffer.popleft()
            self.bit_cursor = 0
        self.bits_consumed += 1
        return bit

    # -- decode loop -------------------------------------------------------

    def step(self):
        """One decode iteration: prefix, length lookup, table read, packing."""
        if self.done:
            return
        if (
            len(self.output_queue) >= self.config.queue_capacity
            and self.lane_counter == self.config.packing_width - 1
        ):
            # Completing this sequence would overflow the register file.
            self.stall_events += 1
            self.stall_cycles += 1
            self.cycle += 1
            return
        self._absorb_fetch(wait=False)
        start_bit = self.bits_consumed
        spec = self.config.spec
        max_prefix = max(len(n.prefix) for n in spec.nodes)
        accum = ""
        while accum not in self._prefixes:
            if len(accum) >= max_prefix:
                raise DecodeFault(f"bits {accum!r} match no node prefix", start_bit)
            accum += str(self._take_bit())
        self.node_address = self._prefixes[accum]
        index_bits = self.length_table[self.node_address]
        value = 0
        for _ in range(index_bits):
            value = (value << 1) | self._take_bit()
        self.decoded_address_register = value
        table = spec.tables[self.node_address]
        if value >= len(table):
            raise DecodeFault(
                f"index {value} beyond populated bank {self.node_address}", start_bit
            )
        self.cycle += 1  # decode iteration
        self._pack(table[value])
        self.sequences_decoded += 1
        self._issue_fetch()

    # -- packing unit --------------------------------------------------------

    def _pack(self, sequence: int):
        lane = self.lane_counter
        for p in range(SEQ_BITS):
            bit = (sequence >> (SEQ_BITS - 1 - p)) & 1
            self.packing_registers[p] |= bit << lane
        self.lane_counter += 1
        self.cycle += 1  # one packing-lane write
        if self.lane_counter == self.config.packing_width:
            self._push_set()

    def _push_set(self):
        self.output_queue.append(list(self.packing_registers))
        self.packing_registers = [0] * self.config.packing_register_count
        self.lane_counter = 0

    def flush(self):
        """Queue the final partial register set, if any."""
        if self.lane_counter:
            self._push_set()

    def ldps(self) -> list[int]:
        """Pop the oldest completed register set (k words of R bits)."""
        if not self.output_queue:
            raise NotReadyFault("ldps issued with no packed set available")
        return self.output_queue.popleft()


def lddu(config_address: int, memory: bytes, **overrides) -> DecodingUnitState:
    """Load the configuration structure at config_address and reset the unit."""
    config = parse_config_blob(memory, config_address, **overrides)
    return DecodingUnitState(config, memory)


def run_to_completion(
    state: DecodingUnitState,
) -> tuple[DecodingUnitState, list[list[int]], CycleReport]:
    """Step until every sequence is decoded, draining packed sets in order."""
    outputs: list[list[int]] = []
    while not state.done:
        state.step()
        while state.output_queue:
            outputs.append(state.ldps())
    state.flush()
    while state.output_queue:
        outputs.append(state.ldps())
    report = CycleReport(
        cycles=state.cycle,
        sequences_decoded=state.sequences_decoded,
        bytes_fetched=state.bytes_fetched,
        fetch_requests=state.fetch_requests,
        stall_events=state.stall_events,
        stall_cycles=state.stall_cycles,
        bits_consumed=state.bits_consumed,
        fetch_latency=state.config.fetch_latency,
    )
    return state, outputs, report
