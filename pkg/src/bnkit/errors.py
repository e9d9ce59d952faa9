"""Exception hierarchy shared across the toolkit."""


class BnkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(BnkitError):
    """Malformed on-disk data. Carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ShapeError(BnkitError):
    """Incompatible tensor shapes or register widths."""


class CapacityError(BnkitError):
    """More occupied sequences than the code layout can hold."""

    def __init__(self, overflow: int, capacity: int):
        super().__init__(
            f"{overflow} occupied sequence(s) exceed the layout capacity of {capacity}"
        )
        self.overflow = overflow
        self.capacity = capacity


class EncodeError(BnkitError):
    """A sequence with no assigned codeword was encountered while encoding."""

    def __init__(self, sequence: int):
        super().__init__(f"sequence {sequence} has no codeword assignment")
        self.sequence = sequence


class DecodeError(BnkitError):
    """Invalid prefix or table index in a compressed stream."""

    def __init__(self, message: str, bit_offset: int):
        super().__init__(f"{message} (bit offset {bit_offset})")
        self.bit_offset = bit_offset


class SimulatorFault(BnkitError):
    """Base class for decoding-unit simulator faults."""


class ConfigurationFault(SimulatorFault):
    """Malformed configuration blob or table overflow during lddu."""


class StreamUnderrunFault(SimulatorFault):
    """The parser needed bits past the end of the compressed stream."""


class DecodeFault(SimulatorFault):
    """Hardware-side mirror of DecodeError."""

    def __init__(self, message: str, bit_offset: int):
        super().__init__(f"{message} (bit offset {bit_offset})")
        self.bit_offset = bit_offset


class NotReadyFault(SimulatorFault):
    """ldps issued while the output queue is empty."""
