"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, data/parse errors
exit 2, numerical failures exit 3.
"""


class SpikecodecError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SpikecodecError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ShapeError(SpikecodecError, ValueError):
    """Inputs have inconsistent or malformed shapes."""


class TruncatedStreamError(SpikecodecError):
    """A read ran past the end of the underlying bit/byte stream."""


class CorruptStreamError(SpikecodecError):
    """A stream is syntactically readable but violates format invariants."""


class MidiParseError(SpikecodecError):
    """Standard MIDI File parsing failed; carries the offending byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DivergenceError(SpikecodecError):
    """Training produced a non-finite loss; carries the step diagnostic."""
