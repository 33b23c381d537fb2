"""Event-based compression of binary event matrices.

Bit-exact storage of sparse binary event matrices in four formats, a
desk-scale binary autoencoder trained with a surrogate gradient and
rate-control losses, a toy-piano data generator, a minimal Standard MIDI
File reader, and event/note correlation analysis.
"""

from .event_matrix import EventMatrix
from .codec import StorageFormat, CostReport, cost_report, encode, decode, pack_stream, unpack_stream

__all__ = [
    "EventMatrix",
    "StorageFormat",
    "CostReport",
    "cost_report",
    "encode",
    "decode",
    "pack_stream",
    "unpack_stream",
]

__version__ = "0.1.0"
