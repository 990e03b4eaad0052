"""Uniform trace event format.

Every nondeterministic interaction is recorded as one fixed-size event:
a 1-octet type tag followed by an 8-octet data word whose interpretation
is local to the event type (usually an entity version counter, sometimes
an identity or a sequence number). All multi-octet integers are
little-endian. Tag 0 is reserved as padding/invalid and never written.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from .errors import TraceFormatError

EVENT_SIZE = 9

_EVENT_STRUCT = struct.Struct("<BQ")

_U64_MASK = (1 << 64) - 1


class EventType(IntEnum):
    """Registry of event type tags.

    Numeric values are part of the trace format and are never reused
    or renumbered across releases of the same format version.
    """

    LOCK = 1
    AWAIT_SIGNALED = 2
    AWAIT_TIMEOUT = 3
    MSG_SEND = 4
    PROMISE_RESOLVE = 5
    PROMISE_MSG_STORE = 6
    CHANNEL_READ = 7
    CHANNEL_WRITE = 8
    TX_COMMIT = 9
    MSG_RCVD = 10
    PROMMSG_RCVD = 11
    ACTIVITY_SPAWN = 12


_VALID_TAGS = frozenset(int(t) for t in EventType)


@dataclass(frozen=True)
class TraceEvent:
    """One recorded event: type tag plus a 64-bit data word."""

    event_type: int
    data: int

    def __post_init__(self):
        if self.event_type not in _VALID_TAGS:
            raise TraceFormatError(f"unregistered event tag {self.event_type}")
        if not 0 <= self.data <= _U64_MASK:
            raise TraceFormatError(f"event data {self.data} outside u64 range")

    @property
    def type_name(self) -> str:
        return EventType(self.event_type).name


def encode_event(event: TraceEvent) -> bytes:
    """Serialize an event to its 9-octet wire form."""
    return _EVENT_STRUCT.pack(event.event_type, event.data)


def decode_event(raw: bytes) -> TraceEvent:
    """Parse exactly 9 octets back into a TraceEvent.

    Rejects tag 0 and unregistered tags; encode/decode round-trip is the
    identity for every valid event.
    """
    if len(raw) != EVENT_SIZE:
        raise TraceFormatError(f"event must be {EVENT_SIZE} octets, got {len(raw)}")
    tag, data = _EVENT_STRUCT.unpack(raw)
    if tag not in _VALID_TAGS:
        raise TraceFormatError(f"unregistered event tag {tag}")
    return TraceEvent(tag, data)


def pack_event(event_type: int, data: int) -> bytes:
    """Encode without building a TraceEvent; used on the hot recording path."""
    return _EVENT_STRUCT.pack(event_type, data)
