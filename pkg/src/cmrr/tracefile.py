"""Trace file writing, parsing, and sinks.

On-disk layout (all integers little-endian):

    header:  magic "CMRR" | u16 format version (= 1) | u16 strategy flags
    chunks:  u64 activity id | u32 payload length | payload octets

Strategy flags: bit 0 selects the actor recording strategy (0 sender-side,
1 receiver-side); all other bits must be zero. Payload length is always a
multiple of 9, so a chunk never splits an event. A parser only needs this
framing; it never interprets model semantics.
"""

from __future__ import annotations

import io
import queue
import struct
import threading
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, Iterable

from .errors import TraceFormatError
from .events import EVENT_SIZE, decode_event
from .tracing import ReplayQueue

MAGIC = b"CMRR"
FORMAT_VERSION = 1
HEADER_SIZE = 8
CHUNK_HEADER_SIZE = 12

_HEADER_STRUCT = struct.Struct("<4sHH")
_CHUNK_STRUCT = struct.Struct("<QI")


class ActorStrategy(Enum):
    SENDER_SIDE = 0
    RECEIVER_SIDE = 1


def strategy_to_flags(strategy: ActorStrategy) -> int:
    return strategy.value & 0x1


def strategy_from_flags(flags: int) -> ActorStrategy:
    if flags & ~0x1:
        raise TraceFormatError(f"unsupported strategy flags 0x{flags:04x}")
    return ActorStrategy(flags & 0x1)


def write_header(fh: BinaryIO, strategy_flags: int) -> None:
    fh.write(_HEADER_STRUCT.pack(MAGIC, FORMAT_VERSION, strategy_flags))


def write_chunk(fh: BinaryIO, activity_id: int, payload: bytes) -> None:
    if len(payload) % EVENT_SIZE:
        raise TraceFormatError(
            f"chunk payload of {len(payload)} octets is not a multiple of {EVENT_SIZE}"
        )
    fh.write(_CHUNK_STRUCT.pack(activity_id, len(payload)))
    fh.write(payload)


def write_trace(path: str, strategy_flags: int,
                chunks: Iterable[tuple[int, bytes]]) -> None:
    """Write a complete trace file in one shot."""
    with open(path, "wb") as fh:
        write_header(fh, strategy_flags)
        for activity_id, payload in chunks:
            write_chunk(fh, activity_id, payload)


@dataclass
class TraceFile:
    """Parsed trace: per-activity event queues plus header metadata."""

    format_version: int
    strategy_flags: int
    queues: dict[int, ReplayQueue]
    chunk_count: int
    file_size: int
    path: str = ""

    @property
    def strategy(self) -> ActorStrategy:
        return strategy_from_flags(self.strategy_flags)

    @property
    def event_count(self) -> int:
        return sum(len(q) for q in self.queues.values())


def parse_trace(path: str) -> TraceFile:
    """Parse a trace file into one ordered event queue per activity.

    Chunks of the same activity are concatenated in file order. Dispatch
    happens purely on the 9-octet framing; unknown tags, a bad magic,
    an unsupported version, or a truncated chunk raise TraceFormatError.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_trace_bytes(data, path=path)


def parse_trace_bytes(data: bytes, path: str = "") -> TraceFile:
    if len(data) < HEADER_SIZE:
        raise TraceFormatError("truncated header")
    magic, version, flags = _HEADER_STRUCT.unpack_from(data, 0)
    if magic != MAGIC:
        raise TraceFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise TraceFormatError(f"unsupported format version {version}")
    strategy_from_flags(flags)  # validates reserved bits

    events_per_activity: dict[int, list] = {}
    offset = HEADER_SIZE
    chunk_count = 0
    while offset < len(data):
        if offset + CHUNK_HEADER_SIZE > len(data):
            raise TraceFormatError("truncated chunk header")
        activity_id, payload_len = _CHUNK_STRUCT.unpack_from(data, offset)
        offset += CHUNK_HEADER_SIZE
        if payload_len % EVENT_SIZE:
            raise TraceFormatError(
                f"chunk payload length {payload_len} is not a multiple of {EVENT_SIZE}"
            )
        if offset + payload_len > len(data):
            raise TraceFormatError("truncated chunk payload")
        bucket = events_per_activity.setdefault(activity_id, [])
        for pos in range(offset, offset + payload_len, EVENT_SIZE):
            bucket.append(decode_event(data[pos:pos + EVENT_SIZE]))
        offset += payload_len
        chunk_count += 1

    queues = {
        activity_id: ReplayQueue(activity_id, events)
        for activity_id, events in events_per_activity.items()
    }
    return TraceFile(
        format_version=version,
        strategy_flags=flags,
        queues=queues,
        chunk_count=chunk_count,
        file_size=len(data),
        path=path,
    )


class TraceSink:
    """Destination for flushed record buffers; safe to call from any activity."""

    def submit(self, activity_id: int, payload: bytes) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class DiscardSink(TraceSink):
    """Accepts and drops chunks; measures tracing without write-back cost."""

    def __init__(self):
        self.chunks_discarded = 0
        self.octets_discarded = 0
        self._lock = threading.Lock()

    def submit(self, activity_id: int, payload: bytes) -> None:
        with self._lock:
            self.chunks_discarded += 1
            self.octets_discarded += len(payload)


class FileSink(TraceSink):
    """Writes chunks to a trace file from a dedicated background writer thread.

    The header goes out immediately so a crash mid-run still leaves a
    parseable prefix. Chunk order in the file is hand-off order, which is
    irrelevant to parsing (queues are per-activity).
    """

    def __init__(self, path: str, strategy_flags: int):
        self.path = path
        self._fh = open(path, "wb")
        write_header(self._fh, strategy_flags)
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._writer = threading.Thread(target=self._drain, name="trace-writer", daemon=True)
        self._writer.start()
        self.chunks_written = 0

    def submit(self, activity_id: int, payload: bytes) -> None:
        self._queue.put((activity_id, payload))

    def _drain(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                break
            activity_id, payload = item
            write_chunk(self._fh, activity_id, payload)
            self.chunks_written += 1
        self._fh.flush()
        self._fh.close()

    def close(self) -> None:
        self._queue.put(None)
        self._writer.join()


class MemorySink(TraceSink):
    """Collects chunks in memory; test hook mirroring the file layout."""

    def __init__(self, strategy_flags: int = 0):
        self.strategy_flags = strategy_flags
        self.chunks: list[tuple[int, bytes]] = []
        self._lock = threading.Lock()

    def submit(self, activity_id: int, payload: bytes) -> None:
        with self._lock:
            self.chunks.append((activity_id, payload))

    def as_bytes(self) -> bytes:
        buf = io.BytesIO()
        write_header(buf, self.strategy_flags)
        for activity_id, payload in self.chunks:
            write_chunk(buf, activity_id, payload)
        return buf.getvalue()
