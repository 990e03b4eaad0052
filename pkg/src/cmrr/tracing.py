"""Model-agnostic recording substrate.

Holds the execution-mode switch, per-activity record buffers and replay
queues, per-entity version counters, and the three framework primitives
every instrumented operation is built from:

* ``record_interaction`` appends one event to the acting activity's buffer
  (recording mode only),
* ``increment_version`` bumps an entity's version counter (recording and
  replay) and wakes anyone waiting on that entity,
* ``delay_interaction`` blocks a replayed operation until the target
  entity's version matches the version stored in the activity's next
  trace event, then consumes that event.

A global no-progress watchdog turns blocked-forever replays (corrupted
trace, nondeterminism leak) into ``ReplayDeadlock`` instead of hangs.
"""

from __future__ import annotations

import threading
import time
from enum import Enum
from typing import TYPE_CHECKING, Callable, Iterable, Optional

from .errors import ReplayDeadlock, ReplayQueueExhausted, ReplayTypeMismatch
from .events import EventType, TraceEvent, pack_event

if TYPE_CHECKING:  # pragma: no cover
    from .activities import Activity

DEFAULT_FLUSH_THRESHOLD = 4096
DEFAULT_WATCHDOG_SECONDS = 30.0

# How often blocked waiters re-check the watchdog and abort flag. Waits
# are normally ended by a direct notify; the tick only bounds detection
# latency for deadlocks and aborts.
WAIT_TICK = 0.05


class ExecutionMode(Enum):
    """Per-execution switch; fixed before any activity spawns."""

    PASSIVE = "passive"
    RECORD = "record"
    REPLAY = "replay"


# Event types whose data word is an entity version counter (as opposed to
# an identity or sequence number).
VERSION_EVENT_TYPES = frozenset({
    EventType.LOCK,
    EventType.AWAIT_SIGNALED,
    EventType.AWAIT_TIMEOUT,
    EventType.MSG_SEND,
    EventType.PROMISE_RESOLVE,
    EventType.PROMISE_MSG_STORE,
    EventType.CHANNEL_READ,
    EventType.CHANNEL_WRITE,
    EventType.TX_COMMIT,
})


class RecordBuffer:
    """Growable octet buffer holding whole 9-octet events.

    Written only by its owning activity. When the buffer exceeds the
    flush threshold (or the activity terminates) the content is handed
    off to the trace sink as one chunk; chunks never split an event.
    """

    def __init__(self, owner_id: int, sink, flush_threshold: int = DEFAULT_FLUSH_THRESHOLD):
        self.owner_id = owner_id
        self._sink = sink
        self._flush_threshold = flush_threshold
        self._data = bytearray()

    def __len__(self) -> int:
        return len(self._data)

    def put(self, event_type: int, data: int) -> None:
        self._data += pack_event(event_type, data)
        if len(self._data) >= self._flush_threshold:
            self.flush()

    def flush(self) -> None:
        if self._data:
            self._sink.submit(self.owner_id, bytes(self._data))
            self._data.clear()

    def snapshot(self) -> bytes:
        """Unflushed content; test hook."""
        return bytes(self._data)


class ReplayQueue:
    """Ordered per-activity event sequence with a consuming cursor.

    ``poll`` consumes strictly in recorded order; ``peek`` never consumes.
    One extra event of lookahead beyond the head is available, which
    receiver-side actor replay needs to match split two-event records.
    """

    def __init__(self, owner_id: int, events: Iterable[TraceEvent]):
        self.owner_id = owner_id
        self._events = list(events)
        self._pos = 0

    def __len__(self) -> int:
        return len(self._events) - self._pos

    @property
    def consumed(self) -> int:
        return self._pos

    @property
    def events(self) -> tuple[TraceEvent, ...]:
        """The full recorded sequence, including consumed events."""
        return tuple(self._events)

    def peek(self) -> Optional[TraceEvent]:
        if self._pos < len(self._events):
            return self._events[self._pos]
        return None

    def peek_second(self) -> Optional[TraceEvent]:
        """Look one event past the head without consuming."""
        if self._pos + 1 < len(self._events):
            return self._events[self._pos + 1]
        return None

    def poll(self) -> TraceEvent:
        ev = self.peek()
        if ev is None:
            raise ReplayQueueExhausted(
                f"activity {self.owner_id}: trace exhausted but another "
                f"recordable operation was attempted"
            )
        self._pos += 1
        return ev

    def expect(self, event_type: int) -> TraceEvent:
        """Peek the head and verify its type; does not consume."""
        ev = self.peek()
        if ev is None:
            raise ReplayQueueExhausted(
                f"activity {self.owner_id}: expected {EventType(event_type).name} "
                f"but trace is exhausted"
            )
        if ev.event_type != event_type:
            raise ReplayTypeMismatch(
                f"activity {self.owner_id}: expected {EventType(event_type).name}, "
                f"trace holds {ev.type_name}(data={ev.data})"
            )
        return ev


class VersionedEntity:
    """Passive entity carrying a monotone version counter.

    The counter orders all nondeterministic interactions with the entity.
    Each entity owns one monitor; operations mutate the version only while
    holding it, and replay waiters for the entity block on it. The entity
    also keeps an in-memory log of the interactions it saw (recorded in
    recording mode, consumed in replay mode), which feeds run digests and
    version-completeness checks.
    """

    kind = "entity"

    def __init__(self, execution=None):
        if execution is None:
            from .activities import current_activity

            act = current_activity()
            execution = act.execution
            self.entity_id = (act.id, act.next_entity_seq())
        else:
            self.entity_id = execution.next_internal_entity_id()
        self.execution = execution
        self.version = 0
        self._monitor = threading.Condition(threading.RLock())
        self._log: list[tuple[int, int, int]] = []
        execution.register_entity(self)

    def note(self, activity_id: int, event_type: int, data: int) -> None:
        """Append one interaction to the entity-order log (monitor held)."""
        self._log.append((activity_id, int(event_type), data))

    def log_entries(self) -> list[tuple[int, int, int]]:
        return list(self._log)

    def digest_lines(self) -> list[tuple[int, int, int]]:
        """Canonical interaction order fed into the run digest."""
        return self.log_entries()

    def recorded_versions(self) -> list[int]:
        """Sorted data words of the version-carrying events this entity saw."""
        return sorted(d for (_, t, d) in self._log if t in VERSION_EVENT_TYPES)

    def check_version_completeness(self) -> Optional[str]:
        """None when the recorded versions form the gap-free multiset
        0..finalVersion-1; otherwise a description of the violation."""
        versions = self.recorded_versions()
        expected = list(range(self.version))
        if versions != expected:
            return (f"{self.kind} {self.entity_id}: recorded versions "
                    f"{versions[:20]}... do not cover 0..{self.version - 1}")
        return None

    def wait_on_monitor(self, predicate: Callable[[], bool]) -> None:
        """Block until ``predicate()`` holds; monitor must be held."""
        watchdog_wait(self._monitor, predicate, self.execution)


def record_interaction(activity: "Activity", event_type: int, data: int,
                       entity: VersionedEntity | None = None) -> None:
    """Append one event to the activity's record buffer.

    No-op outside recording mode. ``entity``, when given, receives the
    interaction in its order log for digesting.
    """
    activity.perturb_point()
    if activity.execution.mode is not ExecutionMode.RECORD:
        return
    activity.buffer.put(event_type, data)
    if entity is not None:
        entity.note(activity.id, event_type, data)


def increment_version(entity: VersionedEntity) -> int:
    """Bump the entity version in recording and replay; untouched when passive.

    Returns the post-increment value (current value when passive). Wakes
    all waiters blocked on the entity and counts as global progress.
    """
    ex = entity.execution
    if ex.mode is ExecutionMode.PASSIVE:
        return entity.version
    with entity._monitor:
        entity.version += 1
        version = entity.version
        entity._monitor.notify_all()
    ex.progress.bump()
    return version


def delay_interaction(activity: "Activity", entity: VersionedEntity,
                      expected_type: int) -> Optional[TraceEvent]:
    """Hold a replayed operation until it is its recorded turn.

    Replay mode: verifies the head of the activity's replay queue has
    ``expected_type``, blocks until ``entity.version`` equals the version
    stored in that event, then consumes and returns it. Other modes:
    returns ``None`` without touching anything.
    """
    ex = activity.execution
    if ex.mode is not ExecutionMode.REPLAY:
        return None
    activity.perturb_point()
    ev = activity.replay_queue.expect(expected_type)
    with entity._monitor:
        entity.wait_on_monitor(lambda: entity.version == ev.data)
        consumed = activity.replay_queue.poll()
        entity.note(activity.id, consumed.event_type, consumed.data)
    ex.progress.bump()
    return consumed


class ProgressClock:
    """Counts every globally visible step a run makes.

    Blocked replay waiters watch this counter: if it stands still for the
    whole watchdog interval while someone is blocked, the trace and the
    program have diverged. The counter is deliberately unlocked: it is a
    heuristic clock, and a racy lost increment at worst delays one
    deadline reset by a tick.
    """

    __slots__ = ("_count",)

    def __init__(self):
        self._count = 0

    def bump(self) -> None:
        self._count += 1

    def read(self) -> int:
        return self._count


class DeadlockSentry:
    """Per-wait-site watchdog bookkeeping.

    ``poll()`` is called between wait ticks; it re-raises the execution's
    abort error, and in replay mode raises ``ReplayDeadlock`` once the
    global progress clock has stood still for the watchdog interval.
    """

    __slots__ = ("_execution", "_deadline", "_last_progress")

    def __init__(self, execution):
        self._execution = execution
        self._deadline = None
        self._last_progress = execution.progress.read()

    def poll(self) -> None:
        ex = self._execution
        ex.check_abort()
        if ex.mode is not ExecutionMode.REPLAY:
            return
        now = time.monotonic()
        progress = ex.progress.read()
        if progress != self._last_progress:
            self._last_progress = progress
            self._deadline = None
        if self._deadline is None:
            self._deadline = now + ex.watchdog_seconds
        elif now >= self._deadline:
            err = ReplayDeadlock(
                f"no progress for {ex.watchdog_seconds:.1f}s while "
                f"blocked in replay; trace and program have diverged"
            )
            ex.abort(err)
            raise err


def watchdog_wait(cond: threading.Condition, predicate: Callable[[], bool],
                  execution) -> None:
    """Wait on ``cond`` until ``predicate()`` holds.

    The condition's lock must be held. Abort- and deadlock-aware via
    ``DeadlockSentry``.
    """
    sentry = DeadlockSentry(execution)
    while not predicate():
        sentry.poll()
        cond.wait(WAIT_TICK)


def watchdog_wait_event(event: threading.Event, execution) -> None:
    """Wait for ``event`` with the same abort/deadlock awareness."""
    sentry = DeadlockSentry(execution)
    while not event.wait(WAIT_TICK):
        sentry.poll()
