"""Activities: the units of execution that own trace event sequences.

Threads, CSP processes, and actors are all activities. Each activity has
a deterministic 64-bit identity derived from its position in the spawn
tree, so a replayed run assigns every parsed event queue to the same
activity that recorded it.
"""

from __future__ import annotations

import random
import threading
import time
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .errors import ExecutionAborted, NotAnActivity
from .tracing import RecordBuffer, ReplayQueue, watchdog_wait_event

if TYPE_CHECKING:  # pragma: no cover
    from .runtime import Execution


class ActivityKind(Enum):
    THREAD = "thread"
    ACTOR = "actor"
    PROCESS = "process"


# ---------------------------------------------------------------------------
# Spawn-path identity.
#
# A child's id is a pure function of (parent id, parent spawn counter), so
# record and replay compute identical ids as long as each activity spawns
# in the same order, which the deterministic-sequential-execution
# assumption guarantees. The id encodes the path of spawn counters from
# the root as a concatenation of self-delimiting nibble varints (3 data
# bits + 1 continuation bit per nibble). Prefix-free varints make the
# concatenation uniquely decodable, hence the mapping injective for every
# spawn tree that fits in 64 bits. The root id is 0.
# ---------------------------------------------------------------------------

_ID_BITS = 64


def _counter_nibbles(counter: int) -> list[int]:
    if counter < 0:
        raise ValueError("spawn counter must be non-negative")
    chunks = []
    while True:
        chunks.append(counter & 0x7)
        counter >>= 3
        if counter == 0:
            break
    nibbles = [(0x8 | c) for c in chunks[:-1]] + [chunks[-1]]
    return nibbles


def child_activity_id(parent_code: int, parent_len: int, counter: int) -> tuple[int, int, int]:
    """Return (child id, child path code, child path length in bits)."""
    code, length = parent_code, parent_len
    for nibble in _counter_nibbles(counter):
        code = (code << 4) | nibble
        length += 4
    if length >= _ID_BITS:
        raise OverflowError(
            "spawn tree too deep/wide for 64-bit activity ids "
            f"(needs {length + 1} bits)"
        )
    return ((1 << length) | code) - 1, code, length


class Activity:
    """One unit of execution: owns either a record buffer or a replay queue."""

    def __init__(self, execution: "Execution", activity_id: int, kind: ActivityKind,
                 path_code: int = 0, path_len: int = 0, name: str = ""):
        self.execution = execution
        self.id = activity_id
        self.kind = kind
        self.name = name or f"{kind.value}-{activity_id}"
        self._path_code = path_code
        self._path_len = path_len
        self.spawn_counter = 0
        self.promise_msg_counter = 0
        self._entity_seq = 0
        self._msg_seq = 0
        self.tx_context = None
        self.buffer: Optional[RecordBuffer] = None
        self.replay_queue: Optional[ReplayQueue] = None
        self._perturb_rng: Optional[random.Random] = None
        self._perturb_prob = 0.0
        self._perturb_max_delay = 0.0
        execution.attach_activity(self)

    def __repr__(self):
        return f"<Activity {self.name} id={self.id}>"

    def next_entity_seq(self) -> int:
        seq = self._entity_seq
        self._entity_seq += 1
        return seq

    def next_msg_seq(self) -> int:
        seq = self._msg_seq
        self._msg_seq += 1
        return seq

    def next_child_id(self) -> tuple[int, int, int]:
        child = child_activity_id(self._path_code, self._path_len, self.spawn_counter)
        self.spawn_counter += 1
        return child

    def configure_perturbation(self, seed: int, prob: float, max_delay: float) -> None:
        # Mix the activity id into the seed so each activity gets its own
        # reproducible delay sequence.
        self._perturb_rng = random.Random((seed * 0x9E3779B97F4A7C15 + self.id) & (2**64 - 1))
        self._perturb_prob = prob
        self._perturb_max_delay = max_delay

    def perturb_point(self) -> None:
        """Scheduling-perturbation injection site (record/delay call sites)."""
        rng = self._perturb_rng
        if rng is not None and rng.random() < self._perturb_prob:
            time.sleep(rng.random() * self._perturb_max_delay)

    def finish_tracing(self) -> None:
        if self.buffer is not None:
            self.buffer.flush()


class ThreadActivity(Activity):
    """Activity backed 1:1 by an OS thread (THREAD and PROCESS kinds)."""

    def __init__(self, execution, activity_id, kind, entry, args,
                 path_code=0, path_len=0, name=""):
        super().__init__(execution, activity_id, kind, path_code, path_len, name)
        self._entry = entry
        self._args = args
        self._done = threading.Event()
        self._thread = threading.Thread(target=self._bootstrap, name=self.name, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def _bootstrap(self) -> None:
        set_current_activity(self)
        try:
            self._entry(*self._args)
        except ExecutionAborted:
            pass
        except BaseException as exc:  # noqa: BLE001 - first failure aborts the run
            self.execution.abort(exc)
        finally:
            self.finish_tracing()
            set_current_activity(None)
            self._done.set()
            self.execution.progress.bump()

    def join(self) -> None:
        """Wait for the activity to finish; abort- and watchdog-aware."""
        if getattr(_tls, "current", None) is self:
            raise RuntimeError("activity cannot join itself")
        watchdog_wait_event(self._done, self.execution)

    @property
    def done(self) -> bool:
        return self._done.is_set()


_tls = threading.local()


def current_activity() -> Activity:
    """The activity executing the caller.

    Inside an actor message handler this is the actor, not the pool worker
    running it. Raises NotAnActivity from unmanaged code.
    """
    act = getattr(_tls, "current", None)
    if act is None:
        raise NotAnActivity("no current activity; call from inside a managed execution")
    return act


def current_activity_or_none() -> Optional[Activity]:
    return getattr(_tls, "current", None)


def set_current_activity(activity: Optional[Activity]) -> None:
    _tls.current = activity
