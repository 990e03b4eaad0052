"""Execution lifecycle: configuration, spawning, finalization, digesting.

An ``Execution`` runs one program once, in one of three modes. Recording
hands flushed buffers to a trace sink (file or discard); replay parses the
trace up front and feeds each activity its recorded queue. At the end of a
run the execution computes a digest over the program's outputs and every
entity's ordered interaction log: the operational meaning of "two runs
behaved identically".
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .activities import (
    Activity,
    ActivityKind,
    ThreadActivity,
    current_activity,
    set_current_activity,
)
from .actors import ActorActivity, ActorPool
from .errors import (
    ExecutionAborted,
    ReplayLeftoverEvents,
    ReplayTypeMismatch,
    TraceFormatError,
    UsageError,
)
from .events import EventType
from .stm import CommitPoint
from .tracefile import (
    ActorStrategy,
    DiscardSink,
    FileSink,
    TraceSink,
    parse_trace,
    strategy_to_flags,
)
from .tracing import (
    DEFAULT_FLUSH_THRESHOLD,
    DEFAULT_WATCHDOG_SECONDS,
    ExecutionMode,
    ProgressClock,
    RecordBuffer,
    ReplayQueue,
    VersionedEntity,
    record_interaction,
)


@dataclass(frozen=True)
class PerturbationPlan:
    """Deterministic scheduling jitter injected at instrumentation points.

    The same seed yields the same per-activity delay sequence; delays are
    bounded sleeps and never touch program semantics.
    """

    seed: int
    prob: float = 0.02
    max_delay: float = 0.0005


@dataclass
class RunResult:
    """What one execution produced."""

    outputs: Any
    digest: str
    mode: ExecutionMode
    strategy: ActorStrategy
    trace_path: Optional[str] = None
    actor_logs: dict = field(default_factory=dict)


def _default_pool_size() -> int:
    return max(4, os.cpu_count() or 1)


class Execution:
    """One program execution under a fixed mode and actor strategy."""

    def __init__(
        self,
        mode: ExecutionMode | str,
        strategy: ActorStrategy | str | None = None,
        trace_path: Optional[str] = None,
        sink: TraceSink | str = "file",
        watchdog_seconds: float = DEFAULT_WATCHDOG_SECONDS,
        pool_size: Optional[int] = None,
        perturb: Optional[PerturbationPlan] = None,
        flush_threshold: int = DEFAULT_FLUSH_THRESHOLD,
    ):
        self.mode = ExecutionMode(mode) if isinstance(mode, str) else mode
        if isinstance(strategy, str):
            key = strategy.upper().replace("-", "_")
            if not key.endswith("_SIDE"):
                key += "_SIDE"
            strategy = ActorStrategy[key]
        self.watchdog_seconds = watchdog_seconds
        self.flush_threshold = flush_threshold
        self.trace_path = trace_path
        self.perturb = perturb
        self.progress = ProgressClock()
        self._abort_lock = threading.Lock()
        self._abort_exc: Optional[BaseException] = None
        self._activities_lock = threading.Lock()
        self.activities: dict[int, Activity] = {}
        self.entities: list[VersionedEntity] = []
        self._entities_lock = threading.Lock()
        self._internal_entity_seq = 0
        self._ran = False
        self._queues: dict[int, ReplayQueue] = {}
        self.sink: Optional[TraceSink] = None

        if self.mode is ExecutionMode.REPLAY:
            if trace_path is None:
                raise UsageError("replay needs a trace path")
            trace = parse_trace(trace_path)
            if strategy is not None and strategy is not trace.strategy:
                raise TraceFormatError(
                    f"trace was recorded {trace.strategy.name}, "
                    f"requested {strategy.name}"
                )
            self.strategy = trace.strategy
            self._queues = trace.queues
        else:
            self.strategy = strategy or ActorStrategy.SENDER_SIDE
            if self.mode is ExecutionMode.RECORD:
                if isinstance(sink, TraceSink):
                    self.sink = sink
                elif sink == "discard":
                    self.sink = DiscardSink()
                elif sink == "file":
                    if trace_path is None:
                        raise UsageError("recording to a file needs a trace path")
                    self.sink = FileSink(trace_path, strategy_to_flags(self.strategy))
                else:
                    raise UsageError(f"unknown sink kind {sink!r}")

        self.actor_pool = ActorPool(self, pool_size or _default_pool_size())
        self.commit_point = CommitPoint(self)

    # -- bookkeeping ----------------------------------------------------------

    def next_internal_entity_id(self) -> tuple[int, int]:
        seq = self._internal_entity_seq
        self._internal_entity_seq += 1
        return (-1, seq)

    def register_entity(self, entity: VersionedEntity) -> None:
        with self._entities_lock:
            self.entities.append(entity)

    def attach_activity(self, activity: Activity) -> None:
        with self._activities_lock:
            if activity.id in self.activities:
                raise UsageError(f"duplicate activity id {activity.id}")
            self.activities[activity.id] = activity
        if self.mode is ExecutionMode.RECORD:
            activity.buffer = RecordBuffer(activity.id, self.sink, self.flush_threshold)
        elif self.mode is ExecutionMode.REPLAY:
            queue = self._queues.get(activity.id)
            if queue is None:
                queue = ReplayQueue(activity.id, [])
                self._queues[activity.id] = queue
            activity.replay_queue = queue
        if self.perturb is not None:
            activity.configure_perturbation(
                self.perturb.seed, self.perturb.prob, self.perturb.max_delay
            )

    def abort(self, exc: BaseException) -> None:
        """Remember the first failure and wake everything blocked on it."""
        if isinstance(exc, ExecutionAborted):
            return
        with self._abort_lock:
            if self._abort_exc is None:
                self._abort_exc = exc
        self.progress.bump()

    def check_abort(self) -> None:
        if self._abort_exc is not None:
            raise ExecutionAborted(repr(self._abort_exc))

    # -- spawning ---------------------------------------------------------------

    def spawn(self, kind: ActivityKind, entry: Callable, args: tuple = (),
              name: str = "") -> Activity:
        """Create and start a child of the current activity.

        The child's id is a pure function of (parent id, parent spawn
        counter); a spawn event is recorded so replay detects diverging
        activity creation immediately.
        """
        parent = current_activity()
        child_id, code, length = parent.next_child_id()
        if self.mode is ExecutionMode.RECORD:
            record_interaction(parent, EventType.ACTIVITY_SPAWN, child_id)
        elif self.mode is ExecutionMode.REPLAY:
            parent.perturb_point()
            ev = parent.replay_queue.expect(EventType.ACTIVITY_SPAWN)
            parent.replay_queue.poll()
            if ev.data != child_id:
                raise ReplayTypeMismatch(
                    f"spawn divergence: trace has child {ev.data}, "
                    f"program computed {child_id}"
                )
            self.progress.bump()
        if kind is ActivityKind.ACTOR:
            child: Activity = ActorActivity(self, child_id, entry, code, length, name)
            self.actor_pool.start()
        else:
            child = ThreadActivity(self, child_id, kind, entry, args, code, length, name)
            child.start()
        return child

    # -- running ------------------------------------------------------------------

    def run(self, entry: Callable, *args) -> RunResult:
        """Execute ``entry`` as the main activity (id 0) and finalize.

        Joins all thread/process activities, waits for actor quiescence,
        flushes and closes the trace, verifies full trace consumption in
        replay, and returns outputs plus the behavior digest.
        """
        if self._ran:
            raise UsageError("an Execution object runs exactly once")
        self._ran = True
        main = Activity(self, 0, ActivityKind.THREAD, name="main")
        set_current_activity(main)
        outputs = None
        try:
            outputs = entry(*args)
        except ExecutionAborted:
            pass
        except BaseException as exc:  # noqa: BLE001
            self.abort(exc)
        finally:
            set_current_activity(None)

        try:
            # Actors may spawn threads and threads may message actors, so
            # alternate joining and quiescence until nothing new appears.
            joined: set[int] = set()
            while True:
                pending = [
                    act for act in list(self.activities.values())
                    if isinstance(act, ThreadActivity)
                    and act is not main and act.id not in joined
                ]
                if not pending:
                    self.actor_pool.wait_quiescent()
                    still = [
                        act for act in list(self.activities.values())
                        if isinstance(act, ThreadActivity)
                        and act is not main and act.id not in joined
                    ]
                    if not still:
                        break
                    continue
                for act in pending:
                    act.join()
                    joined.add(act.id)
        except ExecutionAborted:
            pass
        except BaseException as exc:  # noqa: BLE001
            self.abort(exc)
        self.actor_pool.shutdown()

        for act in self.activities.values():
            act.finish_tracing()
        if self.sink is not None:
            self.sink.close()

        if self._abort_exc is not None:
            raise self._abort_exc

        if self.mode is ExecutionMode.REPLAY:
            self._check_full_consumption()

        digest = self.compute_digest(outputs)
        actor_logs = {
            act.id: list(act.processed_log)
            for act in self.activities.values()
            if isinstance(act, ActorActivity)
        }
        return RunResult(
            outputs=outputs,
            digest=digest,
            mode=self.mode,
            strategy=self.strategy,
            trace_path=self.trace_path,
            actor_logs=actor_logs,
        )

    def _check_full_consumption(self) -> None:
        leftovers = {
            activity_id: (len(queue), queue.peek())
            for activity_id, queue in self._queues.items()
            if len(queue)
        }
        if leftovers:
            detail = "; ".join(
                f"activity {aid}: {n} events left, next {ev.type_name}(data={ev.data})"
                for aid, (n, ev) in sorted(leftovers.items())
            )
            raise ReplayLeftoverEvents(f"replay did not consume the trace: {detail}")

    # -- reporting -------------------------------------------------------------------

    def compute_digest(self, outputs: Any) -> str:
        """Stable hash over outputs and per-entity ordered interaction logs."""
        h = hashlib.sha256()
        h.update(json.dumps(outputs, sort_keys=True, default=repr).encode())
        with self._entities_lock:
            entities = sorted(self.entities, key=lambda e: e.entity_id)
        for entity in entities:
            h.update(f"\n#{entity.kind}{entity.entity_id}".encode())
            for activity_id, event_type, data in entity.digest_lines():
                h.update(f"|{activity_id},{event_type},{data}".encode())
        return h.hexdigest()

    def version_completeness_report(self) -> list[str]:
        """Violations of the gap-free 0..K-1 recorded-version property."""
        problems = []
        with self._entities_lock:
            entities = list(self.entities)
        for entity in entities:
            problem = entity.check_version_completeness()
            if problem:
                problems.append(problem)
        return problems


# -- module-level user API ----------------------------------------------------------


def spawn_thread(entry: Callable, *args, name: str = "") -> ThreadActivity:
    """Start a new thread activity as a child of the current activity."""
    ex = current_activity().execution
    return ex.spawn(ActivityKind.THREAD, entry, args, name)


def spawn_process(entry: Callable, *args, name: str = "") -> ThreadActivity:
    """Start a new CSP-style process activity (thread-backed)."""
    ex = current_activity().execution
    return ex.spawn(ActivityKind.PROCESS, entry, args, name)


def spawn_actor(handler: Callable[[Any], None], name: str = "") -> ActorActivity:
    """Create a new actor whose event loop runs ``handler`` per message."""
    ex = current_activity().execution
    return ex.spawn(ActivityKind.ACTOR, handler, (), name)
