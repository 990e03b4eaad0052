"""Reentrant locks and condition variables with acquisition-order replay.

Every completed acquisition, explicit ``acquire()`` calls as well as the
implicit reacquisitions performed when a condition wait returns, bumps the
lock's version counter. Explicit acquisitions record a LOCK event carrying the
pre-increment version; timed waits record AWAIT_SIGNALED/AWAIT_TIMEOUT
carrying the reacquisition version. Untimed waits record nothing: their
place in the order is pinned by the version increment itself plus the
other activities' recorded acquisitions.

Replay delays each explicit acquisition until the lock's version equals
the recorded one. Implicit reacquisitions are not event-gated, so their
ordering must be a deterministic function of lock state that recording
and replay share: wake selection by ``signal``/``signal_all`` is strict
FIFO, signaled waiters reacquire in that FIFO order with priority over
explicit acquirers, and a replayer whose recorded version currently
matches the lock (an explicit acquisition or a simulated timeout) goes
first, mirroring that, in the recording, it held the lock before the
signal it would otherwise defer to.

Recorded timeouts are simulated: replay releases the lock and waits for
the recorded version instead of letting wall time pass.
"""

from __future__ import annotations

import time
from collections import deque
from typing import Optional

from .activities import Activity, current_activity
from .errors import NotOwner, ReplayQueueExhausted, ReplayTypeMismatch
from .events import EventType
from .tracing import (
    ExecutionMode,
    VersionedEntity,
    increment_version,
    record_interaction,
    watchdog_wait,
)
from .tracing import DeadlockSentry, WAIT_TICK


class _CondWaiter:
    __slots__ = ("activity", "signaled")

    def __init__(self, activity: Activity):
        self.activity = activity
        self.signaled = False


class RRLock(VersionedEntity):
    """Reentrant exclusive lock; version counts completed acquisitions."""

    kind = "lock"

    def __init__(self):
        super().__init__()
        self._owner: Optional[Activity] = None
        self._depth = 0
        # Signaled condition waiters awaiting reacquisition, in signal order.
        self._implicit_queue: deque[_CondWaiter] = deque()
        # Replayed acquirers gated on a version: version -> waiter count.
        self._gated_versions: dict[int, int] = {}
        # Untimed condition waits record nothing but bump the version.
        self.untimed_reacquisitions = 0

    def check_version_completeness(self):
        versions = self.recorded_versions()
        if len(set(versions)) != len(versions):
            return f"lock {self.entity_id}: duplicate recorded versions"
        if any(v >= self.version for v in versions):
            return f"lock {self.entity_id}: recorded version beyond final counter"
        if len(versions) + self.untimed_reacquisitions != self.version:
            return (f"lock {self.entity_id}: {len(versions)} recorded + "
                    f"{self.untimed_reacquisitions} untimed reacquisitions "
                    f"!= final version {self.version}")
        return None

    # -- gating bookkeeping ---------------------------------------------------

    def _gate_register(self, version: int) -> None:
        self._gated_versions[version] = self._gated_versions.get(version, 0) + 1

    def _gate_unregister(self, version: int) -> None:
        count = self._gated_versions[version] - 1
        if count:
            self._gated_versions[version] = count
        else:
            del self._gated_versions[version]

    def _claim(self, activity: Activity, depth: int) -> None:
        # monitor held, owner is None
        self._owner = activity
        self._depth = depth

    # -- public operations ----------------------------------------------------

    def acquire(self) -> None:
        act = current_activity()
        ex = self.execution
        with self._monitor:
            if self._owner is act:
                self._depth += 1  # reentrant: deterministic, not recorded
                return
        if ex.mode is ExecutionMode.REPLAY:
            act.perturb_point()
            ev = act.replay_queue.expect(EventType.LOCK)
            with self._monitor:
                self._gate_register(ev.data)
                try:
                    watchdog_wait(
                        self._monitor,
                        lambda: self.version == ev.data and self._owner is None,
                        ex,
                    )
                finally:
                    self._gate_unregister(ev.data)
                act.replay_queue.poll()
                self.note(act.id, EventType.LOCK, ev.data)
                self._claim(act, 1)
                increment_version(self)
            ex.progress.bump()
        else:
            with self._monitor:
                # Signaled waiters reacquire first (FIFO); giving them strict
                # priority makes the implicit-vs-explicit race a deterministic
                # function of lock state, identically in recording and replay.
                watchdog_wait(
                    self._monitor,
                    lambda: self._owner is None and not self._implicit_queue,
                    ex,
                )
                self._claim(act, 1)
                record_interaction(act, EventType.LOCK, self.version, entity=self)
                increment_version(self)

    def release(self) -> None:
        act = current_activity()
        with self._monitor:
            if self._owner is not act:
                raise NotOwner(f"{act.name} does not hold this lock")
            self._depth -= 1
            if self._depth == 0:
                self._owner = None
                self._monitor.notify_all()

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc_info):
        self.release()
        return False

    # -- internals shared with RRCondition -------------------------------------

    def _release_fully(self, act: Activity) -> int:
        # monitor held
        if self._owner is not act:
            raise NotOwner(f"{act.name} does not hold this lock")
        depth = self._depth
        self._owner = None
        self._depth = 0
        self._monitor.notify_all()
        return depth

    def _reacquire_implicit(self, act: Activity, waiter: _CondWaiter, depth: int) -> None:
        """Reacquire after a condition wait; FIFO among implicit waiters,
        deferring to any replayer gated on the current version."""
        # monitor held; waiter is already in the implicit queue
        watchdog_wait(
            self._monitor,
            lambda: (
                self._owner is None
                and self._implicit_queue
                and self._implicit_queue[0] is waiter
                and self.version not in self._gated_versions
            ),
            self.execution,
        )
        self._implicit_queue.popleft()
        self._claim(act, depth)

    def _reacquire_at_version(self, act: Activity, target_version: int, depth: int) -> None:
        """Timeout simulation: reacquire once the version reaches the
        recorded value."""
        # monitor held
        self._gate_register(target_version)
        try:
            watchdog_wait(
                self._monitor,
                lambda: self.version == target_version and self._owner is None,
                self.execution,
            )
        finally:
            self._gate_unregister(target_version)
        self._claim(act, depth)


class RRCondition:
    """Condition variable bound to an RRLock; FIFO wake order."""

    def __init__(self, lock: RRLock):
        self._lock = lock
        self._wait_queue: deque[_CondWaiter] = deque()

    def wait(self) -> None:
        """Release the lock, wait for a signal, reacquire.

        Records no event; the reacquisition bumps the lock version, which
        is what pins its place in the replayed order. Callers must re-check
        their predicate in a loop, as with any condition variable.
        """
        lock = self._lock
        act = current_activity()
        with lock._monitor:
            depth = lock._release_fully(act)
            waiter = _CondWaiter(act)
            self._wait_queue.append(waiter)
            watchdog_wait(lock._monitor, lambda: waiter.signaled, lock.execution)
            lock._reacquire_implicit(act, waiter, depth)
            if lock.execution.mode is not ExecutionMode.PASSIVE:
                lock.untimed_reacquisitions += 1
            increment_version(lock)

    def wait_timeout(self, timeout: float) -> bool:
        """Timed wait; returns True if signaled, False on timeout.

        The outcome is recorded and replay reproduces it: a recorded
        timeout returns False without waiting out the clock, a recorded
        signal waits for the actual (replayed) signal.
        """
        lock = self._lock
        act = current_activity()
        ex = lock.execution
        if ex.mode is ExecutionMode.REPLAY:
            return self._replay_wait_timeout(act)

        with lock._monitor:
            depth = lock._release_fully(act)
            waiter = _CondWaiter(act)
            self._wait_queue.append(waiter)
            deadline = time.monotonic() + timeout
            sentry = DeadlockSentry(ex)
            while not waiter.signaled:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                sentry.poll()
                lock._monitor.wait(min(WAIT_TICK, remaining))
            signaled = waiter.signaled
            if not signaled:
                # Not yet signaled: withdraw and rejoin as a timed-out
                # reacquirer. Atomic here because signals move waiters
                # only under this monitor.
                self._wait_queue.remove(waiter)
                lock._implicit_queue.append(waiter)
            lock._reacquire_implicit(act, waiter, depth)
            record_interaction(
                act,
                EventType.AWAIT_SIGNALED if signaled else EventType.AWAIT_TIMEOUT,
                lock.version,
                entity=lock,
            )
            increment_version(lock)
            return signaled

    def _replay_wait_timeout(self, act: Activity) -> bool:
        lock = self._lock
        act.perturb_point()
        head = act.replay_queue.peek()
        if head is None:
            raise ReplayQueueExhausted(
                f"activity {act.id}: trace exhausted at a timed wait"
            )
        if head.event_type == EventType.AWAIT_SIGNALED:
            act.replay_queue.poll()
            with lock._monitor:
                depth = lock._release_fully(act)
                waiter = _CondWaiter(act)
                self._wait_queue.append(waiter)
                watchdog_wait(lock._monitor, lambda: waiter.signaled, lock.execution)
                lock._reacquire_implicit(act, waiter, depth)
                lock.note(act.id, EventType.AWAIT_SIGNALED, head.data)
                increment_version(lock)
            lock.execution.progress.bump()
            return True
        if head.event_type == EventType.AWAIT_TIMEOUT:
            act.replay_queue.poll()
            with lock._monitor:
                depth = lock._release_fully(act)
                lock._reacquire_at_version(act, head.data, depth)
                lock.note(act.id, EventType.AWAIT_TIMEOUT, head.data)
                increment_version(lock)
            lock.execution.progress.bump()
            return False
        raise ReplayTypeMismatch(
            f"activity {act.id}: timed wait expected AWAIT_SIGNALED or "
            f"AWAIT_TIMEOUT, trace holds {head.type_name}"
        )

    def signal(self) -> None:
        """Wake the longest-waiting waiter; no event is recorded."""
        lock = self._lock
        act = current_activity()
        with lock._monitor:
            if lock._owner is not act:
                raise NotOwner(f"{act.name} does not hold the condition's lock")
            if self._wait_queue:
                waiter = self._wait_queue.popleft()
                waiter.signaled = True
                lock._implicit_queue.append(waiter)
                lock._monitor.notify_all()

    def signal_all(self) -> None:
        """Wake all waiters, preserving their waiting order."""
        lock = self._lock
        act = current_activity()
        with lock._monitor:
            if lock._owner is not act:
                raise NotOwner(f"{act.name} does not hold the condition's lock")
            while self._wait_queue:
                waiter = self._wait_queue.popleft()
                waiter.signaled = True
                lock._implicit_queue.append(waiter)
            lock._monitor.notify_all()
