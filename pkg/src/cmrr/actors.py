"""Communicating event-loop actors with promises.

Each actor has isolated state, a mailbox, and an event loop that handles
one message at a time; actors are multiplexed over a worker pool. Two
interchangeable recording strategies are supported, selected per run:

* sender-side: every send records the target mailbox's version into the
  sender's trace; replay attaches the recorded version to the message and
  the mailbox becomes a priority queue drained in version order. Promise
  store/resolve races get their own versioned events.
* receiver-side: the processing actor records the sender identity of each
  message (plus a per-sender sequence number for promise messages, split
  into a separate preceding event); replay scans the arrival-order mailbox
  for the message matching the next recorded receive.

Replay never blocks a pool worker waiting on a mailbox: an actor whose
next recorded message has not arrived simply yields and is re-polled when
new mail shows up.
"""

from __future__ import annotations

import heapq
import threading
from collections import deque
from typing import Any, Callable, Optional

from .activities import (
    Activity,
    ActivityKind,
    current_activity,
    set_current_activity,
)
from .errors import (
    AlreadyResolved,
    ExecutionAborted,
    ReplayQueueExhausted,
    ReplayTypeMismatch,
    UsageError,
)
from .events import EventType
from .tracefile import ActorStrategy
from .tracing import (
    ExecutionMode,
    VersionedEntity,
    delay_interaction,
    increment_version,
    record_interaction,
    watchdog_wait,
)


class Message:
    """One actor message.

    ``sender_id`` is the original author (kept across promise forwarding);
    ``seq`` numbers every message per sender; ``promise_message_id``
    numbers promise-bound messages per sender and is present iff the
    message was sent to a promise; ``version`` is the sender-side mailbox
    ordering key, attached at enqueue time.
    """

    __slots__ = ("sender_id", "payload", "seq", "promise_message_id", "version")

    def __init__(self, sender_id: int, payload: Any, seq: int,
                 promise_message_id: Optional[int] = None):
        self.sender_id = sender_id
        self.payload = payload
        self.seq = seq
        self.promise_message_id = promise_message_id
        self.version = 0

    @property
    def is_promise_message(self) -> bool:
        return self.promise_message_id is not None


class _CallbackInvocation:
    """Internal payload that runs a promise callback on the registrant's loop."""

    __slots__ = ("fn", "value")

    def __init__(self, fn: Callable[[Any], None], value: Any):
        self.fn = fn
        self.value = value


class _Mailbox(VersionedEntity):
    kind = "mailbox"


class ActorActivity(Activity):
    """An actor: activity plus mailbox, scheduled on the worker pool."""

    def __init__(self, execution, activity_id, handler: Callable[[Any], None],
                 path_code=0, path_len=0, name=""):
        super().__init__(execution, activity_id, ActivityKind.ACTOR,
                         path_code, path_len, name)
        self._handler = handler
        self.mailbox_entity = _Mailbox()
        self._monitor = self.mailbox_entity._monitor
        self._fifo: deque[Message] = deque()
        self._heap: list[tuple[int, int, Message]] = []
        self._heap_seq = 0
        self._processed_count = 0
        self._scheduled = False
        self._running = False
        self._mail_dirty = False
        self.processed_log: list[tuple[int, int]] = []
        self.errors: list[BaseException] = []
        self.error_hook: Optional[Callable[[BaseException], None]] = None

    # -- sending ------------------------------------------------------------

    def enqueue(self, msg: Message) -> None:
        """Deliver a message; callable from any activity.

        The acting (current) activity carries the trace semantics; the
        message's ``sender_id`` may differ when a promise forwards it.
        """
        acting = current_activity()
        ex = self.execution
        mode = ex.mode
        sender_side = ex.strategy is ActorStrategy.SENDER_SIDE
        pool = ex.actor_pool

        if mode is ExecutionMode.REPLAY and sender_side:
            # Non-blocking by design: attach the recorded version instead
            # of delaying the send, so pool workers can always run.
            acting.perturb_point()
            acting.replay_queue.expect(EventType.MSG_SEND)
            with self._monitor:
                ev = acting.replay_queue.poll()
                msg.version = ev.data
                heapq.heappush(self._heap, (msg.version, self._heap_seq, msg))
                self._heap_seq += 1
                self._mail_dirty = True
                pool.note_enqueued()
                self._schedule_if_needed()
            ex.progress.bump()
            return

        with self._monitor:
            if sender_side:
                record_interaction(acting, EventType.MSG_SEND, self.mailbox_entity.version)
                msg.version = self.mailbox_entity.version
            self._fifo.append(msg)
            if mode is ExecutionMode.RECORD and sender_side:
                increment_version(self.mailbox_entity)
            self._mail_dirty = True
            pool.note_enqueued()
            self._schedule_if_needed()

    # -- scheduling ---------------------------------------------------------

    def _schedule_if_needed(self) -> None:
        # monitor held
        if not self._scheduled and not self._running:
            self._scheduled = True
            self.execution.actor_pool.push_ready(self)

    def _has_runnable_work(self) -> bool:
        # monitor held
        ex = self.execution
        if ex.mode is ExecutionMode.REPLAY:
            if ex.strategy is ActorStrategy.SENDER_SIDE:
                return bool(self._heap) and self._heap[0][0] == self._processed_count
            return self._mail_dirty
        return bool(self._fifo)

    def run_slice(self) -> None:
        """Process every currently runnable message, then yield the worker."""
        with self._monitor:
            self._scheduled = False
            self._running = True
        set_current_activity(self)
        try:
            self._drain()
        except ExecutionAborted:
            pass
        except BaseException as exc:  # noqa: BLE001 - replay divergence etc.
            self.execution.abort(exc)
        finally:
            set_current_activity(None)
            with self._monitor:
                self._running = False
                if self._has_runnable_work():
                    self._schedule_if_needed()

    # -- event loop ----------------------------------------------------------

    def _drain(self) -> None:
        ex = self.execution
        if ex.mode is ExecutionMode.REPLAY:
            if ex.strategy is ActorStrategy.SENDER_SIDE:
                self._drain_replay_sender_side()
            else:
                self._drain_replay_receiver_side()
        else:
            self._drain_in_order()

    def _drain_in_order(self) -> None:
        receiver_side = (self.execution.strategy is ActorStrategy.RECEIVER_SIDE
                         and self.execution.mode is ExecutionMode.RECORD)
        while True:
            with self._monitor:
                if not self._fifo:
                    self._mail_dirty = False
                    return
                msg = self._fifo.popleft()
            if receiver_side:
                mailbox = self.mailbox_entity
                if msg.is_promise_message:
                    record_interaction(self, EventType.PROMMSG_RCVD,
                                       msg.promise_message_id, entity=mailbox)
                record_interaction(self, EventType.MSG_RCVD, msg.sender_id,
                                   entity=mailbox)
            elif self.execution.mode is ExecutionMode.RECORD:
                # sender-side: the send already recorded the event; note the
                # processing order (== version order) for the run digest.
                self.mailbox_entity.note(msg.sender_id, EventType.MSG_SEND, msg.version)
            self._execute(msg)

    def _drain_replay_sender_side(self) -> None:
        while True:
            with self._monitor:
                if not (self._heap and self._heap[0][0] == self._processed_count):
                    return  # yield; re-polled when the gap message arrives
                _, _, msg = heapq.heappop(self._heap)
                self._processed_count += 1
            self.mailbox_entity.note(msg.sender_id, EventType.MSG_SEND, msg.version)
            self.execution.progress.bump()
            self._execute(msg)

    def _drain_replay_receiver_side(self) -> None:
        queue = self.replay_queue
        mailbox = self.mailbox_entity
        while True:
            with self._monitor:
                self._mail_dirty = False
                pending = list(self._fifo)
            if not pending:
                return
            head = queue.peek()
            if head is None:
                raise ReplayQueueExhausted(
                    f"{self.name}: messages pending but receive trace exhausted"
                )
            if head.event_type not in (EventType.MSG_RCVD, EventType.PROMMSG_RCVD):
                raise ReplayTypeMismatch(
                    f"{self.name}: expected a receive event, trace holds "
                    f"{head.type_name}(data={head.data})"
                )
            match = self._find_match(pending, head, queue)
            if match is None:
                return  # awaited message not here yet; yield
            with self._monitor:
                self._fifo.remove(match)
            self.perturb_point()
            ev = queue.poll()
            mailbox.note(self.id, ev.event_type, ev.data)
            if ev.event_type == EventType.PROMMSG_RCVD:
                second = queue.poll()
                mailbox.note(self.id, second.event_type, second.data)
            self.execution.progress.bump()
            self._execute(match)

    @staticmethod
    def _find_match(pending, head, queue) -> Optional[Message]:
        if head.event_type == EventType.PROMMSG_RCVD:
            second = queue.peek_second()
            if second is None:
                raise ReplayQueueExhausted(
                    "promise receive event lacks its follow-up sender event"
                )
            if second.event_type != EventType.MSG_RCVD:
                raise ReplayTypeMismatch(
                    f"promise receive must be followed by a sender event, "
                    f"trace holds {second.type_name}"
                )
            for msg in pending:
                if (msg.is_promise_message
                        and msg.promise_message_id == head.data
                        and msg.sender_id == second.data):
                    return msg
            return None
        for msg in pending:
            if not msg.is_promise_message and msg.sender_id == head.data:
                return msg
        return None

    def _execute(self, msg: Message) -> None:
        self.processed_log.append((msg.sender_id, msg.seq))
        try:
            payload = msg.payload
            if isinstance(payload, _CallbackInvocation):
                payload.fn(payload.value)
            else:
                self._handler(payload)
        except ExecutionAborted:
            raise
        except BaseException as exc:  # noqa: BLE001
            # Handler errors are deterministic under replay; report them to
            # the per-actor hook and keep consuming events.
            self.errors.append(exc)
            if self.error_hook is not None:
                self.error_hook(exc)
        finally:
            self.execution.actor_pool.note_processed()


class ActorPool:
    """Fixed-size worker pool multiplexing all actor event loops."""

    def __init__(self, execution, size: int):
        self.execution = execution
        self.size = size
        self._ready: "deque[ActorActivity]" = deque()
        self._ready_cond = threading.Condition()
        self._workers: list[threading.Thread] = []
        self._work_cond = threading.Condition()
        self._unprocessed = 0
        self._shutdown = False
        self._started = False
        self._start_lock = threading.Lock()

    def start(self) -> None:
        with self._start_lock:
            if self._started:
                return
            self._started = True
            for i in range(self.size):
                t = threading.Thread(target=self._worker_loop,
                                     name=f"actor-worker-{i}", daemon=True)
                t.start()
                self._workers.append(t)

    def push_ready(self, actor: ActorActivity) -> None:
        with self._ready_cond:
            self._ready.append(actor)
            self._ready_cond.notify()

    def _worker_loop(self) -> None:
        while True:
            with self._ready_cond:
                while not self._ready and not self._shutdown:
                    self._ready_cond.wait()
                if self._shutdown and not self._ready:
                    return
                actor = self._ready.popleft()
            actor.run_slice()

    def note_enqueued(self) -> None:
        with self._work_cond:
            self._unprocessed += 1

    def note_processed(self) -> None:
        with self._work_cond:
            self._unprocessed -= 1
            if self._unprocessed == 0:
                self._work_cond.notify_all()
        self.execution.progress.bump()

    @property
    def unprocessed(self) -> int:
        return self._unprocessed

    def wait_quiescent(self) -> None:
        """Block until no message is pending or being processed."""
        if not self._started:
            return
        with self._work_cond:
            watchdog_wait(self._work_cond, lambda: self._unprocessed == 0,
                          self.execution)

    def shutdown(self) -> None:
        if not self._started:
            return
        with self._ready_cond:
            self._shutdown = True
            self._ready_cond.notify_all()
        for t in self._workers:
            t.join()


class Promise(VersionedEntity):
    """Placeholder for an asynchronous result.

    Messages and callbacks aimed at the result are buffered until
    resolution and then forwarded in stored order. Under the sender-side
    strategy the store/resolve race is made replayable by versioned
    events; under the receiver-side strategy the receiving actors' traces
    already pin down every delivery.
    """

    kind = "promise"

    def __init__(self):
        super().__init__()
        self._resolved = False
        self._value: Any = None
        self._pending: list[tuple[str, Any]] = []

    @property
    def resolved(self) -> bool:
        return self._resolved

    @property
    def value(self) -> Any:
        if not self._resolved:
            raise UsageError("promise not resolved yet")
        return self._value

    def _traced(self) -> bool:
        ex = self.execution
        return (ex.strategy is ActorStrategy.SENDER_SIDE
                and ex.mode in (ExecutionMode.RECORD, ExecutionMode.REPLAY))

    # -- sending to the eventual result --------------------------------------

    def send(self, payload: Any) -> None:
        """Send a message to the promise's eventual result (an actor)."""
        acting = current_activity()
        msg = Message(acting.id, payload, acting.next_msg_seq(),
                      promise_message_id=self._next_promise_msg_id(acting))
        self._store_or_forward("msg", msg)

    def when_resolved(self, fn: Callable[[Any], None]) -> None:
        """Run ``fn(value)`` on the registering actor's event loop once
        the promise resolves."""
        acting = current_activity()
        if not isinstance(acting, ActorActivity):
            raise UsageError("promise callbacks require an actor activity")
        entry = (acting, fn, acting.next_msg_seq(), self._next_promise_msg_id(acting))
        self._store_or_forward("cb", entry)

    @staticmethod
    def _next_promise_msg_id(acting) -> int:
        pid = acting.promise_msg_counter
        acting.promise_msg_counter += 1
        return pid

    def _store_or_forward(self, tag: str, item: Any) -> None:
        acting = current_activity()
        ex = self.execution
        if self._traced() and ex.mode is ExecutionMode.REPLAY:
            # The sender's own trace tells us which side of the
            # store/resolve race this operation was on.
            acting.perturb_point()
            head = acting.replay_queue.peek()
            if head is None:
                raise ReplayQueueExhausted(f"activity {acting.id}: trace exhausted "
                                           f"at a promise operation")
            if head.event_type == EventType.PROMISE_MSG_STORE:
                delay_interaction(acting, self, EventType.PROMISE_MSG_STORE)
                with self._monitor:
                    self._pending.append((tag, item))
                increment_version(self)
                return
            if head.event_type == EventType.MSG_SEND:
                with self._monitor:
                    self.wait_on_monitor(lambda: self._resolved)
                self._forward(tag, item)
                return
            raise ReplayTypeMismatch(
                f"activity {acting.id}: promise operation expected "
                f"PROMISE_MSG_STORE or MSG_SEND, trace holds {head.type_name}"
            )

        traced = self._traced()
        with self._monitor:
            if not self._resolved:
                if traced:
                    record_interaction(acting, EventType.PROMISE_MSG_STORE,
                                       self.version, entity=self)
                    self._pending.append((tag, item))
                    increment_version(self)
                else:
                    # Receiver-side/passive: the race needs no events; the
                    # receiving actors' traces pin every delivery.
                    self._pending.append((tag, item))
                return
        self._forward(tag, item)

    # -- resolution -----------------------------------------------------------

    def resolve(self, value: Any) -> None:
        """Resolve at most once; forwards all stored messages and callbacks."""
        acting = current_activity()
        with self._monitor:
            if self._resolved:
                raise AlreadyResolved("promise already resolved")
        traced = self._traced()
        if traced and self.execution.mode is ExecutionMode.REPLAY:
            delay_interaction(acting, self, EventType.PROMISE_RESOLVE)
            with self._monitor:
                pending = self._take_resolved(value)
            increment_version(self)
        else:
            with self._monitor:
                if self._resolved:
                    raise AlreadyResolved("promise already resolved")
                if traced:
                    record_interaction(acting, EventType.PROMISE_RESOLVE,
                                       self.version, entity=self)
                    pending = self._take_resolved(value)
                    increment_version(self)
                else:
                    pending = self._take_resolved(value)
        for tag, item in pending:
            self._forward(tag, item)

    def _take_resolved(self, value) -> list[tuple[str, Any]]:
        # monitor held
        self._resolved = True
        self._value = value
        pending, self._pending = self._pending, []
        self._monitor.notify_all()
        return pending

    def _forward(self, tag: str, item: Any) -> None:
        if tag == "cb":
            registrant, fn, seq, pid = item
            msg = Message(registrant.id, _CallbackInvocation(fn, self._value),
                          seq, promise_message_id=pid)
            registrant.enqueue(msg)
            return
        target = self._value
        if not isinstance(target, ActorActivity):
            raise UsageError(
                "promise carrying pending messages resolved to a non-actor value"
            )
        item_msg: Message = item
        target.enqueue(item_msg)


def send(target: ActorActivity, payload: Any) -> None:
    """Send a plain message to an actor from any activity."""
    acting = current_activity()
    msg = Message(acting.id, payload, acting.next_msg_seq())
    target.enqueue(msg)
