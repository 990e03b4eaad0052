"""Lock acquisition order, condition waits, and timed-wait outcome replay."""

import time

import pytest

from cmrr import EventType, RRCondition, RRLock, parse_trace, spawn_thread
from cmrr.errors import NotOwner
from conftest import passive_run, record_run, replay_run


def _type_counts(trace, activity_id):
    from collections import Counter

    return Counter(e.event_type for e in trace.queues[activity_id].events)


def test_single_activity_two_acquisitions(trace_path):
    def program():
        lock = RRLock()
        lock.acquire()
        lock.release()
        lock.acquire()
        lock.release()
        return lock.version

    ex, result = record_run(program, trace_path)
    assert result.outputs == 2
    events = [e for e in parse_trace(trace_path).queues[0].events
              if e.event_type == EventType.LOCK]
    assert [(e.event_type, e.data) for e in events] == [
        (EventType.LOCK, 0), (EventType.LOCK, 1),
    ]


def test_release_only_acquisitions_recorded(trace_path):
    def program():
        lock = RRLock()
        for _ in range(100):
            with lock:
                pass
        return lock.version

    ex, result = record_run(program, trace_path)
    assert result.outputs == 100
    counts = _type_counts(parse_trace(trace_path), 0)
    assert counts[EventType.LOCK] == 100


def test_reentrant_acquisition_not_recorded(trace_path):
    def program():
        lock = RRLock()
        with lock:
            with lock:
                with lock:
                    pass
        return lock.version

    ex, result = record_run(program, trace_path)
    assert result.outputs == 1
    counts = _type_counts(parse_trace(trace_path), 0)
    assert counts[EventType.LOCK] == 1


def test_release_without_acquire_raises():
    def program():
        RRLock().release()

    with pytest.raises(NotOwner):
        passive_run(program)


def test_condition_ops_require_lock():
    def program(op):
        lock = RRLock()
        cond = RRCondition(lock)
        getattr(cond, op)()

    for op in ("wait", "signal", "signal_all"):
        with pytest.raises(NotOwner):
            passive_run(program, op)


def test_signal_with_no_waiters_is_noop(trace_path):
    def program():
        lock = RRLock()
        cond = RRCondition(lock)
        with lock:
            cond.signal()
            cond.signal_all()
        return lock.version

    ex, result = record_run(program, trace_path)
    assert result.outputs == 1  # only the explicit acquisition
    counts = _type_counts(parse_trace(trace_path), 0)
    assert counts[EventType.LOCK] == 1
    assert EventType.AWAIT_SIGNALED not in counts


def _contention_program(delays):
    lock = RRLock()
    order = []

    def worker(tag, delay):
        time.sleep(delay)
        with lock:
            order.append(tag)

    a1 = spawn_thread(worker, "A1", delays[0])
    a2 = spawn_thread(worker, "A2", delays[1])
    a1.join()
    a2.join()
    return {"order": order}


def test_recorded_order_reproduced_under_inverted_arrival(trace_path):
    ex, recorded = record_run(_contention_program, trace_path, (0.03, 0.0))
    assert recorded.outputs["order"] == ["A2", "A1"]
    for _ in range(20):
        ex2, replayed = replay_run(_contention_program, trace_path, (0.0, 0.02))
        assert replayed.outputs["order"] == ["A2", "A1"]
        assert replayed.digest == recorded.digest


def test_lock_version_counts_explicit_and_implicit_acquisitions(trace_path):
    def program():
        lock = RRLock()
        cond = RRCondition(lock)
        state = {"ready": False}

        def waiter():
            with lock:
                while not state["ready"]:
                    cond.wait()

        t = spawn_thread(waiter)
        time.sleep(0.05)
        with lock:
            state["ready"] = True
            cond.signal()
        t.join()
        return lock.version

    ex, result = record_run(program, trace_path)
    # waiter's explicit + main's explicit + waiter's implicit reacquisition
    assert result.outputs == 3
    counts = _type_counts(parse_trace(trace_path), 0)
    total_locks = sum(
        _type_counts(parse_trace(trace_path), aid)[EventType.LOCK]
        for aid in parse_trace(trace_path).queues
    )
    assert total_locks == 2  # untimed wait reacquisition records nothing


def _producer_consumers(n_items):
    lock = RRLock()
    cond = RRCondition(lock)
    queue = []
    wakes = []
    done = {"produced": 0}

    def consumer(tag):
        consumed = 0
        while True:
            with lock:
                while not queue and done["produced"] < n_items:
                    cond.wait()
                if not queue and done["produced"] >= n_items:
                    return
                item = queue.pop(0)
                wakes.append((tag, item))
            consumed += 1

    def producer():
        for i in range(n_items):
            with lock:
                queue.append(i)
                done["produced"] += 1
                cond.signal()
                time.sleep(0)
        with lock:
            cond.signal_all()

    consumers = [spawn_thread(consumer, t) for t in ("c1", "c2", "c3")]
    prod = spawn_thread(producer)
    prod.join()
    for c in consumers:
        c.join()
    return {"wakes": wakes}


def test_producer_consumer_wake_order_stable_across_replays(trace_path):
    ex, recorded = record_run(_producer_consumers, trace_path, 12, seed=5)
    assert sorted(i for _, i in recorded.outputs["wakes"]) == list(range(12))
    for seed in range(20):
        ex2, replayed = replay_run(_producer_consumers, trace_path, 12, seed=seed)
        assert replayed.outputs["wakes"] == recorded.outputs["wakes"]
        assert replayed.digest == recorded.digest


def _signal_all_program():
    lock = RRLock()
    cond = RRCondition(lock)
    state = {"go": False}
    wake_order = []

    def waiter(tag, start_delay):
        time.sleep(start_delay)
        with lock:
            while not state["go"]:
                cond.wait()
            wake_order.append(tag)

    waiters = [spawn_thread(waiter, tag, 0.01 * i)
               for i, tag in enumerate(("w1", "w2", "w3"))]
    time.sleep(0.08)
    with lock:
        state["go"] = True
        cond.signal_all()
    for t in waiters:
        t.join()
    return {"wake_order": wake_order}


def test_signal_all_wakes_every_waiter_in_replayable_order(trace_path):
    ex, recorded = record_run(_signal_all_program, trace_path)
    assert sorted(recorded.outputs["wake_order"]) == ["w1", "w2", "w3"]
    for _ in range(10):
        ex2, replayed = replay_run(_signal_all_program, trace_path)
        assert replayed.outputs["wake_order"] == recorded.outputs["wake_order"]
        assert replayed.digest == recorded.digest


def _timeout_program():
    lock = RRLock()
    cond = RRCondition(lock)
    outcomes = []

    def waiter():
        with lock:
            outcomes.append(cond.wait_timeout(5.0))   # will be signaled
            outcomes.append(cond.wait_timeout(0.4))   # nobody signals: times out

    t = spawn_thread(waiter)
    time.sleep(0.1)
    with lock:
        cond.signal()
    t.join()
    return {"outcomes": outcomes}


def test_wait_timeout_outcomes_replay_without_waiting(trace_path):
    ex, recorded = record_run(_timeout_program, trace_path)
    assert recorded.outputs["outcomes"] == [True, False]

    counts = {}
    trace = parse_trace(trace_path)
    for aid in trace.queues:
        for e in trace.queues[aid].events:
            counts[e.event_type] = counts.get(e.event_type, 0) + 1
    assert counts[EventType.AWAIT_SIGNALED] == 1
    assert counts[EventType.AWAIT_TIMEOUT] == 1

    for _ in range(5):
        start = time.monotonic()
        ex2, replayed = replay_run(_timeout_program, trace_path)
        elapsed = time.monotonic() - start
        assert replayed.outputs["outcomes"] == [True, False]
        # recorded timeout is simulated: replay must beat the 0.4s timer
        assert elapsed < 0.4, f"replay took {elapsed:.2f}s"
        assert replayed.digest == recorded.digest


def test_lock_order_invariant_from_entity_logs(trace_path):
    ex, recorded = record_run(_contention_program, trace_path, (0.0, 0.01))
    lock_logs = [e.log_entries() for e in ex.entities if e.kind == "lock"]
    ex2, _ = replay_run(_contention_program, trace_path, (0.01, 0.0))
    replay_logs = [e.log_entries() for e in ex2.entities if e.kind == "lock"]
    assert lock_logs == replay_logs
