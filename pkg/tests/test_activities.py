"""Activity identity, spawning, and current-activity resolution."""

import random

import pytest

from cmrr import (
    ActivityKind,
    EventType,
    Execution,
    ExecutionMode,
    MemorySink,
    current_activity,
    parse_trace,
    spawn_actor,
    spawn_thread,
)
from cmrr.activities import child_activity_id
from cmrr.errors import ReplayError, ReplayTypeMismatch
from conftest import record_run, replay_run


def test_first_child_id_is_stable():
    first, _, _ = child_activity_id(0, 0, 0)
    again, _, _ = child_activity_id(0, 0, 0)
    assert first == again
    assert first != 0  # distinct from the root


def test_id_encoding_injective_over_random_spawn_trees():
    rng = random.Random(99)
    for _ in range(50):
        seen = {0: (0, 0)}  # id -> (code, len); root pre-seeded
        ids = {0}
        # random tree: repeatedly pick an existing node and add children
        nodes = [(0, 0, 0)]  # (id, code, len), with a live spawn counter each
        counters = {0: 0}
        for _ in range(rng.randrange(10, 120)):
            node_id, code, length = rng.choice(nodes)
            counter = counters[node_id]
            counters[node_id] += 1
            child, child_code, child_len = child_activity_id(code, length, counter)
            assert child not in ids, "collision in spawn-path encoding"
            ids.add(child)
            nodes.append((child, child_code, child_len))
            counters[child] = 0


def test_id_encoding_overflow_detected():
    code, length = 0, 0
    with pytest.raises(OverflowError):
        for _ in range(40):
            _, code, length = child_activity_id(code, length, 0)


def test_spawn_records_one_event_per_child(trace_path):
    def program(n):
        children = [spawn_thread(lambda: None) for _ in range(n)]
        for child in children:
            child.join()
        return [c.id for c in children]

    ex, result = record_run(program, trace_path, 3)
    trace = parse_trace(trace_path)
    main_events = list(trace.queues[0].events)
    assert [e.event_type for e in main_events] == [EventType.ACTIVITY_SPAWN] * 3
    assert [e.data for e in main_events] == result.outputs

    ex2, replayed = replay_run(program, trace_path, 3)
    assert replayed.outputs == result.outputs


def test_replay_detects_extra_spawn(trace_path):
    def program(n):
        children = [spawn_thread(lambda: None) for _ in range(n)]
        for child in children:
            child.join()

    record_run(program, trace_path, 3)
    with pytest.raises(ReplayError):
        replay_run(program, trace_path, 4)


def test_replay_detects_spawn_tree_divergence(trace_path):
    def flat():
        spawn_thread(lambda: None).join()
        spawn_thread(lambda: None).join()

    def nested():
        def middle():
            spawn_thread(lambda: None).join()

        spawn_thread(middle).join()
        spawn_thread(lambda: None).join()

    record_run(flat, trace_path)
    with pytest.raises(ReplayError):
        replay_run(nested, trace_path)


def test_replayed_run_yields_identical_activity_ids(trace_path):
    def program():
        def inner():
            spawn_thread(lambda: None).join()

        a = spawn_thread(inner)
        b = spawn_thread(lambda: None)
        a.join()
        b.join()

    ex, _ = record_run(program, trace_path)
    ex2, _ = replay_run(program, trace_path)
    assert set(ex.activities) == set(ex2.activities)
    assert {a.kind.value for a in ex.activities.values()} == \
           {a.kind.value for a in ex2.activities.values()}


def test_current_activity_identities():
    import threading

    from cmrr import send
    from cmrr.bench.support import CompletionLatch

    ex = Execution(ExecutionMode.RECORD, sink=MemorySink())

    def program():
        main = current_activity()
        assert main.id == 0
        assert main.kind is ActivityKind.THREAD
        seen = {}

        def thread_body():
            seen["thread"] = current_activity()

        t = spawn_thread(thread_body)
        t.join()
        assert seen["thread"] is t

        latch = CompletionLatch(1)

        def handler(msg):
            seen["actor"] = current_activity()
            seen["os_thread"] = threading.current_thread().name
            latch.count_down()

        actor = spawn_actor(handler)
        send(actor, "go")
        latch.wait()
        # the handler ran on a pool worker but reports the actor identity
        assert seen["actor"] is actor
        assert seen["os_thread"].startswith("actor-worker")
        return "done"

    assert ex.run(program).outputs == "done"
