"""Shared helpers for the benchmark programs."""

from __future__ import annotations

import hashlib

from ..locks import RRCondition, RRLock


class CompletionLatch:
    """Countdown latch built on the replayable lock/condition primitives,
    so benchmark completion signaling is itself part of the recorded run."""

    def __init__(self, count: int):
        self._lock = RRLock()
        self._cond = RRCondition(self._lock)
        self._count = count

    def count_down(self) -> None:
        with self._lock:
            self._count -= 1
            if self._count <= 0:
                self._cond.signal_all()

    def wait(self) -> None:
        with self._lock:
            while self._count > 0:
                self._cond.wait()


def sequence_digest(items) -> str:
    """Stable short digest of an observable event sequence."""
    h = hashlib.sha256()
    for item in items:
        h.update(repr(item).encode())
        h.update(b"\x00")
    return h.hexdigest()[:16]


def int_param(params: dict, key: str, default: int) -> int:
    value = params.get(key, default)
    return int(value)
