"""Multi-model concurrency runtime with deterministic record & replay.

Four concurrency models (threads & locks, communicating event-loop
actors with promises, CSP rendezvous channels, and software transactional
memory) share one uniform trace substrate. A recorded run can be
replayed deterministically: every race is resolved the way the trace says
it was resolved, including cross-model interactions.
"""

from .activities import Activity, ActivityKind, current_activity
from .actors import ActorActivity, Message, Promise, send
from .channels import Channel
from .errors import (
    AlreadyResolved,
    CmrrError,
    NotAnActivity,
    NotOwner,
    ReplayDeadlock,
    ReplayError,
    ReplayLeftoverEvents,
    ReplayQueueExhausted,
    ReplayTypeMismatch,
    TraceFormatError,
    TransactionUsageError,
    UsageError,
)
from .events import EVENT_SIZE, EventType, TraceEvent, decode_event, encode_event
from .locks import RRCondition, RRLock
from .runtime import Execution, PerturbationPlan, RunResult, spawn_actor, spawn_process, spawn_thread
from .stm import TxRef, atomic
from .tracefile import ActorStrategy, DiscardSink, FileSink, MemorySink, TraceFile, parse_trace
from .tracing import (
    ExecutionMode,
    RecordBuffer,
    ReplayQueue,
    VersionedEntity,
    delay_interaction,
    increment_version,
    record_interaction,
)

__version__ = "0.1.0"

__all__ = [
    "Activity",
    "ActivityKind",
    "ActorActivity",
    "ActorStrategy",
    "AlreadyResolved",
    "Channel",
    "CmrrError",
    "DiscardSink",
    "EVENT_SIZE",
    "EventType",
    "Execution",
    "ExecutionMode",
    "FileSink",
    "MemorySink",
    "Message",
    "NotAnActivity",
    "NotOwner",
    "PerturbationPlan",
    "Promise",
    "RRCondition",
    "RRLock",
    "RecordBuffer",
    "ReplayDeadlock",
    "ReplayError",
    "ReplayLeftoverEvents",
    "ReplayQueue",
    "ReplayQueueExhausted",
    "ReplayTypeMismatch",
    "RunResult",
    "TraceEvent",
    "TraceFile",
    "TraceFormatError",
    "TransactionUsageError",
    "TxRef",
    "UsageError",
    "VersionedEntity",
    "atomic",
    "current_activity",
    "decode_event",
    "delay_interaction",
    "encode_event",
    "increment_version",
    "parse_trace",
    "record_interaction",
    "send",
    "spawn_actor",
    "spawn_process",
    "spawn_thread",
]
