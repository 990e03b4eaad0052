from __future__ import annotations

import pytest

from cmrr import Execution, ExecutionMode


@pytest.fixture
def trace_path(tmp_path):
    return str(tmp_path / "run.trc")


def record_run(program, trace_path, *args, strategy=None, seed=None, **kwargs):
    from cmrr import PerturbationPlan

    perturb = PerturbationPlan(seed) if seed is not None else None
    ex = Execution(ExecutionMode.RECORD, strategy=strategy, trace_path=trace_path,
                   perturb=perturb, **kwargs)
    return ex, ex.run(program, *args)


def replay_run(program, trace_path, *args, seed=None, watchdog=5.0, **kwargs):
    from cmrr import PerturbationPlan

    perturb = PerturbationPlan(seed) if seed is not None else None
    ex = Execution(ExecutionMode.REPLAY, trace_path=trace_path,
                   watchdog_seconds=watchdog, perturb=perturb, **kwargs)
    return ex, ex.run(program, *args)


def passive_run(program, *args, **kwargs):
    ex = Execution(ExecutionMode.PASSIVE, **kwargs)
    return ex, ex.run(program, *args)
