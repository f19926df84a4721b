"""Partitioned aggregation with an init/accumulate/merge/terminate contract.

Rows are split into ``k`` partitions, each partition is folded by its own
worker thread, and the partial states are merged in partition order before
``terminate`` produces the result.  Because merges always happen in the
same order, results are byte-reproducible for any ``k`` as long as the
contract's merge is associative and commutative.

Timing is recorded, never asserted: pass a :class:`Timings` to collect
``phase, k, millis`` rows.
"""

from __future__ import annotations

import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Callable, Iterable, Sequence


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class AggregateContract:
    """The four aggregate callbacks.

    ``accumulate_many`` is an optional fast path that folds a whole list
    of rows at once; it must agree with repeated ``accumulate``.
    """

    init: Callable[[], Any]
    accumulate: Callable[[Any, Any], Any]
    merge: Callable[[Any, Any], Any]
    terminate: Callable[[Any], Any]
    name: str = "aggregate"
    accumulate_many: Callable[[Any, list], Any] | None = None

    def fold(self, rows: Iterable) -> Any:
        state = self.init()
        if self.accumulate_many is not None:
            return self.accumulate_many(state, rows if isinstance(rows, list) else list(rows))
        for row in rows:
            state = self.accumulate(state, row)
        return state


@dataclass(frozen=True)
class PartitionPlan:
    """How rows are spread over ``k`` workers.

    ``splitter(index, row, k)`` returns the partition of a row; ``None``
    means contiguous ranges of the input order.
    """

    k: int = field(default_factory=default_workers)
    splitter: Callable[[int, Any, int], int] | None = None
    ordered_merge: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"partition count must be >= 1, got {self.k}")


def hash_splitter(key: Callable[[Any], Any]) -> Callable[[int, Any, int], int]:
    """Route rows by a stable CRC32 of ``str(key(row))``."""
    def split(_index, row, k):
        return zlib.crc32(str(key(row)).encode()) % k
    return split


class Timings:
    """Collects ``(phase, k, millis)`` rows; writes them as TSV."""

    def __init__(self):
        self.rows: list[tuple[str, int, float]] = []

    def record(self, phase: str, k: int, started: float):
        self.rows.append((phase, k, (time.perf_counter() - started) * 1000.0))

    def to_tsv(self, sink):
        sink.write("phase\tk\tmillis\n")
        for phase, k, ms in self.rows:
            sink.write(f"{phase}\t{k}\t{ms:.3f}\n")


def partition(rows: Iterable, plan: PartitionPlan) -> list[list]:
    k = plan.k
    if plan.splitter is None:
        rows = rows if isinstance(rows, list) else list(rows)
        n = len(rows)
        return [rows[i * n // k:(i + 1) * n // k] for i in range(k)]
    parts = [[] for _ in range(k)]
    for i, row in enumerate(rows):
        parts[plan.splitter(i, row, k)].append(row)
    return parts


def _run_all(tasks: Sequence[Callable[[], Any]], workers: int) -> list:
    # runs tasks on a thread pool; raises the first failure in task order
    if workers <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    pool = ThreadPoolExecutor(max_workers=min(workers, len(tasks)))
    try:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]
    finally:
        pool.shutdown(wait=True, cancel_futures=True)


def run_parallel(rows: Iterable, contract: AggregateContract, plan: PartitionPlan | None = None,
                 timings: Timings | None = None) -> Any:
    """Fold ``rows`` with ``contract`` over ``plan.k`` partitions; returns the terminated result."""
    plan = plan or PartitionPlan()
    t0 = time.perf_counter()
    parts = partition(rows, plan)
    if timings is not None:
        timings.record(f"{contract.name}:partition", plan.k, t0)
    t0 = time.perf_counter()
    states = _run_all([lambda p=p: contract.fold(p) for p in parts], plan.k)
    if timings is not None:
        timings.record(f"{contract.name}:accumulate", plan.k, t0)
    t0 = time.perf_counter()
    state = reduce(contract.merge, states) if states else contract.init()
    if timings is not None:
        timings.record(f"{contract.name}:merge", plan.k, t0)
    t0 = time.perf_counter()
    result = contract.terminate(state)
    if timings is not None:
        timings.record(f"{contract.name}:terminate", plan.k, t0)
    return result


def run_parallel_ordered(ranges: Sequence, per_range, finalizer: Callable[[list], Any],
                         workers: int | None = None, timings: Timings | None = None,
                         name: str = "ordered") -> Any:
    """Evaluate every range independently, then hand results to ``finalizer`` in range order.

    ``per_range`` is either a callable taking one range, or an
    :class:`AggregateContract` whose terminated fold over the range is used.
    """
    if isinstance(per_range, AggregateContract):
        contract = per_range
        per_range = lambda rows: contract.terminate(contract.fold(rows))  # noqa: E731
    workers = workers or default_workers()
    t0 = time.perf_counter()
    results = _run_all([lambda r=r: per_range(r) for r in ranges], workers)
    if timings is not None:
        timings.record(f"{name}:ranges", len(ranges), t0)
    t0 = time.perf_counter()
    out = finalizer(results)
    if timings is not None:
        timings.record(f"{name}:finalize", len(ranges), t0)
    return out


def count_contract() -> AggregateContract:
    return AggregateContract(
        init=lambda: 0,
        accumulate=lambda s, _row: s + 1,
        merge=lambda a, b: a + b,
        terminate=lambda s: s,
        name="count",
        accumulate_many=lambda s, rows: s + len(rows),
    )
