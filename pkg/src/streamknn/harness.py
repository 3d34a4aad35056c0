"""Rate-controlled ingestion harness and query-phase measurement.

The stream is simulated as a single-threaded discrete-event loop: a
producer emits row ``j`` at ``j / rate`` seconds into a FIFO buffer, and
a consumer dequeues up to one micro-batch whenever it is idle, occupying
the (simulated) clock for the batch's cost.  At equal timestamps the
producer always enqueues before the consumer dequeues.

Two clock modes share the same loop:

* **wall**: each ``insert_batch`` call's measured wall time advances the
  simulated clock, so results reflect the machine's real throughput.
* **virtual**: batch cost comes from a configured model (or a recorded
  trace), making whole runs exactly reproducible for CI and for studying
  admission behavior in isolation.

Admission is either ``queue_all`` (unbounded buffer, nothing lost, but
the queue and therefore query-time drain can grow without bound) or
``drop_on_congestion`` (bounded buffer; a row arriving at a full buffer
is counted and discarded).

When the source is exhausted the query batch is submitted immediately.
Queries wait for the index to drain everything still buffered (the
pending-write latency), then the searches run (the vector-search
latency); their sum is the observed query latency.  Recall is scored
against exact ground truth over every *emitted* row, dropped ones
included, so admission losses show up as lost recall rather than being
quietly excused.
"""

from __future__ import annotations

import enum
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import core
from .core import Metric, TopK, VectorRecord
from .index_api import DynamicIndex


class AdmissionPolicy(enum.Enum):
    DROP_ON_CONGESTION = "drop_on_congestion"
    QUEUE_ALL = "queue_all"

    @classmethod
    def parse(cls, name: str) -> "AdmissionPolicy":
        key = str(name).strip().lower()
        aliases = {
            "drop_on_congestion": cls.DROP_ON_CONGESTION,
            "drop": cls.DROP_ON_CONGESTION,
            "queue_all": cls.QUEUE_ALL,
            "queue": cls.QUEUE_ALL,
        }
        if key not in aliases:
            raise ValueError("unknown admission policy %r" % name)
        return aliases[key]


class Clock(enum.Enum):
    WALL = "wall"
    VIRTUAL = "virtual"

    @classmethod
    def parse(cls, name: str) -> "Clock":
        key = str(name).strip().lower()
        if key == "wall":
            return cls.WALL
        if key == "virtual":
            return cls.VIRTUAL
        raise ValueError("clock must be 'wall' or 'virtual', got %r" % name)


@dataclass(slots=True)
class StreamSpec:
    """Shape of the online phase."""

    rate: float = 4000.0  # rows per second emitted by the source
    micro_batch: int = 4000  # max rows per insert_batch call
    buffer_capacity: int = 4000  # bounded FIFO size under drop_on_congestion
    policy: AdmissionPolicy = AdmissionPolicy.DROP_ON_CONGESTION

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.micro_batch < 1:
            raise ValueError("micro_batch must be >= 1")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")


@dataclass(slots=True)
class VirtualCost:
    """Cost model charged by the virtual clock.

    Insert cost for a batch of b rows is ``insert_batch_overhead +
    b * insert_row_seconds`` unless a ``replay`` list of per-batch costs
    is given, which is consumed in order (and must not run out).  Each
    search is charged ``search_query_seconds``.
    """

    insert_row_seconds: float = 0.0
    insert_batch_overhead: float = 0.0
    search_query_seconds: float = 0.0
    replay: list[float] | None = None

    def batch_cost(self, batch_size: int, batch_index: int) -> float:
        if self.replay is not None:
            if batch_index >= len(self.replay):
                raise ValueError(
                    "virtual replay trace has %d entries, batch %d requested"
                    % (len(self.replay), batch_index)
                )
            return float(self.replay[batch_index])
        return self.insert_batch_overhead + batch_size * self.insert_row_seconds


@dataclass(slots=True)
class TraceEvent:
    """One line of the ingestion trace."""

    time: float
    kind: str  # emit | enqueue | drop | batch_start | batch_end
    ids: list[int]


@dataclass(slots=True)
class StreamResult:
    """Everything the ingestion loop observed."""

    rows_emitted: int
    rows_ingested: int
    rows_dropped: int
    submit_time: float  # when the source finished and queries were submitted
    drain_time: float  # when the index had absorbed every admitted row
    batch_costs: list[float] = field(default_factory=list)
    batch_sizes: list[int] = field(default_factory=list)
    phase_totals: dict[str, float] = field(default_factory=dict)
    trace: list[TraceEvent] | None = None

    @property
    def pending_write_latency_s(self) -> float:
        return max(0.0, self.drain_time - self.submit_time)


@dataclass(slots=True)
class QueryReport:
    """Scored query phase attached to one run."""

    recall_at_k: float
    query_latency_s: float
    pending_write_latency_s: float
    vector_search_latency_s: float
    rows_emitted: int
    rows_ingested: int
    rows_dropped: int


def run_stream(
    index: DynamicIndex,
    online: list[VectorRecord],
    spec: StreamSpec,
    clock: Clock = Clock.WALL,
    cost: VirtualCost | None = None,
    keep_trace: bool = False,
) -> StreamResult:
    """Feed ``online`` rows through the admission buffer into the index.

    Emission times are stamped onto the records (row j at j / rate); any
    gen_time already present is ignored.  The loop runs until the buffer
    has fully drained, so the returned ``drain_time`` minus
    ``submit_time`` is the query batch's pending-write wait.
    """
    if clock is Clock.VIRTUAL and cost is None:
        raise ValueError("virtual clock needs a VirtualCost model")

    n = len(online)
    emit_at = lambda j: j / spec.rate  # noqa: E731
    drop_policy = spec.policy is AdmissionPolicy.DROP_ON_CONGESTION

    buf: deque[VectorRecord] = deque()
    trace: list[TraceEvent] | None = [] if keep_trace else None
    batch_costs: list[float] = []
    batch_sizes: list[int] = []
    phase_totals: dict[str, float] = {}
    dropped = 0
    ingested = 0
    inflight_ids: list[int] | None = None

    t = 0.0
    j = 0
    busy_until: float | None = None

    while j < n or buf or busy_until is not None:
        t_emit = emit_at(j) if j < n else math.inf
        t_done = busy_until if busy_until is not None else math.inf
        if t_emit <= t_done:
            # producer event; ties resolve producer-first by construction
            t = t_emit
            rec = replace(online[j], gen_time=t)
            if trace is not None:
                trace.append(TraceEvent(t, "emit", [rec.id]))
            if drop_policy and len(buf) >= spec.buffer_capacity:
                dropped += 1
                if trace is not None:
                    trace.append(TraceEvent(t, "drop", [rec.id]))
            else:
                buf.append(rec)
                if trace is not None:
                    trace.append(TraceEvent(t, "enqueue", [rec.id]))
            j += 1
        else:
            t = t_done
            busy_until = None
            if trace is not None and inflight_ids is not None:
                trace.append(TraceEvent(t, "batch_end", inflight_ids))
            inflight_ids = None

        if busy_until is None and buf:
            batch = [buf.popleft() for _ in range(min(spec.micro_batch, len(buf)))]
            ids = [r.id for r in batch]
            if trace is not None:
                trace.append(TraceEvent(t, "batch_start", ids))
            measured = index.insert_batch(batch)
            for name, secs in measured.phases.items():
                phase_totals[name] = phase_totals.get(name, 0.0) + secs
            if clock is Clock.VIRTUAL:
                charged = cost.batch_cost(len(batch), len(batch_costs))
            else:
                charged = measured.wall_seconds
            batch_costs.append(charged)
            batch_sizes.append(len(batch))
            ingested += len(batch)
            inflight_ids = ids
            busy_until = t + charged

    submit_time = emit_at(n - 1) if n else 0.0
    return StreamResult(
        rows_emitted=n,
        rows_ingested=ingested,
        rows_dropped=dropped,
        submit_time=submit_time,
        drain_time=max(t, submit_time),
        batch_costs=batch_costs,
        batch_sizes=batch_sizes,
        phase_totals=phase_totals,
        trace=trace,
    )


def write_trace(trace: list[TraceEvent], path: str) -> None:
    """Write the ingestion trace: one ``<time> <kind> <ids...>`` line per event."""
    with open(path, "w") as fh:
        fh.write("# time kind ids\n")
        for ev in trace:
            fh.write("%.9f %s %s\n" % (ev.time, ev.kind, ",".join(map(str, ev.ids))))


def compute_ground_truth(
    rows: np.ndarray,
    ids: np.ndarray,
    queries: np.ndarray,
    k: int,
    metric: Metric,
) -> list[TopK]:
    """Exact top-k per query over every emitted row (dropped ones too)."""
    return [core.top_k(q, rows, k, metric, ids=ids) for q in np.asarray(queries, dtype=np.float32)]


def recall_at_k(result: TopK, truth: TopK, k: int) -> float:
    """|approximate ∩ exact| / k."""
    return len(set(result.ids.tolist()) & set(truth.ids.tolist())) / float(k)


def run_query_phase(
    index: DynamicIndex,
    queries: np.ndarray,
    k: int,
    truth: list[TopK],
    stream: StreamResult,
    clock: Clock = Clock.WALL,
    cost: VirtualCost | None = None,
) -> QueryReport:
    """Search all queries, score recall, and assemble latency components.

    The pending-write component comes from the stream's drain span; the
    vector-search component is the summed per-query cost (measured or
    modeled).  In wall mode the total latency is measured around the
    whole search loop, so the decomposition is a genuine measurement.
    """
    if clock is Clock.VIRTUAL and cost is None:
        raise ValueError("virtual clock needs a VirtualCost model")
    queries = np.asarray(queries, dtype=np.float32)
    if len(truth) != len(queries):
        raise ValueError("ground truth and query batch differ in length")

    pending = stream.pending_write_latency_s
    recalls = []
    per_query = 0.0
    t_outer = time.perf_counter()
    for qi, q in enumerate(queries):
        t0 = time.perf_counter()
        result = index.search(q, k)
        elapsed = time.perf_counter() - t0
        per_query += cost.search_query_seconds if clock is Clock.VIRTUAL else elapsed
        recalls.append(recall_at_k(result, truth[qi], k))
    outer = time.perf_counter() - t_outer

    search_latency = per_query
    if clock is Clock.VIRTUAL:
        total = pending + search_latency
    else:
        total = pending + outer
    mean_recall = math.fsum(sorted(recalls)) / len(recalls) if recalls else 0.0
    return QueryReport(
        recall_at_k=mean_recall,
        query_latency_s=total,
        pending_write_latency_s=pending,
        vector_search_latency_s=search_latency,
        rows_emitted=stream.rows_emitted,
        rows_ingested=stream.rows_ingested,
        rows_dropped=stream.rows_dropped,
    )
