"""Discrete-event ingestion loop: admission, ordering, clocks, scoring.

The expected traces in here were derived by hand from the loop rules
(producer enqueues before the consumer dequeues at equal timestamps; an
idle consumer immediately takes up to one micro-batch).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamknn import Metric, create_index, make_records
from streamknn.harness import (
    AdmissionPolicy,
    Clock,
    QueryReport,
    StreamSpec,
    VirtualCost,
    compute_ground_truth,
    recall_at_k,
    run_query_phase,
    run_stream,
    write_trace,
)
from streamknn.core import TopK


def flat(dim=4):
    idx = create_index("baseline", Metric.SQUARED_L2, dim)
    idx.load_initial([])
    return idx


def stream_records(n, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    return make_records(rng.random((n, dim), dtype=np.float32))


def test_queue_all_never_drops():
    idx = flat()
    spec = StreamSpec(rate=100.0, micro_batch=8, buffer_capacity=2, policy=AdmissionPolicy.QUEUE_ALL)
    cost = VirtualCost(insert_row_seconds=1.0)  # hopelessly slow consumer
    res = run_stream(idx, stream_records(50), spec, Clock.VIRTUAL, cost)
    assert res.rows_dropped == 0
    assert res.rows_ingested == 50
    assert idx.count == 50


def test_conservation_emitted_equals_ingested_plus_dropped():
    idx = flat()
    spec = StreamSpec(rate=1000.0, micro_batch=4, buffer_capacity=4)
    cost = VirtualCost(insert_row_seconds=0.01)
    res = run_stream(idx, stream_records(200), spec, Clock.VIRTUAL, cost)
    assert res.rows_emitted == res.rows_ingested + res.rows_dropped
    assert res.rows_dropped > 0
    assert idx.count == res.rows_ingested


@given(
    n=st.integers(0, 60),
    rate=st.floats(0.5, 100.0),
    batch=st.integers(1, 8),
    cap=st.integers(1, 8),
    row_cost=st.floats(0.0, 0.5),
    policy=st.sampled_from(list(AdmissionPolicy)),
)
@settings(max_examples=40, deadline=None)
def test_conservation_property(n, rate, batch, cap, row_cost, policy):
    idx = flat()
    spec = StreamSpec(rate=rate, micro_batch=batch, buffer_capacity=cap, policy=policy)
    res = run_stream(idx, stream_records(n), spec, Clock.VIRTUAL, VirtualCost(insert_row_seconds=row_cost))
    assert res.rows_emitted == res.rows_ingested + res.rows_dropped == n
    if policy is AdmissionPolicy.QUEUE_ALL:
        assert res.rows_dropped == 0
    assert idx.count == res.rows_ingested
    assert res.drain_time >= res.submit_time


def test_drop_pattern_rate1_cost2_capacity1():
    """Hand trace: emissions at t=0,1,2,...; one-row batches costing 2s.

    t=0: row0 enqueued, batch starts (busy till 2).
    t=1: row1 enqueued (buffer was empty).
    t=2: row2 emitted first (producer wins the tie) and finds the buffer
         full -> dropped; then the batch ends and row1 starts (till 4).
    From there on every even-id row is dropped, every odd one kept.
    """
    idx = flat()
    spec = StreamSpec(rate=1.0, micro_batch=1, buffer_capacity=1)
    cost = VirtualCost(insert_row_seconds=2.0)
    res = run_stream(idx, stream_records(12), spec, Clock.VIRTUAL, cost, keep_trace=True)
    dropped_ids = [ev.ids[0] for ev in res.trace if ev.kind == "drop"]
    assert dropped_ids == [2, 4, 6, 8, 10]
    kept = [ev.ids[0] for ev in res.trace if ev.kind == "enqueue"]
    assert kept == [0, 1, 3, 5, 7, 9, 11]
    # steady state (ids >= 2): exactly half dropped
    steady = [i for i in range(2, 12)]
    assert sum(1 for i in steady if i in dropped_ids) * 2 == len(steady)


def test_producer_enqueues_before_consumer_dequeues_on_tie():
    # rate=1, cost=1: the batch ending at t=k coincides with emission k
    idx = flat()
    spec = StreamSpec(rate=1.0, micro_batch=1, buffer_capacity=1)
    res = run_stream(idx, stream_records(5), spec, Clock.VIRTUAL,
                     VirtualCost(insert_row_seconds=1.0), keep_trace=True)
    assert res.rows_dropped == 0  # tie ordering means the buffer is free in time
    at_t1 = [ev.kind for ev in res.trace if ev.time == 1.0]
    assert at_t1 == ["emit", "enqueue", "batch_end", "batch_start"]


def test_zero_cost_consumer_keeps_up():
    idx = flat()
    spec = StreamSpec(rate=50.0, micro_batch=4, buffer_capacity=2)
    res = run_stream(idx, stream_records(40), spec, Clock.VIRTUAL, VirtualCost())
    assert res.rows_dropped == 0
    assert res.pending_write_latency_s == 0.0
    assert res.drain_time == res.submit_time


def test_micro_batch_bounds_batch_sizes():
    idx = flat()
    spec = StreamSpec(rate=1000.0, micro_batch=6, buffer_capacity=100,
                      policy=AdmissionPolicy.QUEUE_ALL)
    res = run_stream(idx, stream_records(100), spec, Clock.VIRTUAL,
                     VirtualCost(insert_row_seconds=0.05))
    assert max(res.batch_sizes) == 6
    assert sum(res.batch_sizes) == 100


def test_replay_costs_consumed_in_order():
    idx = flat()
    spec = StreamSpec(rate=1.0, micro_batch=1, buffer_capacity=10,
                      policy=AdmissionPolicy.QUEUE_ALL)
    res = run_stream(idx, stream_records(3), spec, Clock.VIRTUAL,
                     VirtualCost(replay=[5.0, 1.0, 0.25]))
    assert res.batch_costs == [5.0, 1.0, 0.25]
    with pytest.raises(ValueError):
        run_stream(flat(), stream_records(3), spec, Clock.VIRTUAL, VirtualCost(replay=[1.0]))


def test_virtual_runs_are_deterministic():
    spec = StreamSpec(rate=500.0, micro_batch=8, buffer_capacity=8)
    cost = VirtualCost(insert_row_seconds=0.004)
    results = []
    for _ in range(2):
        idx = flat()
        res = run_stream(idx, stream_records(150), spec, Clock.VIRTUAL, cost)
        results.append((res.rows_ingested, res.rows_dropped, tuple(res.batch_costs),
                        res.submit_time, res.drain_time))
    assert results[0] == results[1]


def test_wall_mode_charges_measured_costs():
    idx = flat()
    spec = StreamSpec(rate=1e9, micro_batch=16, buffer_capacity=1000,
                      policy=AdmissionPolicy.QUEUE_ALL)
    res = run_stream(idx, stream_records(64), spec, Clock.WALL)
    assert res.rows_ingested == 64
    assert all(c >= 0.0 for c in res.batch_costs)
    assert res.drain_time >= res.submit_time


def test_gen_times_stamped_on_emission_schedule():
    idx = flat()
    spec = StreamSpec(rate=4.0, micro_batch=2, buffer_capacity=2)
    res = run_stream(idx, stream_records(8), spec, Clock.VIRTUAL, VirtualCost(), keep_trace=True)
    emits = [ev for ev in res.trace if ev.kind == "emit"]
    assert [ev.time for ev in emits] == [j / 4.0 for j in range(8)]
    assert res.submit_time == 7 / 4.0


def test_trace_file_format(tmp_path):
    idx = flat()
    spec = StreamSpec(rate=10.0, micro_batch=2, buffer_capacity=2)
    res = run_stream(idx, stream_records(6), spec, Clock.VIRTUAL,
                     VirtualCost(insert_row_seconds=0.01), keep_trace=True)
    p = str(tmp_path / "trace.txt")
    write_trace(res.trace, p)
    lines = [l for l in open(p) if not l.startswith("#")]
    assert len(lines) == len(res.trace)
    times, kinds = [], set()
    for line in lines:
        t, kind, ids = line.split()
        times.append(float(t))
        kinds.add(kind)
        assert all(s.isdigit() for s in ids.split(","))
    assert times == sorted(times)
    assert kinds <= {"emit", "enqueue", "drop", "batch_start", "batch_end"}


def test_recall_extremes():
    a = TopK(k=3, ids=np.array([1, 2, 3]), distances=np.zeros(3))
    b = TopK(k=3, ids=np.array([1, 2, 3]), distances=np.zeros(3))
    c = TopK(k=3, ids=np.array([7, 8, 9]), distances=np.zeros(3))
    assert recall_at_k(a, b, 3) == 1.0
    assert recall_at_k(a, c, 3) == 0.0


def test_query_phase_flat_queue_all_perfect_recall(rng):
    X = rng.random((400, 8), dtype=np.float32)
    queries = rng.random((20, 8), dtype=np.float32)
    idx = create_index("baseline", Metric.SQUARED_L2, 8)
    recs = make_records(X)
    idx.load_initial(recs[:200])
    spec = StreamSpec(rate=100.0, micro_batch=16, buffer_capacity=16,
                      policy=AdmissionPolicy.QUEUE_ALL)
    res = run_stream(idx, recs[200:], spec, Clock.VIRTUAL, VirtualCost(insert_row_seconds=0.1))
    truth = compute_ground_truth(X, np.arange(400), queries, 10, Metric.SQUARED_L2)
    rep = run_query_phase(idx, queries, 10, truth, res, Clock.VIRTUAL,
                          VirtualCost(insert_row_seconds=0.1, search_query_seconds=0.001))
    assert rep.recall_at_k == 1.0
    assert rep.vector_search_latency_s == pytest.approx(20 * 0.001)
    assert rep.query_latency_s == pytest.approx(
        rep.pending_write_latency_s + rep.vector_search_latency_s)
    assert rep.rows_emitted == 200 and rep.rows_dropped == 0


def test_ground_truth_includes_dropped_rows(rng):
    # half the stream is dropped; recall against *all* emitted rows must dip
    X = rng.random((100, 4), dtype=np.float32).astype(np.float32)
    idx = flat()
    spec = StreamSpec(rate=1.0, micro_batch=1, buffer_capacity=1)
    res = run_stream(idx, make_records(X), spec, Clock.VIRTUAL, VirtualCost(insert_row_seconds=2.0))
    assert res.rows_dropped > 0
    queries = X[:10] + np.float32(1e-4)
    truth = compute_ground_truth(X, np.arange(100), queries, 1, Metric.SQUARED_L2)
    rep = run_query_phase(idx, queries, 1, truth, res, Clock.VIRTUAL, VirtualCost())
    assert rep.recall_at_k < 1.0
