"""Hash-bucket index: code math, probing behavior, bucket bookkeeping."""

import numpy as np
import pytest

from streamknn import Metric, create_index, make_records
from tests.test_core import oracle_top_k


def build(dim=8, learned=False, **params):
    name = "lsh_ml" if learned else "lsh"
    return create_index(name, Metric.SQUARED_L2, dim, params)


def test_identical_vectors_share_codes(rng):
    idx = build()
    v = rng.random((1, 8), dtype=np.float32)
    X = np.vstack([v, v])
    codes = idx.codes_for(X, 0)
    assert codes[0] == codes[1]


def test_negated_vector_gets_complement_code(rng):
    idx = build(num_bits=16)
    v = rng.standard_normal((1, 8)).astype(np.float32)
    c_pos = int(idx.codes_for(v, 0)[0])
    c_neg = int(idx.codes_for(-v, 0)[0])
    assert c_pos ^ c_neg == (1 << 16) - 1


def test_per_bit_collision_rate_matches_hyperplane_geometry():
    # oracle: for Gaussian hyperplanes, P(bit agrees) = 1 - theta/pi
    rng = np.random.default_rng(77)
    idx = build(dim=8, num_bits=64, seed=3)
    U = rng.standard_normal((10_000, 8))
    V = rng.standard_normal((10_000, 8))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    cu = idx.codes_for(U.astype(np.float32), 0)
    cv = idx.codes_for(V.astype(np.float32), 0)
    mismatches = np.array([int(a ^ b).bit_count() for a, b in zip(cu.tolist(), cv.tolist())])
    collision = 1.0 - mismatches / 64.0
    theta = np.arccos(np.clip((U * V).sum(1), -1, 1))
    predicted = 1.0 - theta / np.pi
    assert abs(collision.mean() - predicted.mean()) < 0.02


def test_single_bucket_degenerates_to_flat(rng):
    # one bit, and every row projects positive: all rows share a bucket
    idx = build(dim=4, num_bits=1, seed=1)
    plane = idx._planes[0][:, 0]
    base = (plane / np.linalg.norm(plane)).astype(np.float32)
    X = np.abs(rng.random((40, 1), dtype=np.float32)) @ base[None, :] + 0.01 * base
    assert len({int(c) for c in idx.codes_for(X, 0)}) == 1
    idx.load_initial(make_records(X))
    q = X[5]
    got = idx.search(q, 7)
    assert got.ids.tolist() == oracle_top_k(q, X, 7, Metric.SQUARED_L2)


def test_empty_own_bucket_expands_to_neighbors(rng):
    # two-bucket instance by hand: stored rows all project negative,
    # the query projects positive, so its own bucket is empty
    idx = build(dim=4, num_bits=1, seed=1)
    plane = idx._planes[0][:, 0]
    base = (plane / np.linalg.norm(plane)).astype(np.float32)
    X = -np.abs(rng.random((10, 1), dtype=np.float32)) @ base[None, :] - 0.01 * base
    idx.load_initial(make_records(X))
    q = base
    assert int(idx.codes_for(q[None, :], 0)[0]) == 1
    got = idx.search(q, 3)
    assert len(got) == 3  # Hamming expansion reached the populated bucket


def test_query_of_stored_vector_returns_itself(rng):
    X = rng.standard_normal((200, 8)).astype(np.float32)
    idx = build()
    idx.load_initial(make_records(X))
    got = idx.search(X[123], 1)
    assert got.ids.tolist() == [123]


def test_bucket_partition_invariant(rng):
    X = rng.standard_normal((150, 8)).astype(np.float32)
    idx = build(num_tables=3, num_bits=6)
    idx.load_initial(make_records(X[:100]))
    idx.insert_batch(make_records(X[100:], start_id=100))
    for t in range(3):
        positions = [p for members in idx._buckets[t].values() for p in members]
        assert sorted(positions) == list(range(150))


def test_exhaustive_fallback_visits_everything(rng):
    # tiny index, huge probe demand: result must equal exact search
    X = rng.standard_normal((30, 8)).astype(np.float32)
    idx = build(probe_factor=1000)
    idx.load_initial(make_records(X))
    q = rng.standard_normal(8).astype(np.float32)
    assert idx.search(q, 5).ids.tolist() == oracle_top_k(q, X, 5, Metric.SQUARED_L2)


def test_multi_table_search_unions_candidates(rng):
    X = rng.standard_normal((300, 8)).astype(np.float32)
    one = build(num_tables=1, seed=5)
    many = build(num_tables=4, seed=5)
    truth = [oracle_top_k(q, X, 10, Metric.SQUARED_L2) for q in X[:20]]
    recalls = []
    for idx in (one, many):
        idx.load_initial(make_records(X))
        hits = [
            len(set(idx.search(q, 10).ids.tolist()) & set(t)) / 10
            for q, t in zip(X[:20], truth)
        ]
        recalls.append(np.mean(hits))
    assert recalls[1] >= recalls[0]  # extra tables can only widen the probe set


def test_learned_variant_trains_and_keeps_partition(rng):
    X = rng.standard_normal((120, 8)).astype(np.float32)
    idx = build(learned=True, num_bits=8, training={"epochs": 10})
    idx.load_initial(make_records(X[:80]))
    idx.insert_batch(make_records(X[80:], start_id=80))
    positions = [p for members in idx._buckets[0].values() for p in members]
    assert sorted(positions) == list(range(120))
    got = idx.search(X[10], 1)
    assert got.ids.tolist() == [10]


def test_learned_variant_needs_offline_rows(rng):
    idx = build(learned=True)
    with pytest.raises(ValueError):
        idx.load_initial(make_records(rng.random((1, 8), dtype=np.float32)))


def test_learned_variant_deterministic(rng):
    X = rng.standard_normal((60, 6)).astype(np.float32)
    results = []
    for _ in range(2):
        idx = create_index("lsh_ml", Metric.SQUARED_L2, 6, {"num_bits": 6, "training": {"epochs": 8}})
        idx.load_initial(make_records(X))
        results.append(sorted((c, tuple(sorted(m))) for c, m in idx._buckets[0].items()))
    assert results[0] == results[1]


def test_bad_params_rejected():
    with pytest.raises(ValueError):
        build(num_bits=65)
    with pytest.raises(ValueError):
        build(num_bits=0)
    with pytest.raises(ValueError):
        build(bogus_knob=3)
