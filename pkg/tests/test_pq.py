"""Product-quantization tests.

Oracles used here, independent of the implementation under test:

* exhaustive tuple search: the best reconstruction of a vector is found by
  trying every combination of one centroid per subspace;
* decode-then-measure: an ADC score must agree with the plain distance to
  the decoded vector;
* a law-of-large-numbers bound for the streaming-mean centroid update;
* hand-built codebooks small enough to check assignments by inspection.
"""

import itertools

import numpy as np
import pytest

from streamknn.core import Metric, distance, make_records, top_k
from streamknn.index_api import create_index
from streamknn.indexes.pq import (
    Codebook,
    IvfParams,
    IvfPqIndex,
    OnlinePqIndex,
    PqIndex,
    PqParams,
    adc_distance,
    adc_table,
    lloyd_kmeans,
    onlinepq_update,
    pq_decode,
    pq_encode,
    train_codebooks,
)
from streamknn.kernels import adc_accumulate


def brute_force_best_reconstruction(v, codebook):
    """Try every tuple of centroids (one per subspace) and return the
    smallest achievable squared reconstruction error."""
    M, ks, dsub = codebook.centroids.shape
    best = np.inf
    for combo in itertools.product(range(ks), repeat=M):
        rec = np.concatenate([codebook.centroids[m][j] for m, j in enumerate(combo)])
        err = float(((v - rec) ** 2).sum())
        best = min(best, err)
    return best


def decode_oracle_top_k(query, decoded, ids, k):
    """Full float64 sort of (distance-to-decoded-point, id)."""
    q = np.asarray(query, dtype=np.float64)
    d = ((decoded - q[None, :]) ** 2).sum(axis=1)
    order = sorted(range(len(ids)), key=lambda i: (d[i], ids[i]))[:k]
    return [ids[i] for i in order]


def two_axis_codebook():
    """d=2, M=2, per-axis centroids {0, 1} at indices (0, 1)."""
    cents = np.array([[[0.0], [1.0]], [[0.0], [1.0]]])
    return Codebook(centroids=cents, counts=np.zeros((2, 2), dtype=np.int64))


# ---------------------------------------------------------------- k-means


def test_kmeans_exact_fit_when_k_equals_rows(rng):
    rows = rng.normal(size=(8, 3))
    cents, assign, hist = lloyd_kmeans(rows, k=8, iters=20, seed=5)
    assert hist[-1] == pytest.approx(0.0, abs=1e-18)
    # every row is its own centroid, in some order
    got = cents[np.lexsort(cents.T[::-1])]
    want = rows[np.lexsort(rows.T[::-1])]
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert len(np.unique(assign)) == 8


def test_kmeans_sse_non_increasing_across_iterations(rng):
    for seed in range(5):
        data = np.random.default_rng(seed).random((400, 8))
        _, _, hist = lloyd_kmeans(data, k=16, iters=20, seed=seed)
        assert len(hist) == 21
        for a, b in zip(hist, hist[1:]):
            assert b <= a * (1 + 1e-9)


def test_kmeans_separable_axes_recover_exact_centroids():
    rows = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    cb = train_codebooks(rows, PqParams(M=2, ks=2, seed=3))
    for m in range(2):
        axis_cents = np.sort(cb.centroids[m][:, 0])
        np.testing.assert_array_equal(axis_cents, [0.0, 1.0])
    assert not cb.padded
    np.testing.assert_array_equal(cb.counts.sum(axis=1), [4, 4])


def test_kmeans_pads_codebook_when_rows_scarce():
    rows = np.array([[0.0, 0.0], [2.0, 2.0], [9.0, 9.0]])
    cb = train_codebooks(rows, PqParams(M=1, ks=5, seed=0))
    assert cb.padded
    assert cb.centroids.shape == (1, 5, 2)
    # padded duplicates never win an argmin tie, so codes stay below 3
    codes = pq_encode(cb, rows)
    assert codes.max() < 3


def test_kmeans_rejects_bad_inputs():
    with pytest.raises(ValueError):
        lloyd_kmeans(np.empty((0, 3)), k=2)
    with pytest.raises(ValueError):
        lloyd_kmeans(np.ones((4, 3)), k=0)
    with pytest.raises(ValueError):
        train_codebooks(np.ones((8, 6)), PqParams(M=4, ks=2))  # 4 does not divide 6


def test_pq_params_validation():
    with pytest.raises(ValueError):
        PqParams(ks=1)
    with pytest.raises(ValueError):
        PqParams(ks=257)
    with pytest.raises(ValueError):
        PqParams(M=0)


# ----------------------------------------------------------------- encode


def test_encode_by_inspection():
    cb = two_axis_codebook()
    codes = pq_encode(cb, np.array([[0.9, 0.1]]))
    np.testing.assert_array_equal(codes, [[1, 0]])


def test_encode_tie_breaks_to_lowest_index():
    cb = two_axis_codebook()
    codes = pq_encode(cb, np.array([[0.5, 0.5]]))
    np.testing.assert_array_equal(codes, [[0, 0]])


def test_encode_exact_centroid_tuple_round_trips():
    cb = two_axis_codebook()
    v = np.array([[1.0, 0.0]])
    codes = pq_encode(cb, v)
    np.testing.assert_array_equal(codes, [[1, 0]])
    np.testing.assert_array_equal(pq_decode(cb, codes), v)


def test_encode_matches_exhaustive_tuple_search(rng):
    train = rng.random((64, 6))
    cb = train_codebooks(train, PqParams(M=2, ks=4, seed=1))
    for v in rng.random((20, 6)):
        rec = pq_decode(cb, pq_encode(cb, v))[0]
        err = float(((v - rec) ** 2).sum())
        assert err == pytest.approx(brute_force_best_reconstruction(v, cb), rel=1e-12)


# -------------------------------------------------------------------- adc


def test_adc_matches_decode_then_distance(rng):
    train = rng.random((128, 8))
    cb = train_codebooks(train, PqParams(M=4, ks=16, seed=2))
    rows = rng.random((40, 8)).astype(np.float32)
    codes = pq_encode(cb, rows)
    decoded = pq_decode(cb, codes)
    for metric in (Metric.SQUARED_L2, Metric.NEG_INNER_PRODUCT):
        for q in rng.random((5, 8)).astype(np.float32):
            table = adc_table(cb, q, metric)
            dists = adc_accumulate(table, codes)
            for i in range(len(rows)):
                want = distance(q, decoded[i].astype(np.float32), metric)
                assert dists[i] == pytest.approx(want, abs=1e-5)


def test_adc_zero_when_query_equals_decoded_code():
    cb = two_axis_codebook()
    code = np.array([1, 0], dtype=np.uint8)
    q = pq_decode(cb, code[None, :])[0]
    assert adc_distance(q, code, cb, Metric.SQUARED_L2) == 0.0


def test_adc_degenerate_pq_equals_exact_distance(rng):
    rows = rng.random((12, 5)).astype(np.float32)
    cb = Codebook(
        centroids=rows.astype(np.float64)[None, :, :],
        counts=np.ones((1, 12), dtype=np.int64),
    )
    codes = pq_encode(cb, rows)
    np.testing.assert_array_equal(codes[:, 0], np.arange(12))
    q = rng.random(5).astype(np.float32)
    for metric in (Metric.SQUARED_L2, Metric.NEG_INNER_PRODUCT):
        for i in range(12):
            want = distance(q, rows[i], metric)
            assert adc_distance(q, codes[i], cb, metric) == pytest.approx(want, abs=1e-9)


# --------------------------------------------------------- online updates


def test_streaming_mean_single_step():
    cb = Codebook(
        centroids=np.zeros((1, 1, 1)), counts=np.ones((1, 1), dtype=np.int64)
    )
    onlinepq_update(cb, 0, 0, np.array([2.0]))
    assert cb.counts[0, 0] == 2
    assert cb.centroids[0, 0, 0] == pytest.approx(1.0)


def test_streaming_mean_fixed_point():
    c = np.array([0.25, -1.5])
    cb = Codebook(
        centroids=c.copy()[None, None, :], counts=np.full((1, 1), 3, dtype=np.int64)
    )
    for _ in range(10):
        onlinepq_update(cb, 0, 0, c)
    np.testing.assert_array_equal(cb.centroids[0, 0], c)
    assert cb.counts[0, 0] == 13


def test_streaming_mean_converges_to_gaussian_mean(rng):
    mu, sigma, n = 3.0, 1.0, 20_000
    cb = Codebook(
        centroids=np.zeros((1, 1, 1)), counts=np.ones((1, 1), dtype=np.int64)
    )
    for x in rng.normal(mu, sigma, size=n):
        onlinepq_update(cb, 0, 0, np.array([x]))
    assert abs(cb.centroids[0, 0, 0] - mu) <= 3 * sigma / np.sqrt(n)


def test_online_index_counts_sum_matches_rows_fed(rng):
    ix = OnlinePqIndex(Metric.SQUARED_L2, 8, PqParams(M=2, ks=4, seed=0))
    ix.load_initial(make_records(rng.random((50, 8), dtype=np.float32)))
    ix.insert_batch(make_records(rng.random((30, 8), dtype=np.float32), start_id=50))
    ix.insert_batch(make_records(rng.random((20, 8), dtype=np.float32), start_id=80))
    np.testing.assert_array_equal(ix.codebook.counts.sum(axis=1), [100, 100])
    assert ix.count == 100


def test_online_index_never_reencodes_old_codes(rng):
    ix = OnlinePqIndex(Metric.SQUARED_L2, 4, PqParams(M=2, ks=4, seed=0))
    ix.load_initial(make_records(rng.random((40, 4), dtype=np.float32)))
    codes_before = ix._store.codes.copy()
    cents_before = ix.codebook.centroids.copy()
    shifted = rng.random((40, 4), dtype=np.float32) + 5.0
    ix.insert_batch(make_records(shifted, start_id=40))
    np.testing.assert_array_equal(ix._store.codes[:40], codes_before)
    assert not np.array_equal(ix.codebook.centroids, cents_before)


# ------------------------------------------------------------- pq index


def test_pq_index_matches_decode_oracle(rng):
    rows = (rng.random((300, 8), dtype=np.float32) * 10).astype(np.float32)
    ix = PqIndex(Metric.SQUARED_L2, 8, PqParams(M=2, ks=32, seed=4))
    ix.load_initial(make_records(rows))
    decoded = pq_decode(ix.codebook, ix._store.codes)
    for q in rng.random((10, 8), dtype=np.float32) * 10:
        got = ix.search(q, 10)
        want = decode_oracle_top_k(q, decoded, list(range(300)), 10)
        assert list(got.ids) == want


def test_pq_index_quantization_mse_non_increasing_in_ks_and_m():
    def mean_mse(M, ks):
        errs = []
        for seed in range(5):
            data = np.random.default_rng(100 + seed).random((256, 8))
            cb = train_codebooks(data, PqParams(M=M, ks=ks, seed=seed))
            rec = pq_decode(cb, pq_encode(cb, data))
            errs.append(((data - rec) ** 2).sum(axis=1).mean())
        return float(np.mean(errs))

    by_ks = [mean_mse(2, ks) for ks in (2, 8, 32)]
    assert by_ks[0] >= by_ks[1] >= by_ks[2]
    by_m = [mean_mse(M, 8) for M in (1, 2, 4)]
    assert by_m[0] >= by_m[1] >= by_m[2]


def test_pq_index_rejects_empty_load_and_bad_dim():
    with pytest.raises(ValueError):
        PqIndex(Metric.SQUARED_L2, 10, PqParams(M=8))
    ix = PqIndex(Metric.SQUARED_L2, 8, PqParams(M=2, ks=4))
    with pytest.raises(ValueError):
        ix.load_initial([])


# ------------------------------------------------------------------ ivfpq


def test_ivfpq_nlist_one_degenerates_to_plain_pq(rng):
    rows = rng.random((200, 8), dtype=np.float32)
    for metric in (Metric.SQUARED_L2, Metric.NEG_INNER_PRODUCT):
        ix = IvfPqIndex(metric, 8, IvfParams(nlist=1, nprobe=1, M=2, ks=16, seed=7))
        ix.load_initial(make_records(rows))
        assert len(ix._lists) == 1
        assert ix._lists[0] == list(range(200))
        # the single coarse centroid is exactly the data mean
        np.testing.assert_array_equal(
            ix.coarse[0], rows.astype(np.float64).mean(axis=0)
        )
        for q in rng.random((5, 8), dtype=np.float32):
            got = ix.search(q, 10)
            q64 = q.astype(np.float64)
            if metric is Metric.SQUARED_L2:
                table = adc_table(ix.codebook, q64 - ix.coarse[0], metric)
                dists = adc_accumulate(table, ix._store.codes)
            else:
                table = adc_table(ix.codebook, q64, metric)
                dists = adc_accumulate(table, ix._store.codes) - q64 @ ix.coarse[0]
            order = sorted(range(200), key=lambda i: (dists[i], i))[:10]
            assert list(got.ids) == order
            np.testing.assert_allclose(got.distances, dists[order], rtol=1e-12)


def test_ivfpq_recall_improves_with_more_probes(rng):
    rows = rng.random((5000, 16), dtype=np.float32)
    ix = IvfPqIndex(
        Metric.SQUARED_L2, 16, IvfParams(nlist=64, nprobe=1, M=4, ks=64, seed=0)
    )
    ix.load_initial(make_records(rows))
    queries = rng.random((30, 16), dtype=np.float32)

    def mean_recall():
        hits = 0
        for q in queries:
            truth = set(top_k(q, rows, 10, Metric.SQUARED_L2).ids)
            hits += len(truth & set(ix.search(q, 10).ids))
        return hits / (10 * len(queries))

    narrow = mean_recall()
    ix.params.nprobe = 64
    wide = mean_recall()
    assert wide >= narrow


def test_ivfpq_inserted_vector_found_at_full_probe(rng):
    rows = rng.random((500, 8), dtype=np.float32)
    ix = IvfPqIndex(
        Metric.SQUARED_L2, 8, IvfParams(nlist=8, nprobe=8, M=2, ks=16, seed=1)
    )
    ix.load_initial(make_records(rows))
    outlier = np.full(8, 3.0, dtype=np.float32)
    ix.insert_batch(make_records(outlier[None, :], start_id=500))
    got = ix.search(outlier, 10)
    assert 500 in set(got.ids)
    # and it went to the list of its nearest coarse centroid
    want_list = int(((ix.coarse - outlier.astype(np.float64)) ** 2).sum(axis=1).argmin())
    assert 500 == ix._store.ids[ix._lists[want_list][-1]]


def test_ivfpq_params_validation():
    with pytest.raises(ValueError):
        IvfParams(nlist=4, nprobe=5)
    with pytest.raises(ValueError):
        IvfParams(nlist=0)
    with pytest.raises(ValueError):
        IvfParams(nprobe=0)


def test_registry_exposes_quantization_indexes():
    for name, cls in (("pq", PqIndex), ("onlinepq", OnlinePqIndex), ("ivfpq", IvfPqIndex)):
        ix = create_index(name, Metric.SQUARED_L2, 8)
        assert isinstance(ix, cls)
