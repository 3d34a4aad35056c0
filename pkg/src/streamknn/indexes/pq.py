"""Product-quantization index family.

Three variants share one codebook machinery:

* ``PqIndex`` trains per-subspace codebooks offline and keeps them frozen;
  rows are stored only as compact codes and searched with asymmetric
  distance computation (ADC) over a per-query lookup table.
* ``OnlinePqIndex`` additionally nudges each assigned centroid toward every
  inserted row with a count-weighted streaming mean.  Codes written earlier
  are never re-encoded, so centroid drift degrades old codes over time.
* ``IvfPqIndex`` adds a coarse quantizer: rows are bucketed by their nearest
  coarse centroid (squared L2, regardless of query metric) and the residual
  is PQ-encoded inside that bucket's list.  Queries scan the ``nprobe``
  nearest lists.

Codebook training is plain Lloyd k-means with greedy ++ seeding and runs
only during the offline load; it minimizes squared L2 error in every case,
which is the standard recipe even when queries use inner-product scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import time

import numpy as np

from .. import core
from ..core import Metric
from ..index_api import DynamicIndex, InsertCost, coerce_params
from ..kernels import adc_accumulate


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """All-pairs squared L2 distances, (n, k), via the gram expansion."""
    pp = np.einsum("ij,ij->i", points, points)[:, None]
    cc = np.einsum("ij,ij->i", centers, centers)[None, :]
    d2 = pp + cc - 2.0 * (points @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plusplus_seed(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding; always returns k rows drawn from data."""
    n = len(data)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    best = _sq_dists(data, data[chosen[0]][None, :])[:, 0]
    for i in range(1, k):
        total = best.sum()
        if total > 0.0:
            chosen[i] = rng.choice(n, p=best / total)
        else:
            # all remaining mass is on already-selected points (duplicates)
            chosen[i] = rng.integers(n)
        step = _sq_dists(data, data[chosen[i]][None, :])[:, 0]
        np.minimum(best, step, out=best)
    return data[chosen].copy()


def lloyd_kmeans(
    data: np.ndarray,
    k: int,
    iters: int = 20,
    rng: np.random.Generator | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lloyd's algorithm with ++ seeding.

    Returns ``(centroids, assignment, sse_history)`` where the history has
    ``iters + 1`` entries: the objective right after seeding, then after each
    centroid update.  The sequence is non-increasing.  Clusters that lose all
    members keep their previous centroid.  If ``k`` exceeds the number of
    rows, the trained centroids are padded by cycling through themselves so
    the returned array still has k rows.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("k-means needs a non-empty 2-D matrix")
    if k < 1:
        raise ValueError("k must be >= 1, got %d" % k)
    if rng is None:
        rng = np.random.default_rng(seed)
    n = len(data)
    k_eff = min(k, n)
    centroids = _plusplus_seed(data, k_eff, rng)

    history = []
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        d2 = _sq_dists(data, centroids)
        assign = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), assign].sum()))
        for j in range(k_eff):
            members = assign == j
            if members.any():
                centroids[j] = data[members].mean(axis=0)
    d2 = _sq_dists(data, centroids)
    assign = d2.argmin(axis=1)
    history.append(float(d2[np.arange(n), assign].sum()))

    if k_eff < k:
        pad_idx = np.arange(k - k_eff) % k_eff
        centroids = np.vstack([centroids, centroids[pad_idx]])
    return centroids, assign, np.asarray(history, dtype=np.float64)


@dataclass
class PqParams:
    """Product quantizer settings.

    M subquantizers of ks centroids each; M must divide the dimension.
    """

    M: int = 8
    ks: int = 256
    kmeans_iters: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError("M must be >= 1, got %d" % self.M)
        if not 2 <= self.ks <= 256:
            raise ValueError("ks must be in [2, 256], got %d" % self.ks)
        if self.kmeans_iters < 1:
            raise ValueError("kmeans_iters must be >= 1, got %d" % self.kmeans_iters)


@dataclass
class Codebook:
    """Per-subspace centroid tables plus assignment counts.

    ``centroids`` is (M, ks, d/M) float64 and ``counts`` is (M, ks) int64.
    ``padded`` flags training sets smaller than ks, where the surplus
    centroids are duplicates and never win an argmin tie.  ``sse`` holds the
    per-subspace k-means objective trajectory recorded during training.
    """

    centroids: np.ndarray
    counts: np.ndarray
    padded: bool = False
    sse: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.centroids.shape[0]

    @property
    def ks(self) -> int:
        return self.centroids.shape[1]

    @property
    def dsub(self) -> int:
        return self.centroids.shape[2]

    @property
    def dim(self) -> int:
        return self.M * self.dsub

    def split(self, rows: np.ndarray) -> np.ndarray:
        """View rows (n, d) as per-subspace blocks (M, n, d/M)."""
        rows = np.asarray(rows, dtype=np.float64)
        n = rows.shape[0]
        return rows.reshape(n, self.M, self.dsub).transpose(1, 0, 2)


def train_codebooks(rows: np.ndarray, params: PqParams) -> Codebook:
    """Train one k-means codebook per subspace on the offline rows."""
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.ndim != 2 or len(rows) == 0:
        raise ValueError("codebook training needs a non-empty 2-D matrix")
    n, d = rows.shape
    if d % params.M != 0:
        raise ValueError(
            "M=%d must divide the dimension d=%d" % (params.M, d)
        )
    dsub = d // params.M
    rng = np.random.default_rng(params.seed)
    centroids = np.empty((params.M, params.ks, dsub), dtype=np.float64)
    counts = np.zeros((params.M, params.ks), dtype=np.int64)
    sse = np.empty((params.M, params.kmeans_iters + 1), dtype=np.float64)
    for m in range(params.M):
        sub = rows[:, m * dsub : (m + 1) * dsub]
        cents, assign, hist = lloyd_kmeans(
            sub, params.ks, iters=params.kmeans_iters, rng=rng
        )
        centroids[m] = cents
        counts[m] = np.bincount(assign, minlength=params.ks)
        sse[m] = hist
    return Codebook(
        centroids=centroids, counts=counts, padded=n < params.ks, sse=sse
    )


def pq_encode(codebook: Codebook, rows: np.ndarray) -> np.ndarray:
    """Assign each subvector to its nearest centroid; ties take the lowest index."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != codebook.dim:
        raise ValueError(
            "rows have dim %d, codebook covers %d" % (rows.shape[1], codebook.dim)
        )
    codes = np.empty((rows.shape[0], codebook.M), dtype=np.uint8)
    for m, sub in enumerate(codebook.split(rows)):
        codes[:, m] = _sq_dists(sub, codebook.centroids[m]).argmin(axis=1)
    return codes


def pq_decode(codebook: Codebook, codes: np.ndarray) -> np.ndarray:
    """Reconstruct rows from codes by concatenating the chosen centroids."""
    codes = np.atleast_2d(np.asarray(codes))
    out = np.empty((codes.shape[0], codebook.dim), dtype=np.float64)
    for m in range(codebook.M):
        block = slice(m * codebook.dsub, (m + 1) * codebook.dsub)
        out[:, block] = codebook.centroids[m][codes[:, m]]
    return out


def adc_table(codebook: Codebook, query: np.ndarray, metric: Metric) -> np.ndarray:
    """Per-query (M, ks) lookup table of subspace distances to every centroid."""
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != codebook.dim:
        raise ValueError(
            "query has dim %d, codebook covers %d" % (query.shape[0], codebook.dim)
        )
    parts = query.reshape(codebook.M, codebook.dsub)
    table = np.empty((codebook.M, codebook.ks), dtype=np.float64)
    for m in range(codebook.M):
        if metric is Metric.SQUARED_L2:
            diff = codebook.centroids[m] - parts[m][None, :]
            table[m] = np.einsum("ij,ij->i", diff, diff)
        else:
            table[m] = -(codebook.centroids[m] @ parts[m])
    return table


def adc_distance(
    query: np.ndarray, code: np.ndarray, codebook: Codebook, metric: Metric
) -> float:
    """Asymmetric distance between a raw query and one encoded row."""
    table = adc_table(codebook, query, metric)
    code = np.asarray(code, dtype=np.uint8).reshape(1, -1)
    return float(adc_accumulate(table, code)[0])


def onlinepq_update(codebook: Codebook, m: int, j: int, x_sub: np.ndarray) -> None:
    """Fold one assigned subvector into centroid (m, j) as a streaming mean."""
    codebook.counts[m, j] += 1
    cent = codebook.centroids[m, j]
    cent += (np.asarray(x_sub, dtype=np.float64) - cent) / codebook.counts[m, j]


class _CodeStore:
    """Growable (n, M) uint8 code matrix with parallel int64 ids."""

    def __init__(self, M: int, capacity: int = 1024) -> None:
        self._codes = np.empty((max(capacity, 1), M), dtype=np.uint8)
        self._ids = np.empty(max(capacity, 1), dtype=np.int64)
        self.n = 0

    def append(self, codes: np.ndarray, ids: np.ndarray) -> None:
        add = len(ids)
        need = self.n + add
        if need > len(self._ids):
            cap = len(self._ids)
            while cap < need:
                cap *= 2
            codes_new = np.empty((cap, self._codes.shape[1]), dtype=np.uint8)
            ids_new = np.empty(cap, dtype=np.int64)
            codes_new[: self.n] = self._codes[: self.n]
            ids_new[: self.n] = self._ids[: self.n]
            self._codes, self._ids = codes_new, ids_new
        self._codes[self.n : need] = codes
        self._ids[self.n : need] = ids
        self.n = need

    @property
    def codes(self) -> np.ndarray:
        return self._codes[: self.n]

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: self.n]


class PqIndex(DynamicIndex):
    """Flat product-quantization index with frozen codebooks."""

    def __init__(self, metric: Metric, dim: int, params: PqParams | dict | None = None):
        p = coerce_params(PqParams, params)
        if dim % p.M != 0:
            raise ValueError("M=%d must divide the dimension d=%d" % (p.M, dim))
        super().__init__(metric, dim, p)
        self.codebook: Codebook | None = None
        self._store = _CodeStore(p.M)

    def _load(self, records) -> None:
        if not records:
            raise ValueError("codebook training needs at least one offline row")
        rows = core.as_matrix(records).astype(np.float64)
        ids = np.array([r.id for r in records], dtype=np.int64)
        self.codebook = train_codebooks(rows, self.params)
        self._store.append(pq_encode(self.codebook, rows), ids)

    def _encode_batch(self, rows: np.ndarray) -> np.ndarray:
        return pq_encode(self.codebook, rows)

    def insert_batch(self, records) -> InsertCost:
        self.check_batch(records)
        t0 = time.perf_counter()
        rows = core.as_matrix(records).astype(np.float64)
        ids = np.array([r.id for r in records], dtype=np.int64)
        self._store.append(self._encode_batch(rows), ids)
        return InsertCost(wall_seconds=time.perf_counter() - t0)

    def search(self, query: np.ndarray, k: int) -> core.TopK:
        query = self.check_query(query)
        if self._store.n == 0:
            return core.TopK(k=k)
        table = adc_table(self.codebook, query, self.metric)
        dists = adc_accumulate(table, self._store.codes)
        return core.select_top_k(dists, self._store.ids, k)

    @property
    def count(self) -> int:
        return self._store.n


class OnlinePqIndex(PqIndex):
    """PQ whose centroids keep moving: every insert drags its assigned
    centroid toward the new row by a streaming-mean step.  Existing codes
    stay as written, so the decoded positions of old rows drift."""

    def _encode_batch(self, rows: np.ndarray) -> np.ndarray:
        cb = self.codebook
        codes = np.empty((rows.shape[0], cb.M), dtype=np.uint8)
        for i, row in enumerate(rows):
            parts = row.reshape(cb.M, cb.dsub)
            for m in range(cb.M):
                d2 = _sq_dists(parts[m][None, :], cb.centroids[m])[0]
                j = int(d2.argmin())
                codes[i, m] = j
                onlinepq_update(cb, m, j, parts[m])
        return codes


@dataclass
class IvfParams:
    """Inverted-file settings wrapping the residual product quantizer."""

    nlist: int = 64
    nprobe: int = 8
    M: int = 8
    ks: int = 256
    kmeans_iters: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.nlist < 1:
            raise ValueError("nlist must be >= 1, got %d" % self.nlist)
        if not 1 <= self.nprobe <= self.nlist:
            raise ValueError(
                "nprobe must be in [1, nlist=%d], got %d" % (self.nlist, self.nprobe)
            )

    def pq_params(self) -> PqParams:
        return PqParams(
            M=self.M, ks=self.ks, kmeans_iters=self.kmeans_iters, seed=self.seed
        )


class IvfPqIndex(DynamicIndex):
    """Two-tier quantizer: a coarse k-means partition over raw rows plus a
    residual product quantizer inside each inverted list.  Coarse assignment
    always uses squared L2, for inserts and for picking the nprobe lists to
    scan, whatever the query metric."""

    def __init__(self, metric: Metric, dim: int, params: IvfParams | dict | None = None):
        p = coerce_params(IvfParams, params)
        if dim % p.M != 0:
            raise ValueError("M=%d must divide the dimension d=%d" % (p.M, dim))
        super().__init__(metric, dim, p)
        self.codebook: Codebook | None = None
        self.coarse: np.ndarray | None = None
        self._store = _CodeStore(p.M)
        self._lists: list[list[int]] = []

    def _load(self, records) -> None:
        if not records:
            raise ValueError("coarse quantizer training needs at least one offline row")
        rows = core.as_matrix(records).astype(np.float64)
        ids = np.array([r.id for r in records], dtype=np.int64)
        p = self.params
        self.coarse, assign, _ = lloyd_kmeans(
            rows, p.nlist, iters=p.kmeans_iters, seed=p.seed
        )
        residuals = rows - self.coarse[assign]
        self.codebook = train_codebooks(residuals, p.pq_params())
        self._lists = [[] for _ in range(p.nlist)]
        base = self._store.n
        self._store.append(pq_encode(self.codebook, residuals), ids)
        for pos, lst in enumerate(assign):
            self._lists[lst].append(base + pos)

    def insert_batch(self, records) -> InsertCost:
        self.check_batch(records)
        t0 = time.perf_counter()
        rows = core.as_matrix(records).astype(np.float64)
        ids = np.array([r.id for r in records], dtype=np.int64)
        assign = _sq_dists(rows, self.coarse).argmin(axis=1)
        residuals = rows - self.coarse[assign]
        base = self._store.n
        self._store.append(pq_encode(self.codebook, residuals), ids)
        for pos, lst in enumerate(assign):
            self._lists[lst].append(base + pos)
        return InsertCost(wall_seconds=time.perf_counter() - t0)

    def search(self, query: np.ndarray, k: int) -> core.TopK:
        query = self.check_query(query)
        if self._store.n == 0:
            return core.TopK(k=k)
        q64 = query.astype(np.float64)
        coarse_d2 = _sq_dists(q64[None, :], self.coarse)[0]
        order = np.lexsort((np.arange(len(coarse_d2)), coarse_d2))
        probe = order[: self.params.nprobe]

        found_d: list[np.ndarray] = []
        found_i: list[np.ndarray] = []
        for lst in probe:
            positions = self._lists[lst]
            if not positions:
                continue
            pos = np.asarray(positions, dtype=np.int64)
            if self.metric is Metric.SQUARED_L2:
                table = adc_table(self.codebook, q64 - self.coarse[lst], self.metric)
                dists = adc_accumulate(table, self._store.codes[pos])
            else:
                table = adc_table(self.codebook, q64, self.metric)
                dists = adc_accumulate(table, self._store.codes[pos])
                dists = dists - float(q64 @ self.coarse[lst])
            found_d.append(dists)
            found_i.append(self._store.ids[pos])
        if not found_d:
            return core.TopK(k=k)
        return core.select_top_k(np.concatenate(found_d), np.concatenate(found_i), k)

    @property
    def count(self) -> int:
        return self._store.n
