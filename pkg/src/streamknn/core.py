"""Core vocabulary: distance metrics, vector records, exact top-k.

Every index implementation and the ingestion harness build on the
primitives here.  Two metrics are supported, both oriented so that a
smaller value means a closer match:

* squared Euclidean distance
* negative inner product

Ties in any ranking are broken by ascending row id, which keeps every
result deterministic and lets exact implementations agree bit-for-bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class DimensionMismatch(ValueError):
    """A vector's dimensionality does not match its peer or its index."""


class Metric(enum.Enum):
    """Distance metric, smaller value = closer match."""

    SQUARED_L2 = "squared_l2"
    NEG_INNER_PRODUCT = "neg_inner_product"

    @property
    def code(self) -> int:
        # integer tag understood by the kernel backends
        return 0 if self is Metric.SQUARED_L2 else 1

    @classmethod
    def parse(cls, name: str) -> "Metric":
        key = str(name).strip().lower()
        aliases = {
            "squared_l2": cls.SQUARED_L2,
            "sql2": cls.SQUARED_L2,
            "l2": cls.SQUARED_L2,
            "neg_inner_product": cls.NEG_INNER_PRODUCT,
            "neg_ip": cls.NEG_INNER_PRODUCT,
            "ip": cls.NEG_INNER_PRODUCT,
        }
        if key not in aliases:
            raise ValueError(
                "unknown metric %r (expected one of %s)"
                % (name, ", ".join(sorted(set(aliases))))
            )
        return aliases[key]


@dataclass(slots=True)
class VectorRecord:
    """One row of the stream: dense float32 values plus bookkeeping.

    ``id`` is dense and assigned in emission order; ``gen_time`` is the
    simulated instant the source emitted the row (0.0 for rows that are
    preloaded before the stream starts).
    """

    id: int
    values: np.ndarray
    gen_time: float = 0.0

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 1:
            raise ValueError("record values must be a 1-D vector")


@dataclass(slots=True)
class TopK:
    """Exact or approximate k-nearest result, sorted by (distance, id)."""

    k: int
    ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    distances: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.ids)

    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.ids.tolist(), self.distances.tolist()))


def as_matrix(records: list[VectorRecord]) -> np.ndarray:
    """Stack record values into one C-contiguous (n, d) float32 matrix."""
    if not records:
        return np.empty((0, 0), dtype=np.float32)
    return np.ascontiguousarray(np.stack([r.values for r in records]))


def make_records(
    matrix: np.ndarray, start_id: int = 0, gen_times: np.ndarray | None = None
) -> list[VectorRecord]:
    """Wrap the rows of a matrix as records with consecutive ids."""
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    out = []
    for i in range(matrix.shape[0]):
        t = float(gen_times[i]) if gen_times is not None else 0.0
        out.append(VectorRecord(id=start_id + i, values=matrix[i], gen_time=t))
    return out


def distance(a: np.ndarray, b: np.ndarray, metric: Metric) -> float:
    """Distance between two vectors under ``metric`` (smaller = closer)."""
    a = np.ascontiguousarray(a, dtype=np.float32)
    b = np.ascontiguousarray(b, dtype=np.float32)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(
            "distance() needs two 1-D vectors of equal length, got %s and %s"
            % (a.shape, b.shape)
        )
    return float(kernels.dist_point(a, b, metric.code))


def top_k(
    query: np.ndarray,
    vectors: np.ndarray,
    k: int,
    metric: Metric,
    ids: np.ndarray | None = None,
) -> TopK:
    """Exact k smallest distances over candidate rows, ties by ascending id.

    ``vectors`` is an (n, d) matrix; ``ids`` defaults to 0..n-1.  Returns
    fewer than ``k`` entries when fewer candidates exist.
    """
    if k < 1:
        raise ValueError("k must be >= 1, got %d" % k)
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise ValueError("candidate vectors must form an (n, d) matrix")
    query = np.ascontiguousarray(query, dtype=np.float32)
    n, d = vectors.shape
    if n and query.shape != (d,):
        raise DimensionMismatch(
            "query has shape %s but candidates are %d-dimensional" % (query.shape, d)
        )
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (n,):
            raise ValueError("ids must align one-to-one with candidate rows")
    if n == 0:
        return TopK(k=k)

    dists = kernels.dist_matrix(query, vectors, metric.code)
    return select_top_k(dists, ids, k)


def select_top_k(distances: np.ndarray, ids: np.ndarray, k: int) -> TopK:
    """Exact (distance, id) selection over precomputed distances."""
    if k < 1:
        raise ValueError("k must be >= 1, got %d" % k)
    distances = np.asarray(distances, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    n = len(distances)
    kk = min(k, n)
    if kk < 1:
        return TopK(k=k)
    if kk < n:
        # argpartition may split ties at the boundary arbitrarily, so take
        # every row at or below the k-th distance and re-rank by (d, id)
        part = np.argpartition(distances, kk - 1)[:kk]
        cutoff = distances[part].max()
        cand = np.flatnonzero(distances <= cutoff)
    else:
        cand = np.arange(n)
    order = np.lexsort((ids[cand], distances[cand]))[:kk]
    sel = cand[order]
    return TopK(k=k, ids=ids[sel].copy(), distances=distances[sel].copy())


def normalize_dataset(matrix: np.ndarray) -> np.ndarray:
    """Scale a whole dataset into [-1, 1] by its global maximum magnitude.

    One scalar divides every entry, so relative geometry is preserved for
    both metrics.  An all-zero dataset is returned unchanged.
    """
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.size == 0:
        return matrix
    peak = float(np.max(np.abs(matrix)))
    if peak == 0.0:
        return matrix
    return np.ascontiguousarray(matrix / np.float32(peak))
