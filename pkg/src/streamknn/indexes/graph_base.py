"""Shared storage and plumbing for the navigation-graph indexes.

All graph indexes address rows by dense position (arrival order) and keep
their adjacency in fixed-width, -1 padded int32 matrices so the traversal
kernel can walk them without any per-node Python objects.  Search results
are translated back to the original row ids at the end, re-ranked by
(distance, id) so tie ordering matches the exact oracle.
"""

from __future__ import annotations

import time
from abc import abstractmethod

import numpy as np

from .. import kernels
from ..core import Metric, TopK, VectorRecord
from ..index_api import DynamicIndex, InsertCost
from ._store import RowStore


class AdjacencyStore:
    """Padded adjacency rows: (capacity, width) int32 plus per-node counts.

    Unused slots hold -1 and are never read because the counts bound every
    scan.  Rows double on demand; the raw buffers are handed straight to
    the traversal kernel.
    """

    __slots__ = ("width", "neigh", "counts")

    def __init__(self, width: int, capacity: int = 1024):
        if width < 1:
            raise ValueError("adjacency width must be >= 1, got %d" % width)
        self.width = int(width)
        cap = max(int(capacity), 1)
        self.neigh = np.full((cap, self.width), -1, dtype=np.int32)
        self.counts = np.zeros(cap, dtype=np.int32)

    @property
    def capacity(self) -> int:
        return len(self.counts)

    def ensure(self, n: int) -> None:
        cap = len(self.counts)
        if n <= cap:
            return
        while cap < n:
            cap *= 2
        neigh = np.full((cap, self.width), -1, dtype=np.int32)
        counts = np.zeros(cap, dtype=np.int32)
        old = len(self.counts)
        neigh[:old] = self.neigh
        counts[:old] = self.counts
        self.neigh, self.counts = neigh, counts

    def neighbors(self, u: int) -> np.ndarray:
        return self.neigh[u, : self.counts[u]]

    def degree(self, u: int) -> int:
        return int(self.counts[u])

    def set_list(self, u: int, ids) -> None:
        ids = np.asarray(ids, dtype=np.int32)
        if len(ids) > self.width:
            raise ValueError(
                "list of %d exceeds adjacency width %d" % (len(ids), self.width)
            )
        self.neigh[u, : len(ids)] = ids
        self.counts[u] = len(ids)

    def append(self, u: int, v: int) -> bool:
        """Add one edge if there is room; False means the row is full."""
        c = self.counts[u]
        if c >= self.width:
            return False
        self.neigh[u, c] = v
        self.counts[u] = c + 1
        return True

    def replace_slot(self, u: int, slot: int, v: int) -> None:
        self.neigh[u, slot] = v


class BoundedNeighborLists:
    """Per-node lists capped at k entries, evicting the worst by (d, id).

    Keeps edge distances alongside the adjacency so evictions never have
    to recompute anything.
    """

    __slots__ = ("k", "adj", "_dist")

    def __init__(self, k: int, capacity: int = 1024):
        self.k = int(k)
        self.adj = AdjacencyStore(self.k, capacity)
        self._dist = np.empty((self.adj.capacity, self.k), dtype=np.float64)

    def ensure(self, n: int) -> None:
        self.adj.ensure(n)
        if len(self._dist) < self.adj.capacity:
            dist = np.empty((self.adj.capacity, self.k), dtype=np.float64)
            dist[: len(self._dist)] = self._dist
            self._dist = dist

    def add(self, u: int, v: int, d: float) -> bool:
        """Link u -> v at distance d; returns True if the list changed."""
        if u == v:
            return False
        c = self.adj.degree(u)
        nbrs = self.adj.neighbors(u)
        if (nbrs == v).any():
            return False
        if c < self.k:
            self.adj.append(u, v)
            self._dist[u, c] = d
            return True
        ds = self._dist[u, :c]
        worst = int(np.lexsort((nbrs, ds))[-1])
        if (d, v) < (float(ds[worst]), int(nbrs[worst])):
            self.adj.replace_slot(u, worst, v)
            self._dist[u, worst] = d
            return True
        return False

    def sorted_neighbors(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Node u's neighbors ordered by (distance, id)."""
        nbrs = self.adj.neighbors(u)
        ds = self._dist[u, : len(nbrs)]
        order = np.lexsort((nbrs, ds))
        return nbrs[order].copy(), ds[order].copy()


class GraphIndex(DynamicIndex):
    """Base class: row storage, per-row build loop, result translation."""

    def __init__(self, metric: Metric, dim: int, params) -> None:
        super().__init__(metric, dim, params)
        self._rows = RowStore(dim)
        self.phase_totals: dict[str, float] = {}

    # -- write path -----------------------------------------------------

    def _load(self, records: list[VectorRecord]) -> None:
        for p in self._rows.append(records):
            self._insert_row(int(p))

    def insert_batch(self, records: list[VectorRecord]) -> InsertCost:
        self.check_batch(records)
        t0 = time.perf_counter()
        before = dict(self.phase_totals)
        for p in self._rows.append(records):
            self._insert_row(int(p))
        wall = time.perf_counter() - t0
        phases = {name: self.phase_totals[name] - before[name] for name in before}
        return InsertCost(wall_seconds=wall, phases=phases)

    @abstractmethod
    def _insert_row(self, p: int) -> None:
        """Wire freshly stored position p into the graph."""

    @property
    def count(self) -> int:
        return self._rows.n

    # -- read path helpers ----------------------------------------------

    def _greedy(self, adj: AdjacencyStore, entry: int, query, ef: int, tombstones=None):
        """Kernel traversal over one adjacency structure; positions out."""
        return kernels.greedy_search(
            self._rows.raw,
            adj.neigh,
            adj.counts,
            int(entry),
            query,
            int(ef),
            self.metric.code,
            tombstones,
        )

    def _finish(self, positions: np.ndarray, dists: np.ndarray, k: int) -> TopK:
        """Translate positions to row ids and re-rank by (distance, id)."""
        ext = self._rows.ids[positions]
        order = np.lexsort((ext, dists))[:k]
        return TopK(k=k, ids=ext[order].copy(), distances=dists[order].copy())
