"""Online descent-style k-NN graph with tombstone deletes.

Each node keeps a bounded list of its K nearest known neighbors.  An
insert searches the current graph from a random live node, links the new
row to the best K finds and offers itself back to each of them, evicting
their worst edge when the list is full.  Deletes only mark the id in a
tombstone set: the traversal still walks through dead nodes but never
returns them.

Because each list keeps only the K nearest, the directed graph drifts
toward a pure k-NN digraph, which is not navigable from a single entry:
whole regions can end up without in-edges on any path from a random
start.  Queries therefore restart from a fresh unseen live node whenever
the frontier dies before the candidate pool holds ``min(ef, live)``
entries; with ``ef >= live`` this degrades gracefully to an exact scan.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..core import Metric, TopK
from ..index_api import coerce_params
from .graph_base import BoundedNeighborLists, GraphIndex


@dataclass
class NnDescentParams:
    K: int = 20
    ef_construction: int = 60
    ef_search: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1, got %d" % self.K)


class NnDescentIndex(GraphIndex):
    def __init__(
        self, metric: Metric, dim: int, params: NnDescentParams | dict | None = None
    ):
        p = coerce_params(NnDescentParams, params)
        super().__init__(metric, dim, p)
        self._graph = BoundedNeighborLists(p.K)
        self._tomb = np.zeros(1024, dtype=np.uint8)
        self._dead = 0
        self._pos_of: dict[int, int] = {}
        self._rng = np.random.default_rng(p.seed)

    @property
    def count(self) -> int:
        return self._rows.n - self._dead

    def _ensure(self, n: int) -> None:
        self._graph.ensure(n)
        if len(self._tomb) < n:
            cap = len(self._tomb)
            while cap < n:
                cap *= 2
            tomb = np.zeros(cap, dtype=np.uint8)
            tomb[: len(self._tomb)] = self._tomb
            self._tomb = tomb

    def _random_live(self) -> int:
        if self._dead >= self._rows.n:
            return -1
        live = np.flatnonzero(self._tomb[: self._rows.n] == 0)
        return int(self._rng.choice(live))

    def _insert_row(self, p: int) -> None:
        self._ensure(p + 1)
        self._pos_of[int(self._rows.ids[p])] = p
        entry = self._random_live_excluding(p)
        if entry < 0:
            return
        v = self._rows.raw[p]
        ef = max(self.params.K, self.params.ef_construction)
        ids, dists = self._greedy(
            self._graph.adj, entry, v, ef, tombstones=self._tomb
        )
        for s, d in zip(ids[: self.params.K].tolist(), dists[: self.params.K].tolist()):
            self._graph.add(p, s, d)
            self._graph.add(s, p, d)

    def _random_live_excluding(self, p: int) -> int:
        """Random live node other than p itself (the row just appended)."""
        n = self._rows.n
        live = np.flatnonzero(self._tomb[:n] == 0)
        live = live[live != p]
        if len(live) == 0:
            return -1
        return int(self._rng.choice(live))

    def delete(self, row_id: int) -> bool:
        pos = self._pos_of.get(int(row_id))
        if pos is None or self._tomb[pos]:
            warnings.warn("delete of unknown id %d ignored" % row_id, stacklevel=2)
            return False
        self._tomb[pos] = 1
        self._dead += 1
        return True

    def search(self, query: np.ndarray, k: int) -> TopK:
        query = self.check_query(query)
        entry = self._random_live()
        if entry < 0:
            return TopK(k=k)
        ef = max(self.params.ef_search, k)
        n = self._rows.n
        live = self.count
        seen = np.zeros(n, dtype=bool)
        pools_pos: list[np.ndarray] = []
        pools_d: list[np.ndarray] = []
        while True:
            ids, dists = self._greedy(
                self._graph.adj, entry, query, ef, tombstones=self._tomb
            )
            pools_pos.append(ids)
            pools_d.append(dists)
            seen[ids] = True
            seen[entry] = True
            if int(seen.sum()) >= min(ef, live):
                break
            unseen = np.flatnonzero(~seen & (self._tomb[:n] == 0))
            if len(unseen) == 0:
                break
            entry = int(self._rng.choice(unseen))
        pos = np.concatenate(pools_pos)
        dist = np.concatenate(pools_d)
        uniq, first = np.unique(pos, return_index=True)
        return self._finish(uniq, dist[first], k)
