"""Single-layer navigable small-world graph.

Construction is the flat variant of the hierarchical insert: a bounded
best-first search finds candidates, the nearest M become neighbors, and
overflowing reverse lists are pruned back to 2M by distance.  Queries
restart the greedy search from several random stored nodes and take the
exact top k over the union of the pools, which compensates for the lack
of a long-range entry hierarchy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..core import Metric, TopK
from ..index_api import coerce_params
from .graph_base import AdjacencyStore, GraphIndex


@dataclass
class NswParams:
    M: int = 16
    ef_construction: int = 100
    ef_search: int = 64
    restarts: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError("M must be >= 2, got %d" % self.M)
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1, got %d" % self.restarts)


class NswIndex(GraphIndex):
    def __init__(self, metric: Metric, dim: int, params: NswParams | dict | None = None):
        p = coerce_params(NswParams, params)
        super().__init__(metric, dim, p)
        self._adj = AdjacencyStore(2 * p.M)
        self._rng = np.random.default_rng(p.seed)

    def _insert_row(self, p: int) -> None:
        self._adj.ensure(p + 1)
        if p == 0:
            return
        v = self._rows.raw[p]
        ids, _ = self._greedy(self._adj, 0, v, self.params.ef_construction)
        sel = ids[: self.params.M]
        self._adj.set_list(p, sel)
        for s in sel.tolist():
            if not self._adj.append(s, p):
                cand = np.append(self._adj.neighbors(s), np.int32(p)).astype(np.int64)
                dists = kernels.dist_subset(
                    self._rows.raw[s], self._rows.raw, cand, self.metric.code
                )
                order = np.lexsort((cand, dists))[: 2 * self.params.M]
                self._adj.set_list(s, cand[order])

    def search(self, query: np.ndarray, k: int) -> TopK:
        query = self.check_query(query)
        n = self._rows.n
        if n == 0:
            return TopK(k=k)
        ef = max(self.params.ef_search, k)
        restarts = min(self.params.restarts, n)
        entries = self._rng.choice(n, size=restarts, replace=False)
        all_pos: list[np.ndarray] = []
        all_d: list[np.ndarray] = []
        for entry in entries:
            ids, dists = self._greedy(self._adj, int(entry), query, ef)
            all_pos.append(ids)
            all_d.append(dists)
        pos = np.concatenate(all_pos)
        dist = np.concatenate(all_d)
        uniq, first = np.unique(pos, return_index=True)
        return self._finish(uniq, dist[first], k)
