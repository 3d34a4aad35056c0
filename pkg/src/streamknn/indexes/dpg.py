"""Two-layer diversified proximity graph.

Layer 0 is the bounded online k-NN graph (same mechanics as the descent
index).  Layer 1 keeps, per node, the half of its layer-0 neighbors that
spread across directions: a greedy pass repeatedly takes the candidate
whose worst-case (maximum) cosine similarity to the already-selected set
is smallest.  Layer-1 edges are mirrored so traversal stays bidirectional;
queries run on the layer-1 graph only.

Inserts are local: only the new node and the nodes whose layer-0 list
actually gained the new row have their layer-1 picks rebuilt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Metric, TopK
from ..index_api import coerce_params
from .graph_base import AdjacencyStore, BoundedNeighborLists, GraphIndex


def dpg_diversify(candidates, center, budget: int, dists=None) -> list[int]:
    """Pick up to ``budget`` direction-diverse candidates.

    ``candidates`` is a list of (id, vector) pairs already sorted by
    distance to ``center``; the first pick is always the nearest.  Each
    following pick minimizes the maximum cosine similarity of the centered
    direction vectors against everything already selected, with ties
    broken by distance then id.  Vectors equal to the center have no
    direction; their similarity to anything is defined as 1.0.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0, got %d" % budget)
    if len(candidates) <= budget:
        return [int(c[0]) for c in candidates]
    if budget == 0:
        return []
    ids = np.asarray([c[0] for c in candidates], dtype=np.int64)
    vecs = np.asarray([np.asarray(c[1], dtype=np.float64) for c in candidates])
    center = np.asarray(center, dtype=np.float64)
    dirs = vecs - center[None, :]
    norms = np.linalg.norm(dirs, axis=1)
    degenerate = norms == 0.0
    norms[degenerate] = 1.0
    units = dirs / norms[:, None]
    if dists is None:
        dists = np.einsum("ij,ij->i", dirs, dirs)
    else:
        dists = np.asarray(dists, dtype=np.float64)

    n = len(ids)
    selected = [0]
    # running max cosine of every candidate against the selected set
    max_cos = np.full(n, -np.inf)
    remaining = list(range(1, n))
    while len(selected) < budget and remaining:
        new = selected[-1]
        for r in remaining:
            if degenerate[r] or degenerate[new]:
                cos = 1.0
            else:
                cos = float(units[r] @ units[new])
            if cos > max_cos[r]:
                max_cos[r] = cos
        best = min(remaining, key=lambda r: (max_cos[r], dists[r], ids[r]))
        selected.append(best)
        remaining.remove(best)
    return [int(ids[i]) for i in selected]


@dataclass
class DpgParams:
    K: int = 20
    ef_construction: int = 60
    ef_search: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ValueError("K must be >= 2, got %d" % self.K)


class DpgIndex(GraphIndex):
    def __init__(self, metric: Metric, dim: int, params: DpgParams | dict | None = None):
        p = coerce_params(DpgParams, params)
        super().__init__(metric, dim, p)
        self._layer0 = BoundedNeighborLists(p.K)
        self._out: list[list[int]] = []  # diversified picks, <= K//2 each
        self._into: list[set[int]] = []  # mirror side of other nodes' picks
        self._layer1 = AdjacencyStore(p.K)
        self._stale = False
        self._rng = np.random.default_rng(p.seed)

    @property
    def budget(self) -> int:
        return self.params.K // 2

    def _rebuild_out(self, u: int) -> None:
        nbrs, dists = self._layer0.sorted_neighbors(u)
        cands = [(int(i), self._rows.raw[int(i)]) for i in nbrs]
        picks = dpg_diversify(cands, self._rows.raw[u], self.budget, dists=dists)
        old = set(self._out[u])
        new = set(picks)
        for gone in old - new:
            self._into[gone].discard(u)
        for fresh in new - old:
            self._into[fresh].add(u)
        self._out[u] = picks
        self._stale = True

    def _insert_row(self, p: int) -> None:
        self._layer0.ensure(p + 1)
        self._out.append([])
        self._into.append(set())
        if p == 0:
            return
        v = self._rows.raw[p]
        ef = max(self.params.K, self.params.ef_construction)
        entry = int(self._rng.integers(p))
        ids, dists = self._greedy(self._layer0.adj, entry, v, ef)
        gained = [p]
        for s, d in zip(ids[: self.params.K].tolist(), dists[: self.params.K].tolist()):
            self._layer0.add(p, s, d)
            if self._layer0.add(s, p, d):
                gained.append(s)
        for u in gained:
            self._rebuild_out(u)

    def _materialize(self) -> AdjacencyStore:
        """Pad layer-1 out-edges plus mirrored in-edges for the kernel."""
        if not self._stale:
            return self._layer1
        n = self._rows.n
        lists = [sorted(set(self._out[u]) | self._into[u]) for u in range(n)]
        width = max((len(l) for l in lists), default=1)
        store = AdjacencyStore(max(width, 1), capacity=max(n, 1))
        for u, l in enumerate(lists):
            store.set_list(u, l)
        self._layer1 = store
        self._stale = False
        return store

    def search(self, query: np.ndarray, k: int) -> TopK:
        query = self.check_query(query)
        if self._rows.n == 0:
            return TopK(k=k)
        adj = self._materialize()
        ids, dists = self._greedy(adj, 0, query, max(self.params.ef_search, k))
        return self._finish(ids, dists, k)
