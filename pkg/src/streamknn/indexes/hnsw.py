"""Hierarchical navigable small-world graph with instrumented insert phases.

Every insert is decomposed into three timed phases:

* Greedy: descend from the top entry point to the insertion level with a
  width-1 search per layer;
* Candidate: run the bounded best-first search (ef_construction wide) on
  each layer the new node joins;
* Link: pick neighbors from the candidate pool, wire edges both ways and
  prune any neighbor list that overflows its cap.

The per-phase wall-clock totals are surfaced through InsertCost so the
harness can report how the construction budget shifts when the incoming
distribution drifts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..core import Metric, TopK
from ..index_api import coerce_params
from .graph_base import AdjacencyStore, GraphIndex


@dataclass
class HnswParams:
    M: int = 16
    ef_construction: int = 100
    ef_search: int = 64
    heuristic: bool = False  # diversified neighbor selection instead of nearest-M
    seed: int = 0

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError("M must be >= 2, got %d" % self.M)
        if self.ef_construction < 1 or self.ef_search < 1:
            raise ValueError("ef widths must be >= 1")


class HnswIndex(GraphIndex):
    def __init__(self, metric: Metric, dim: int, params: HnswParams | dict | None = None):
        p = coerce_params(HnswParams, params)
        super().__init__(metric, dim, p)
        self._layers: list[AdjacencyStore] = [AdjacencyStore(2 * p.M)]
        self._node_level: list[int] = []
        self._entry = -1
        self._entry_level = -1
        self._ml = 1.0 / math.log(p.M)
        self._rng = np.random.default_rng(p.seed)
        self.phase_totals = {"Greedy": 0.0, "Candidate": 0.0, "Link": 0.0}

    # -- construction ---------------------------------------------------

    def _sample_level(self) -> int:
        u = 1.0 - self._rng.random()  # uniform on (0, 1]
        return int(math.floor(-math.log(u) * self._ml))

    def _layer(self, level: int) -> AdjacencyStore:
        while level >= len(self._layers):
            self._layers.append(AdjacencyStore(self.params.M))
        return self._layers[level]

    def _cap(self, level: int) -> int:
        return 2 * self.params.M if level == 0 else self.params.M

    def _select(self, pos: np.ndarray, dists: np.ndarray, budget: int) -> np.ndarray:
        """Neighbor selection from a (distance, id)-sorted candidate pool."""
        if not self.params.heuristic or len(pos) <= budget:
            return pos[:budget]
        chosen: list[int] = []
        for c, dc in zip(pos.tolist(), dists.tolist()):
            if len(chosen) == budget:
                break
            ok = True
            for s in chosen:
                if kernels.dist_point(self._rows.raw[c], self._rows.raw[s], self.metric.code) < dc:
                    ok = False
                    break
            if ok:
                chosen.append(c)
        return np.asarray(chosen, dtype=np.int64)

    def _prune_to_nearest(self, adj: AdjacencyStore, u: int, extra: int, cap: int) -> None:
        """Re-rank u's neighbors plus one overflow candidate, keep cap best."""
        cand = np.append(adj.neighbors(u), np.int32(extra)).astype(np.int64)
        dists = kernels.dist_subset(self._rows.raw[u], self._rows.raw, cand, self.metric.code)
        order = np.lexsort((cand, dists))[:cap]
        adj.set_list(u, cand[order])

    def _insert_row(self, p: int) -> None:
        level = self._sample_level()
        self._node_level.append(level)
        for lev in range(level + 1):
            self._layer(lev).ensure(p + 1)
        if self._entry < 0:
            self._entry, self._entry_level = p, level
            return

        v = self._rows.raw[p]
        cur = self._entry
        t0 = time.perf_counter()
        for lev in range(self._entry_level, level, -1):
            ids, _ = self._greedy(self._layers[lev], cur, v, 1)
            cur = int(ids[0])
        t1 = time.perf_counter()

        cand_t = 0.0
        link_t = 0.0
        for lev in range(min(level, self._entry_level), -1, -1):
            ta = time.perf_counter()
            ids, dists = self._greedy(self._layers[lev], cur, v, self.params.ef_construction)
            tb = time.perf_counter()
            adj = self._layers[lev]
            cap = self._cap(lev)
            sel = self._select(ids, dists, self.params.M)
            adj.set_list(p, sel)
            for s in sel.tolist():
                if not adj.append(s, p):
                    self._prune_to_nearest(adj, s, p, cap)
            cur = int(ids[0])
            tc = time.perf_counter()
            cand_t += tb - ta
            link_t += tc - tb

        if level > self._entry_level:
            self._entry, self._entry_level = p, level
        self.phase_totals["Greedy"] += t1 - t0
        self.phase_totals["Candidate"] += cand_t
        self.phase_totals["Link"] += link_t

    # -- queries ----------------------------------------------------------

    def _layer0_pool(self, query: np.ndarray, entry: int, ef: int):
        """Bottom-layer candidate pool; subclasses may swap the evaluator."""
        return self._greedy(self._layers[0], entry, query, ef)

    def search(self, query: np.ndarray, k: int) -> TopK:
        query = self.check_query(query)
        if self._rows.n == 0:
            return TopK(k=k)
        cur = self._entry
        for lev in range(self._entry_level, 0, -1):
            ids, _ = self._greedy(self._layers[lev], cur, query, 1)
            cur = int(ids[0])
        ids, dists = self._layer0_pool(query, cur, max(self.params.ef_search, k))
        return self._finish(ids, dists, k)
