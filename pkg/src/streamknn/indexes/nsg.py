"""Navigation-point graph with occlusion-pruned edges.

Every search and every insert starts from one fixed navigation point (the
first offline row).  Neighbor selection walks candidates in (distance, id)
order and keeps a candidate only if no already-kept neighbor occludes it,
i.e. no kept s has distance(c, s) < distance(c, v).  Reverse links that
overflow the degree cap re-run the same rule from the overflowing node's
point of view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..core import Metric, TopK
from ..index_api import coerce_params
from .graph_base import AdjacencyStore, GraphIndex


@dataclass
class NsgParams:
    L: int = 64  # construction pool width
    R: int = 24  # degree cap
    ef_search: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.L < 1 or self.R < 1:
            raise ValueError("L and R must be >= 1")


class NsgIndex(GraphIndex):
    def __init__(self, metric: Metric, dim: int, params: NsgParams | dict | None = None):
        p = coerce_params(NsgParams, params)
        super().__init__(metric, dim, p)
        self._adj = AdjacencyStore(p.R)

    def _occlusion_select(
        self, center: np.ndarray, cand: np.ndarray, cand_d: np.ndarray, budget: int
    ) -> np.ndarray:
        """Keep candidates no kept neighbor occludes, in (d, id) order."""
        chosen: list[int] = []
        for c, dc in zip(cand.tolist(), cand_d.tolist()):
            if len(chosen) == budget:
                break
            occluded = False
            for s in chosen:
                if (
                    kernels.dist_point(self._rows.raw[c], self._rows.raw[s], self.metric.code)
                    < dc
                ):
                    occluded = True
                    break
            if not occluded:
                chosen.append(c)
        return np.asarray(chosen, dtype=np.int64)

    def _insert_row(self, p: int) -> None:
        self._adj.ensure(p + 1)
        if p == 0:
            return  # the navigation point itself
        v = self._rows.raw[p]
        ids, dists = self._greedy(self._adj, 0, v, self.params.L)
        sel = self._occlusion_select(v, ids, dists, self.params.R)
        self._adj.set_list(p, sel)
        for s in sel.tolist():
            if not self._adj.append(s, p):
                cand = np.append(self._adj.neighbors(s), np.int32(p)).astype(np.int64)
                cd = kernels.dist_subset(
                    self._rows.raw[s], self._rows.raw, cand, self.metric.code
                )
                order = np.lexsort((cand, cd))
                keep = self._occlusion_select(
                    self._rows.raw[s], cand[order], cd[order], self.params.R
                )
                self._adj.set_list(s, keep)

    def search(self, query: np.ndarray, k: int) -> TopK:
        query = self.check_query(query)
        if self._rows.n == 0:
            return TopK(k=k)
        ids, dists = self._greedy(self._adj, 0, query, max(self.params.ef_search, k))
        return self._finish(ids, dists, k)
