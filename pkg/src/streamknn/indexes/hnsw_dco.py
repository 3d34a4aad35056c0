"""Cheap distance evaluators plugged under the hierarchical graph.

Construction and the upper-layer descent stay exact; only the wide
bottom-layer pool search, where nearly all query-time distance work
happens, swaps in a cheaper evaluator:

* quantized: per-vector uniform codes produced at insert time against a
  centering mean frozen when the offline rows arrive.  The mean is never
  recomputed, so a drifting online stream degrades the approximation;
  that degradation is a measured outcome, not a bug.
* early-stopping: rows are stored rotated; once the pool is full, each
  new candidate is scanned blockwise against the current pool-worst
  radius and dropped as soon as the scaled partial sum proves it cannot
  qualify.

Returned distances are whatever the evaluator computed, so recall against
exact ground truth is always a measurement.  Both variants support the
squared-L2 metric only.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..core import Metric
from ..dco import AdsParams, ads_distance, apply_transform, lvq_encode, orthogonal_transform
from ..index_api import coerce_params
from .graph_base import AdjacencyStore
from .hnsw import HnswIndex, HnswParams


def pool_search(adj: AdjacencyStore, entry: int, ef: int, evaluate):
    """Best-first bounded search with a pluggable distance evaluator.

    Follows the exact kernel's traversal rules: expansion order and the
    result pool are both keyed by (distance, id), a full pool rejects
    candidates that cannot beat its worst member, and the walk stops when
    the frontier's best entry is worse than that pool-worst.

    ``evaluate(pos, bound)`` returns the squared distance of one stored
    position, or None when ``bound`` (the pool-worst distance once the
    pool is full, None while it is filling) lets it prove the node cannot
    qualify.
    """
    ef = max(int(ef), 1)
    entry = int(entry)
    d0 = evaluate(entry, None)
    visited = {entry}
    frontier = [(d0, entry)]
    pool = [(-d0, -entry)]  # max-heap of (-distance, -id)

    while frontier:
        d, node = heapq.heappop(frontier)
        if len(pool) >= ef and (d, node) > (-pool[0][0], -pool[0][1]):
            break
        for nb in adj.neighbors(node).tolist():
            if nb in visited:
                continue
            visited.add(nb)
            full = len(pool) >= ef
            dd = evaluate(nb, -pool[0][0] if full else None)
            if dd is None:
                continue
            if full and (dd, nb) > (-pool[0][0], -pool[0][1]):
                continue
            heapq.heappush(frontier, (dd, nb))
            heapq.heappush(pool, (-dd, -nb))
            if len(pool) > ef:
                heapq.heappop(pool)

    out = sorted((-d, -i) for d, i in pool)
    ids = np.fromiter((i for _, i in out), dtype=np.int64, count=len(out))
    dists = np.fromiter((d for d, _ in out), dtype=np.float64, count=len(out))
    return ids, dists


def _grown(arr: np.ndarray, n: int) -> np.ndarray:
    """Return ``arr`` or a doubled-capacity copy that fits ``n`` rows."""
    cap = len(arr)
    if n <= cap:
        return arr
    while cap < n:
        cap *= 2
    out = np.zeros((cap,) + arr.shape[1:], dtype=arr.dtype)
    out[: len(arr)] = arr
    return out


# ---------------------------------------------------------------------------
# quantized bottom layer


@dataclass
class HnswLvqParams(HnswParams):
    bits: int = 8

    def __post_init__(self) -> None:
        super().__post_init__()
        if not 1 <= self.bits <= 16:
            raise ValueError("bits must be in [1, 16], got %d" % self.bits)


class HnswLvqIndex(HnswIndex):
    """Hierarchical graph whose bottom-layer search reads quantized rows."""

    def __init__(self, metric: Metric, dim: int, params: HnswLvqParams | dict | None = None):
        p = coerce_params(HnswLvqParams, params)
        if metric is not Metric.SQUARED_L2:
            raise ValueError("quantized search supports the squared-L2 metric only")
        super().__init__(metric, dim, p)
        self._mean: np.ndarray | None = None
        self._vmin = np.zeros(1024, dtype=np.float64)
        self._delta = np.zeros(1024, dtype=np.float64)
        self._codes = np.zeros(
            (1024, dim), dtype=np.uint8 if p.bits <= 8 else np.uint16
        )

    def _set_mean(self, records) -> None:
        self._mean = np.stack([r.values for r in records]).astype(np.float64).mean(axis=0)

    def _load(self, records) -> None:
        self._set_mean(records)
        super()._load(records)

    def insert_batch(self, records):
        if self._mean is None and records:
            # no offline phase happened; the first batch fixes the center
            self.check_batch(records)
            self._set_mean(records)
        return super().insert_batch(records)

    def _insert_row(self, p: int) -> None:
        code = lvq_encode(self._rows.raw[p], self._mean, self.params.bits)
        self._vmin = _grown(self._vmin, p + 1)
        self._delta = _grown(self._delta, p + 1)
        self._codes = _grown(self._codes, p + 1)
        self._vmin[p] = code.vmin
        self._delta[p] = code.delta
        self._codes[p] = code.codes
        super()._insert_row(p)

    def _layer0_pool(self, query: np.ndarray, entry: int, ef: int):
        qc = np.asarray(query, dtype=np.float64) - self._mean
        vmin, delta, codes = self._vmin, self._delta, self._codes

        def evaluate(pos, bound):
            diff = qc - (vmin[pos] + codes[pos].astype(np.float64) * delta[pos])
            return float(diff @ diff)

        return pool_search(self._layers[0], entry, ef, evaluate)


# ---------------------------------------------------------------------------
# early-stopping bottom layer


@dataclass
class HnswAdsParams(HnswParams):
    epsilon0: float = 2.1
    block: int = 32
    transform_seed: int = 0

    def __post_init__(self) -> None:
        super().__post_init__()
        # reuse the rule validation; values live on this dataclass
        AdsParams(epsilon0=self.epsilon0, block=self.block)


class HnswAdsIndex(HnswIndex):
    """Hierarchical graph whose bottom-layer search rejects candidates early.

    Rows are stored rotated by a seeded orthogonal matrix alongside the
    raw copies the construction uses.  Distances returned to callers are
    the rotated-space values, equal to the true squared L2 up to the
    rotation's round-off.
    """

    def __init__(self, metric: Metric, dim: int, params: HnswAdsParams | dict | None = None):
        p = coerce_params(HnswAdsParams, params)
        if metric is not Metric.SQUARED_L2:
            raise ValueError("early-stopping search supports the squared-L2 metric only")
        super().__init__(metric, dim, p)
        self._transform = orthogonal_transform(dim, p.transform_seed)
        self._ads = AdsParams(epsilon0=p.epsilon0, block=p.block)
        self._rotated = np.zeros((1024, dim), dtype=np.float64)

    def _insert_row(self, p: int) -> None:
        self._rotated = _grown(self._rotated, p + 1)
        self._rotated[p] = apply_transform(self._transform, self._rows.raw[p])
        super()._insert_row(p)

    def _layer0_pool(self, query: np.ndarray, entry: int, ef: int):
        qt = apply_transform(self._transform, query)
        rotated = self._rotated
        ads = self._ads

        def evaluate(pos, bound):
            if bound is None:
                diff = rotated[pos] - qt
                return float(diff @ diff)
            dist, _ = ads_distance(qt, rotated[pos], math.sqrt(bound), ads)
            return dist

        return pool_search(self._layers[0], entry, ef, evaluate)
