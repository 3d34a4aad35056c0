"""Exact brute-force index over a contiguous, doubling buffer.

This is the accuracy baseline: every search scans all stored rows, so
recall is 1.0 whenever nothing was dropped upstream.  It is also the
reference engine used to sanity-check the approximate implementations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import core
from ..core import Metric, TopK, VectorRecord
from ..index_api import DynamicIndex, InsertCost, make_params
from ._store import RowStore


@dataclass(slots=True)
class FlatParams:
    initial_capacity: int = 1024
    growth_factor: float = 2.0  # buffer grows geometrically; amortized O(1) appends


class FlatIndex(DynamicIndex):
    def __init__(self, metric: Metric, dim: int, params: dict | None = None):
        p = make_params(FlatParams, params or {})
        super().__init__(metric, dim, p)
        self._store = RowStore(dim, capacity=p.initial_capacity, growth=p.growth_factor)

    @property
    def count(self) -> int:
        return self._store.n

    def _load(self, records: list[VectorRecord]) -> None:
        self._store.append(records)

    def insert_batch(self, records: list[VectorRecord]) -> InsertCost:
        self.check_batch(records)
        t0 = time.perf_counter()
        self._store.append(records)
        return InsertCost(wall_seconds=time.perf_counter() - t0)

    def search(self, query: np.ndarray, k: int) -> TopK:
        query = self.check_query(query)
        return core.top_k(query, self._store.rows, k, self.metric, ids=self._store.ids)
