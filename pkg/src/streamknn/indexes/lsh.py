"""Hash-bucket index: random hyperplane codes or a trained hasher.

Rows land in one bucket per table keyed by a b-bit code.  A search
probes buckets in increasing Hamming distance from the query's code
until enough candidates are gathered (at least ``probe_factor * k``),
then ranks them exactly.  If nearby buckets are empty the expansion
keeps widening, degenerating into a scan of every bucket, so a search
always returns whatever the index holds.

The learned variant replaces the hyperplane code with a hasher trained
during the offline load; buckets, probing, and ranking are unchanged.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import core
from ..core import Metric, TopK, VectorRecord
from ..index_api import DynamicIndex, InsertCost, make_params
from ._store import RowStore
from .learned_hash import HasherTrainingParams, LearnedHasher, train_hasher


@dataclass(slots=True)
class LshParams:
    num_bits: int = 16
    num_tables: int = 1
    probe_factor: int = 4  # gather at least probe_factor * k candidates
    seed: int = 0
    training: dict = field(default_factory=dict)  # learned-variant overrides


class LshIndex(DynamicIndex):
    def __init__(self, metric: Metric, dim: int, params: dict | None = None, learned: bool = False):
        p = make_params(LshParams, params or {})
        if not 1 <= p.num_bits <= 64:
            raise ValueError("num_bits must lie in [1, 64]")
        if p.num_tables < 1:
            raise ValueError("num_tables must be >= 1")
        super().__init__(metric, dim, p)
        self.learned = learned
        self._store = RowStore(dim)
        self._buckets: list[dict[int, list[int]]] = [dict() for _ in range(p.num_tables)]
        self._hashers: list[LearnedHasher] | None = None  # learned variant only
        rng = np.random.default_rng(p.seed)
        # hyperplanes drawn once per table; unused (but kept cheap) when learned
        self._planes = [
            rng.standard_normal((dim, p.num_bits)).astype(np.float64)
            for _ in range(p.num_tables)
        ]
        self._bit_weights = np.uint64(1) << np.arange(p.num_bits, dtype=np.uint64)

    @property
    def count(self) -> int:
        return self._store.n

    # -- codes ----------------------------------------------------------

    def codes_for(self, X: np.ndarray, table: int) -> np.ndarray:
        """b-bit bucket keys for a batch of rows under one table."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.learned:
            return self._hashers[table].code_ints(X)
        bits = (X @ self._planes[table]) > 0.0  # strict: zero projection -> bit 0
        return (bits.astype(np.uint64) * self._bit_weights).sum(axis=1)

    def _file_batch(self, positions: np.ndarray, matrix: np.ndarray) -> None:
        for t in range(self.params.num_tables):
            codes = self.codes_for(matrix, t)
            buckets = self._buckets[t]
            for pos, code in zip(positions.tolist(), codes.tolist()):
                buckets.setdefault(int(code), []).append(pos)

    # -- index api ------------------------------------------------------

    def _load(self, records: list[VectorRecord]) -> None:
        if self.learned:
            if len(records) < 2:
                raise ValueError("the learned hasher needs at least 2 offline rows")
            matrix = core.as_matrix(records)
            overrides = dict(self.params.training)
            overrides.setdefault("seed", self.params.seed)
            base = make_params(HasherTrainingParams, overrides)
            self._hashers = []
            for t in range(self.params.num_tables):
                tp = make_params(HasherTrainingParams, {**overrides, "seed": base.seed + t})
                self._hashers.append(train_hasher(matrix, self.params.num_bits, tp))
        if records:
            positions = self._store.append(records)
            self._file_batch(positions, self._store.rows[positions])

    def insert_batch(self, records: list[VectorRecord]) -> InsertCost:
        self.check_batch(records)
        t0 = time.perf_counter()
        positions = self._store.append(records)
        self._file_batch(positions, self._store.rows[positions])
        return InsertCost(wall_seconds=time.perf_counter() - t0)

    def search(self, query: np.ndarray, k: int) -> TopK:
        query = self.check_query(query)
        if k < 1:
            raise ValueError("k must be >= 1")
        if self._store.n == 0:
            return TopK(k=k)
        need = max(k, self.params.probe_factor * k)
        qcodes = [int(self.codes_for(query, t)[0]) for t in range(self.params.num_tables)]
        # occupied bucket keys per table, ordered by (hamming radius, code)
        ordered = [
            sorted(self._buckets[t], key=lambda c, qc=qcodes[t]: ((c ^ qc).bit_count(), c))
            for t in range(self.params.num_tables)
        ]
        cursors = [0] * self.params.num_tables
        seen: set[int] = set()
        for radius in range(self.params.num_bits + 1):
            for t in range(self.params.num_tables):
                keys, qc, i = ordered[t], qcodes[t], cursors[t]
                while i < len(keys) and (keys[i] ^ qc).bit_count() == radius:
                    seen.update(self._buckets[t][keys[i]])
                    i += 1
                cursors[t] = i
            if len(seen) >= need:
                break
        positions = np.fromiter(sorted(seen), dtype=np.int64, count=len(seen))
        return core.top_k(
            query,
            self._store.rows[positions],
            k,
            self.metric,
            ids=self._store.ids[positions],
        )
