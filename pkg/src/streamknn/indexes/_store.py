"""Shared append-only row storage used by the index implementations."""

from __future__ import annotations

import numpy as np

from ..core import VectorRecord


class RowStore:
    """Contiguous float32 rows plus original ids; doubling growth.

    Rows are addressed by dense position (arrival order); positions are
    what the index structures reference internally, while search results
    translate back to the original ids.
    """

    __slots__ = ("dim", "_rows", "_ids", "_n", "_growth")

    def __init__(self, dim: int, capacity: int = 1024, growth: float = 2.0):
        if growth <= 1.0:
            raise ValueError("growth factor must exceed 1.0")
        self.dim = int(dim)
        self._growth = float(growth)
        cap = max(int(capacity), 1)
        self._rows = np.empty((cap, self.dim), dtype=np.float32)
        self._ids = np.empty(cap, dtype=np.int64)
        self._n = 0

    @property
    def n(self) -> int:
        return self._n

    @property
    def rows(self) -> np.ndarray:
        return self._rows[: self._n]

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: self._n]

    @property
    def raw(self) -> np.ndarray:
        """Whole backing buffer (valid rows first); for kernel calls that
        index by position."""
        return self._rows

    def _ensure(self, extra: int) -> None:
        need = self._n + extra
        cap = self._rows.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap = max(int(cap * self._growth), cap + 1)
        rows = np.empty((cap, self.dim), dtype=np.float32)
        ids = np.empty(cap, dtype=np.int64)
        rows[: self._n] = self._rows[: self._n]
        ids[: self._n] = self._ids[: self._n]
        self._rows, self._ids = rows, ids

    def append(self, records: list[VectorRecord]) -> np.ndarray:
        """Append records, returning their new positions."""
        self._ensure(len(records))
        start = self._n
        for r in records:
            self._rows[self._n] = r.values
            self._ids[self._n] = r.id
            self._n += 1
        return np.arange(start, self._n, dtype=np.int64)
