"""Uniform contract every index implementation satisfies.

An index is created empty for a fixed metric and dimensionality, bulk
loaded once before streaming starts (the only place training is allowed
to happen), then fed micro-batches of new rows while answering searches.
Indexes never synchronize internally: the harness is the single writer
and serializes every call.

A registry maps algorithm names to factories so the harness and CLI can
instantiate any implementation from configuration.
"""

from __future__ import annotations

import dataclasses
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .core import DimensionMismatch, Metric, TopK, VectorRecord


@dataclass(slots=True)
class InsertCost:
    """Cost of one insert_batch call.

    ``wall_seconds`` is the measured wall time of the whole call;
    ``phases`` optionally splits it into named sub-phases whose sum never
    exceeds the total (up to timer granularity).
    """

    wall_seconds: float
    phases: dict[str, float] = field(default_factory=dict)


class DynamicIndex(ABC):
    """Base class for all streaming index implementations."""

    def __init__(self, metric: Metric, dim: int, params=None):
        if dim < 1:
            raise ValueError("dimensionality must be >= 1, got %d" % dim)
        self.metric = metric
        self.dim = int(dim)
        self.params = params
        self._loaded = False

    # -- write path ---------------------------------------------------

    def load_initial(self, records: list[VectorRecord]) -> None:
        """Bulk load before the stream starts; trains internal structures.

        May be called at most once, with unique ids.
        """
        if self._loaded:
            raise RuntimeError("load_initial may only be called once")
        self.check_batch(records)
        ids = [r.id for r in records]
        if len(set(ids)) != len(ids):
            raise ValueError("load_initial received duplicate row ids")
        self._loaded = True
        self._load(records)

    @abstractmethod
    def _load(self, records: list[VectorRecord]) -> None:
        ...

    @abstractmethod
    def insert_batch(self, records: list[VectorRecord]) -> InsertCost:
        """Ingest one micro-batch; returns the measured cost."""

    def delete(self, row_id: int) -> bool:
        """Remove a row if this implementation supports deletion."""
        raise NotImplementedError("%s does not support deletes" % type(self).__name__)

    # -- read path ----------------------------------------------------

    @abstractmethod
    def search(self, query: np.ndarray, k: int) -> TopK:
        """Approximate k nearest rows, sorted by (distance, id)."""

    @property
    @abstractmethod
    def count(self) -> int:
        """Number of searchable rows currently held."""

    # -- shared validation --------------------------------------------

    def check_batch(self, records: list[VectorRecord]) -> None:
        """Reject a whole batch before touching index state."""
        for r in records:
            if r.values.shape != (self.dim,):
                raise DimensionMismatch(
                    "row %d has shape %s, index expects (%d,)"
                    % (r.id, r.values.shape, self.dim)
                )

    def check_query(self, query: np.ndarray) -> np.ndarray:
        query = np.ascontiguousarray(query, dtype=np.float32)
        if query.shape != (self.dim,):
            raise DimensionMismatch(
                "query has shape %s, index expects (%d,)" % (query.shape, self.dim)
            )
        return query


# ---------------------------------------------------------------------------
# registry

_REGISTRY: dict[str, type] = {}


def register(name: str, factory) -> None:
    """Register an index factory under a stable algorithm name."""
    _REGISTRY[name] = factory


def available_algorithms() -> list[str]:
    from . import indexes  # noqa: F401  (triggers registration)

    return sorted(_REGISTRY)


def create_index(name: str, metric: Metric, dim: int, params: dict | None = None) -> DynamicIndex:
    """Instantiate a registered algorithm by name.

    ``params`` holds algorithm-specific overrides; unknown keys raise.
    """
    from . import indexes  # noqa: F401  (triggers registration)

    if name not in _REGISTRY:
        raise ValueError(
            "unknown algorithm %r; registered: %s" % (name, ", ".join(sorted(_REGISTRY)))
        )
    return _REGISTRY[name](metric, dim, params or {})


def make_params(cls, overrides: dict):
    """Build a params dataclass from a dict, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(overrides) - names)
    if unknown:
        raise ValueError(
            "unknown parameter(s) %s for %s; accepted: %s"
            % (", ".join(unknown), cls.__name__, ", ".join(sorted(names)))
        )
    return cls(**overrides)


def coerce_params(cls, params):
    """Accept None, a ready dataclass instance, or an override dict."""
    if params is None:
        return cls()
    if isinstance(params, cls):
        return params
    return make_params(cls, params)
