"""Run configuration: a YAML mapping parsed into validated dataclasses.

Key names are normative so configuration files stay portable; unknown or
mistyped keys raise ``ConfigError`` with the full dotted key path.  The
documented defaults (50K offline rows, 50K online rows, 4K rows/second,
4K-row micro-batches, 100 queries at k=10) apply whenever a key is
omitted.

``resolved_dict`` renders a parsed configuration, defaults included, as
the plain mapping echoed inside every report, which is also what summary
tables group on.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .core import Metric
from .datagen import DriftSpec
from .harness import AdmissionPolicy, Clock, StreamSpec, VirtualCost
from .index_api import available_algorithms

_TOP_KEYS = {
    "dataset",
    "offline_rows",
    "online_rows",
    "algorithm",
    "metric",
    "stream",
    "clock",
    "virtual_cost",
    "normalize",
    "queries",
    "output",
    "seed",
}


class ConfigError(ValueError):
    """A configuration problem; the message names the offending key."""


@dataclass
class DatasetSpec:
    kind: str  # random | drift | file
    n: int = 0
    d: int = 0
    path: str | None = None
    drift: DriftSpec | None = None


@dataclass
class QuerySpec:
    count: int = 100
    k: int = 10
    seed: int = 1
    file: str | None = None


@dataclass
class RunConfig:
    dataset: DatasetSpec
    algorithm: str
    params: dict
    metric: Metric
    offline_rows: int
    online_rows: int
    stream: StreamSpec
    clock: Clock
    cost: VirtualCost | None
    normalize: bool
    queries: QuerySpec
    output: str | None
    seed: int


# ---------------------------------------------------------------------------
# typed fetch helpers; every failure names the dotted key path


def _where(prefix: str, key: str) -> str:
    return "%s.%s" % (prefix, key) if prefix else key


def _reject_unknown(section: dict, prefix: str, allowed: set[str]) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(
            "unknown config key(s) %s (accepted: %s)"
            % (
                ", ".join(_where(prefix, k) for k in unknown),
                ", ".join(sorted(allowed)),
            )
        )


def _mapping(doc: dict, prefix: str, key: str, default=None) -> dict | None:
    value = doc.get(key, default)
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError("%s must be a mapping" % _where(prefix, key))
    return value


def _int(doc: dict, prefix: str, key: str, default: int | None, lo: int | None = None) -> int:
    value = doc.get(key, default)
    if value is None:
        raise ConfigError("%s is required" % _where(prefix, key))
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("%s must be an integer, got %r" % (_where(prefix, key), value))
    if lo is not None and value < lo:
        raise ConfigError("%s must be >= %d, got %d" % (_where(prefix, key), lo, value))
    return int(value)


def _float(doc: dict, prefix: str, key: str, default: float, lo: float | None = None) -> float:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("%s must be a number, got %r" % (_where(prefix, key), value))
    if lo is not None and value < lo:
        raise ConfigError("%s must be >= %g, got %r" % (_where(prefix, key), lo, value))
    return float(value)


def _str(doc: dict, prefix: str, key: str, default: str | None = None, required: bool = False) -> str | None:
    value = doc.get(key, default)
    if value is None:
        if required:
            raise ConfigError("%s is required" % _where(prefix, key))
        return None
    if not isinstance(value, str):
        raise ConfigError("%s must be a string, got %r" % (_where(prefix, key), value))
    return value


def _bool(doc: dict, prefix: str, key: str, default: bool) -> bool:
    value = doc.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError("%s must be true or false, got %r" % (_where(prefix, key), value))
    return value


# ---------------------------------------------------------------------------
# section parsers


def _parse_dataset(section: dict | None, seed: int) -> DatasetSpec:
    if not section:
        raise ConfigError("dataset must name exactly one of: random, drift, file")
    _reject_unknown(section, "dataset", {"random", "drift", "file"})
    present = [k for k in ("random", "drift", "file") if section.get(k) is not None]
    if len(present) != 1:
        raise ConfigError(
            "dataset must name exactly one of random, drift, file; got %s"
            % (", ".join(present) or "none")
        )
    kind = present[0]
    if kind == "random":
        sub = _mapping(section, "dataset", "random")
        _reject_unknown(sub, "dataset.random", {"n", "d"})
        n = _int(sub, "dataset.random", "n", None, lo=0)
        d = _int(sub, "dataset.random", "d", None, lo=1)
        return DatasetSpec(kind="random", n=n, d=d)
    if kind == "drift":
        sub = _mapping(section, "dataset", "drift")
        _reject_unknown(
            sub, "dataset.drift", {"n", "d", "position", "contamination", "shift", "seed"}
        )
        try:
            spec = DriftSpec(
                n=_int(sub, "dataset.drift", "n", None, lo=0),
                d=_int(sub, "dataset.drift", "d", None, lo=1),
                position=_int(sub, "dataset.drift", "position", None, lo=0),
                contamination=_float(sub, "dataset.drift", "contamination", None),
                shift=_float(sub, "dataset.drift", "shift", 8.0),
                seed=_int(sub, "dataset.drift", "seed", seed),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("dataset.drift: %s" % exc) from exc
        return DatasetSpec(kind="drift", n=spec.n, d=spec.d, drift=spec)
    path = _str(section, "dataset", "file", required=True)
    return DatasetSpec(kind="file", path=path)


def _parse_stream(section: dict | None) -> StreamSpec:
    section = section or {}
    _reject_unknown(section, "stream", {"rate", "micro_batch", "buffer_capacity", "policy"})
    rate = _float(section, "stream", "rate", 4000.0)
    if rate <= 0:
        raise ConfigError("stream.rate must be positive, got %r" % rate)
    micro_batch = _int(section, "stream", "micro_batch", 4000, lo=1)
    buffer_capacity = _int(section, "stream", "buffer_capacity", micro_batch, lo=1)
    policy_name = _str(section, "stream", "policy", "drop_on_congestion")
    try:
        policy = AdmissionPolicy.parse(policy_name)
    except ValueError as exc:
        raise ConfigError("stream.policy: %s" % exc) from exc
    return StreamSpec(
        rate=rate, micro_batch=micro_batch, buffer_capacity=buffer_capacity, policy=policy
    )


def _parse_cost(section: dict | None, clock: Clock) -> VirtualCost | None:
    if section is None:
        return VirtualCost() if clock is Clock.VIRTUAL else None
    _reject_unknown(
        section,
        "virtual_cost",
        {"insert_row_seconds", "insert_batch_overhead", "search_query_seconds", "replay"},
    )
    replay = section.get("replay")
    if replay is not None:
        if not isinstance(replay, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in replay
        ):
            raise ConfigError("virtual_cost.replay must be a list of numbers")
        replay = [float(v) for v in replay]
    return VirtualCost(
        insert_row_seconds=_float(section, "virtual_cost", "insert_row_seconds", 0.0, lo=0.0),
        insert_batch_overhead=_float(
            section, "virtual_cost", "insert_batch_overhead", 0.0, lo=0.0
        ),
        search_query_seconds=_float(
            section, "virtual_cost", "search_query_seconds", 0.0, lo=0.0
        ),
        replay=replay,
    )


def _parse_queries(section: dict | None, seed: int) -> QuerySpec:
    section = section or {}
    _reject_unknown(section, "queries", {"count", "k", "seed", "file"})
    return QuerySpec(
        count=_int(section, "queries", "count", 100, lo=1),
        k=_int(section, "queries", "k", 10, lo=1),
        seed=_int(section, "queries", "seed", seed + 1),
        file=_str(section, "queries", "file"),
    )


def config_from_dict(doc) -> RunConfig:
    """Parse and validate one configuration mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(doc, "", _TOP_KEYS)

    seed = _int(doc, "", "seed", 0)
    dataset = _parse_dataset(_mapping(doc, "", "dataset"), seed)

    offline_rows = _int(doc, "", "offline_rows", 50_000, lo=0)
    online_rows = _int(doc, "", "online_rows", 50_000, lo=0)
    if dataset.kind in ("random", "drift") and offline_rows + online_rows > dataset.n:
        raise ConfigError(
            "offline_rows + online_rows = %d exceeds dataset rows = %d"
            % (offline_rows + online_rows, dataset.n)
        )

    algo = _mapping(doc, "", "algorithm")
    if not algo:
        raise ConfigError("algorithm is required")
    _reject_unknown(algo, "algorithm", {"name", "params"})
    name = _str(algo, "algorithm", "name", required=True)
    registered = available_algorithms()
    if name not in registered:
        raise ConfigError(
            "algorithm.name %r is not registered; registered: %s"
            % (name, ", ".join(registered))
        )
    params = _mapping(algo, "algorithm", "params", {}) or {}

    try:
        metric = Metric.parse(_str(doc, "", "metric", "squared_l2"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("metric: %s" % exc) from exc

    stream = _parse_stream(_mapping(doc, "", "stream"))

    try:
        clock = Clock.parse(_str(doc, "", "clock", "wall"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("clock: %s" % exc) from exc

    return RunConfig(
        dataset=dataset,
        algorithm=name,
        params=dict(params),
        metric=metric,
        offline_rows=offline_rows,
        online_rows=online_rows,
        stream=stream,
        clock=clock,
        cost=_parse_cost(_mapping(doc, "", "virtual_cost"), clock),
        normalize=_bool(doc, "", "normalize", True),
        queries=_parse_queries(_mapping(doc, "", "queries"), seed),
        output=_str(doc, "", "output"),
        seed=seed,
    )


def load_config(path: str) -> RunConfig:
    """Read and validate a YAML configuration file."""
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("%s: %s" % (path, exc)) from exc
    if not isinstance(doc, dict):
        raise ConfigError("%s: config root must be a mapping" % path)
    return config_from_dict(doc)


def resolved_dict(cfg: RunConfig) -> dict:
    """The fully-resolved configuration echo embedded in reports."""
    if cfg.dataset.kind == "random":
        dataset = {"kind": "random", "n": cfg.dataset.n, "d": cfg.dataset.d}
    elif cfg.dataset.kind == "drift":
        spec = cfg.dataset.drift
        dataset = {
            "kind": "drift",
            "n": spec.n,
            "d": spec.d,
            "position": spec.position,
            "contamination": spec.contamination,
            "shift": spec.shift,
            "seed": spec.seed,
        }
    else:
        dataset = {"kind": "file", "path": cfg.dataset.path}
    cost = None
    if cfg.cost is not None:
        cost = {
            "insert_row_seconds": cfg.cost.insert_row_seconds,
            "insert_batch_overhead": cfg.cost.insert_batch_overhead,
            "search_query_seconds": cfg.cost.search_query_seconds,
            "replay": cfg.cost.replay,
        }
    return {
        "dataset": dataset,
        "offline_rows": cfg.offline_rows,
        "online_rows": cfg.online_rows,
        "algorithm": {"name": cfg.algorithm, "params": dict(cfg.params)},
        "metric": cfg.metric.value,
        "stream": {
            "rate": cfg.stream.rate,
            "micro_batch": cfg.stream.micro_batch,
            "buffer_capacity": cfg.stream.buffer_capacity,
            "policy": cfg.stream.policy.value,
        },
        "clock": cfg.clock.value,
        "virtual_cost": cost,
        "normalize": cfg.normalize,
        "queries": {
            "count": cfg.queries.count,
            "k": cfg.queries.k,
            "seed": cfg.queries.seed,
            "file": cfg.queries.file,
        },
        "output": cfg.output,
        "seed": cfg.seed,
    }


def set_by_path(doc: dict, path: str, value) -> None:
    """Assign ``value`` at a dotted key path, creating sections as needed."""
    parts = path.split(".")
    if not all(parts):
        raise ConfigError("invalid key path %r" % path)
    node = doc
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = node[part] = {}
        elif not isinstance(nxt, dict):
            raise ConfigError("key path %r crosses a non-mapping value" % path)
        node = nxt
    node[parts[-1]] = value
