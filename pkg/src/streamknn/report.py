"""Machine-readable run reports and plot-ready summary tables.

A run produces one ``RunReport``: the resolved configuration, the scored
query phase, per-batch insert costs, and (in wall mode) the insert phase
breakdown.  Reports serialize to canonical JSON: keys sorted, floats
rendered to six significant digits, NaN and infinity rejected.  After one
render the emit/parse pair is a fixed point, so identical virtual-clock
runs yield byte-identical files.

``summarize`` folds many reports into a small table (one row per group)
whose CSV form has a fixed column set; means are computed with a sorted
compensated sum so the table is invariant under input permutation.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .harness import Clock, QueryReport, StreamResult

SCHEMA = "stream-bench/run-report/v1"
SUMMARY_SCHEMA = "stream-bench/summary/v1"

CSV_COLUMNS = (
    "group",
    "recall_at_k",
    "query_latency_s",
    "pending_write_latency_s",
    "vector_search_latency_s",
    "drop_ratio",
)


@dataclass
class RunReport:
    """Everything one benchmark run produced."""

    config: dict
    algorithm: str
    clock: str
    backend: str
    recall_at_k: float
    query_latency_s: float
    pending_write_latency_s: float
    vector_search_latency_s: float
    rows_emitted: int
    rows_ingested: int
    rows_dropped: int
    drop_ratio: float
    peak_rows: int
    batch_sizes: list[int] = field(default_factory=list)
    batch_costs: list[float] = field(default_factory=list)
    phase_totals: dict[str, float] = field(default_factory=dict)
    schema: str = SCHEMA

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SummaryTable:
    """Per-group aggregation of many reports; rows already sorted."""

    group_by: str
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SUMMARY_SCHEMA,
            "group_by": self.group_by,
            "columns": list(CSV_COLUMNS),
            "rows": self.rows,
        }


def build_report(
    config: dict,
    algorithm: str,
    clock: Clock | str,
    stream: StreamResult,
    query: QueryReport,
    offline_rows: int,
) -> RunReport:
    """Assemble a RunReport from the harness outputs.

    Phase totals are wall-clock measurements taken inside insert_batch,
    so they are kept only for wall-mode runs; a virtual report must
    contain nothing measured, or identical runs would stop being
    byte-identical.
    """
    clock = Clock.parse(clock.value if isinstance(clock, Clock) else clock)
    emitted = query.rows_emitted
    return RunReport(
        config=config,
        algorithm=str(algorithm),
        clock=clock.value,
        backend=kernels.BACKEND,
        recall_at_k=float(query.recall_at_k),
        query_latency_s=float(query.query_latency_s),
        pending_write_latency_s=float(query.pending_write_latency_s),
        vector_search_latency_s=float(query.vector_search_latency_s),
        rows_emitted=int(emitted),
        rows_ingested=int(query.rows_ingested),
        rows_dropped=int(query.rows_dropped),
        drop_ratio=query.rows_dropped / emitted if emitted else 0.0,
        peak_rows=int(offline_rows) + int(stream.rows_ingested),
        batch_sizes=[int(b) for b in stream.batch_sizes],
        batch_costs=[float(c) for c in stream.batch_costs],
        phase_totals=(
            {str(k): float(v) for k, v in stream.phase_totals.items()}
            if clock is Clock.WALL
            else {}
        ),
    )


# ---------------------------------------------------------------------------
# canonical JSON


def _rounded(value, path: str):
    """Copy a JSON-able structure, rounding floats to 6 significant digits."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise ValueError("non-finite value at %s: %r" % (path, v))
        return float("%.6g" % v)
    if isinstance(value, (list, tuple)):
        return [_rounded(v, "%s[%d]" % (path, i)) for i, v in enumerate(value)]
    if isinstance(value, dict):
        out = {}
        for k, v in value.items():
            if not isinstance(k, str):
                raise ValueError("non-string key at %s: %r" % (path, k))
            out[k] = _rounded(v, "%s.%s" % (path, k))
        return out
    raise ValueError("unserializable value at %s: %r" % (path, value))


def _canonical_json(doc: dict) -> bytes:
    rounded = {k: _rounded(v, k) for k, v in doc.items()}
    return (
        json.dumps(rounded, sort_keys=True, indent=2, allow_nan=False) + "\n"
    ).encode("utf-8")


def emit(obj: RunReport | SummaryTable, fmt: str) -> bytes:
    """Serialize a report or summary table to canonical json or csv."""
    if fmt == "json":
        return _canonical_json(obj.to_dict())
    if fmt == "csv":
        if isinstance(obj, RunReport):
            obj = summarize([obj], group_by="algorithm")
        return _table_csv(obj)
    raise ValueError("format must be 'json' or 'csv', got %r" % (fmt,))


def _table_csv(table: SummaryTable) -> bytes:
    lines = [",".join(CSV_COLUMNS)]
    for row in table.rows:
        group = str(row["group"])
        if "," in group or "\n" in group or '"' in group:
            raise ValueError("group value %r would need comma/quote escaping" % group)
        cells = [group]
        for col in CSV_COLUMNS[1:]:
            cells.append("%.6g" % float(row[col]))
        lines.append(",".join(cells))
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# parsing


_INT_FIELDS = ("rows_emitted", "rows_ingested", "rows_dropped", "peak_rows")
_FLOAT_FIELDS = (
    "recall_at_k",
    "query_latency_s",
    "pending_write_latency_s",
    "vector_search_latency_s",
    "drop_ratio",
)


def parse_report(data: bytes | str) -> RunReport:
    """Parse and re-validate a serialized RunReport."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    if not isinstance(doc, dict):
        raise ValueError("report must be a JSON object")
    if doc.get("schema") != SCHEMA:
        raise ValueError("unknown report schema %r, expected %r" % (doc.get("schema"), SCHEMA))

    names = {f.name for f in dataclasses.fields(RunReport)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ValueError("unknown report field(s): %s" % ", ".join(unknown))
    missing = sorted(names - set(doc))
    if missing:
        raise ValueError("missing report field(s): %s" % ", ".join(missing))

    kw = dict(doc)
    for name in _INT_FIELDS:
        value = kw[name]
        if value != int(value):
            raise ValueError("%s must be an integer, got %r" % (name, value))
        kw[name] = int(value)
    for name in _FLOAT_FIELDS:
        kw[name] = float(kw[name])
    kw["batch_sizes"] = [int(b) for b in kw["batch_sizes"]]
    kw["batch_costs"] = [float(c) for c in kw["batch_costs"]]
    kw["phase_totals"] = {str(k): float(v) for k, v in kw["phase_totals"].items()}
    report = RunReport(**kw)

    if min(report.rows_emitted, report.rows_ingested, report.rows_dropped) < 0:
        raise ValueError("row counts must be non-negative")
    if report.rows_emitted != report.rows_ingested + report.rows_dropped:
        raise ValueError(
            "conservation violated: emitted %d != ingested %d + dropped %d"
            % (report.rows_emitted, report.rows_ingested, report.rows_dropped)
        )
    if report.rows_emitted:
        expect = report.rows_dropped / report.rows_emitted
        if abs(report.drop_ratio - expect) > 5e-6 + 1e-6 * expect:
            raise ValueError(
                "drop_ratio %.8g inconsistent with counts (expected %.8g)"
                % (report.drop_ratio, expect)
            )
    return report


# ---------------------------------------------------------------------------
# summaries


def _mean(values: list[float]) -> float:
    if not values:
        return 0.0
    return math.fsum(sorted(values)) / len(values)


def _group_value(report: RunReport, key: str):
    if key in ("algorithm", "clock", "backend"):
        return getattr(report, key)
    path = key.split(".")
    if path[0] == "config":
        node = report.config
        for part in path[1:]:
            if not isinstance(node, dict) or part not in node:
                raise ValueError(
                    "group key %r not found in report config (failed at %r)" % (key, part)
                )
            node = node[part]
        return node
    raise ValueError(
        "group key must be 'algorithm', 'clock', 'backend' or 'config.<path>', got %r" % key
    )


def _row_order(row: dict):
    group = row["group"]
    try:
        return (0, float(group), group)
    except ValueError:
        return (1, 0.0, group)


def summarize(reports: list[RunReport], group_by: str = "algorithm") -> SummaryTable:
    """One row per group: mean recall and latencies, pooled drop ratio."""
    groups: dict[str, list[RunReport]] = {}
    for rep in reports:
        groups.setdefault(str(_group_value(rep, group_by)), []).append(rep)

    rows = []
    for group, members in groups.items():
        emitted = sum(r.rows_emitted for r in members)
        dropped = sum(r.rows_dropped for r in members)
        rows.append(
            {
                "group": group,
                "recall_at_k": _mean([r.recall_at_k for r in members]),
                "query_latency_s": _mean([r.query_latency_s for r in members]),
                "pending_write_latency_s": _mean(
                    [r.pending_write_latency_s for r in members]
                ),
                "vector_search_latency_s": _mean(
                    [r.vector_search_latency_s for r in members]
                ),
                "drop_ratio": dropped / emitted if emitted else 0.0,
            }
        )
    rows.sort(key=_row_order)
    return SummaryTable(group_by=group_by, rows=rows)
