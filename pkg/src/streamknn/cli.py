"""Benchmark driver and command line.

``execute`` turns one validated configuration into a scored report:
build the workload, load the offline portion, stream the online rows
through the admission buffer, then answer held-out queries at the end
of the stream and score them against exact ground truth computed over
every emitted row — including rows the admission policy dropped.

``main`` wraps that in two subcommands: ``run`` (one configuration, one
canonical JSON report) and ``sweep`` (one configuration re-run across
several values of a single dotted key, plus a grouped summary table).
"""

from __future__ import annotations

import argparse
import copy
import os
import re
import sys

import numpy as np
import yaml

from .config import ConfigError, RunConfig, config_from_dict, resolved_dict, set_by_path
from .core import make_records, normalize_dataset
from .datagen import drift_matrix, load_fvecs, load_raw, sample_drift_queries
from .datagen import gen_random
from .harness import StreamResult, compute_ground_truth, run_query_phase, run_stream, write_trace
from .index_api import create_index
from .report import RunReport, build_report, emit, summarize


def _load_matrix(path: str) -> np.ndarray:
    if path.endswith(".fvecs"):
        return load_fvecs(path)
    return load_raw(path)


def _build_rows(cfg: RunConfig) -> np.ndarray:
    """All rows the run will emit (offline then online), raw scale."""
    used = cfg.offline_rows + cfg.online_rows
    if cfg.dataset.kind == "random":
        return gen_random(cfg.dataset.n, cfg.dataset.d, cfg.seed)[:used]
    if cfg.dataset.kind == "drift":
        rows, _labels = drift_matrix(cfg.dataset.drift)
        return rows[:used]
    rows = _load_matrix(cfg.dataset.path)
    if used > rows.shape[0]:
        raise ConfigError(
            "dataset file %s has %d rows; offline_rows + online_rows = %d"
            % (cfg.dataset.path, rows.shape[0], used)
        )
    return rows[:used]


def _build_queries(cfg: RunConfig, dim: int) -> np.ndarray:
    """The held-out query batch, raw scale."""
    q = cfg.queries
    if cfg.dataset.kind == "random":
        return gen_random(q.count, dim, q.seed)
    if cfg.dataset.kind == "drift":
        return sample_drift_queries(cfg.dataset.drift, q.count, q.seed)
    if q.file is not None:
        queries = _load_matrix(q.file)
        if queries.shape[0] < q.count:
            raise ConfigError(
                "queries.file %s has %d rows, need %d" % (q.file, queries.shape[0], q.count)
            )
        return queries[: q.count]
    # no query file: reserve the tail of the data file, after the used rows
    rows = _load_matrix(cfg.dataset.path)
    used = cfg.offline_rows + cfg.online_rows
    if used + q.count > rows.shape[0]:
        raise ConfigError(
            "dataset file %s has %d rows; %d are streamed, leaving no %d held-out query rows"
            % (cfg.dataset.path, rows.shape[0], used, q.count)
        )
    return rows[used : used + q.count]


def execute(cfg: RunConfig, keep_trace: bool = False) -> tuple[RunReport, StreamResult]:
    """Run one configuration end to end and score it."""
    rows = _build_rows(cfg)
    dim = int(rows.shape[1]) if rows.ndim == 2 else cfg.dataset.d
    queries = _build_queries(cfg, dim)
    if queries.ndim != 2 or queries.shape[1] != dim:
        raise ConfigError(
            "query dimensionality %s does not match dataset dimensionality %d"
            % (queries.shape[1] if queries.ndim == 2 else queries.shape, dim)
        )

    if cfg.normalize and rows.size:
        peak = float(np.max(np.abs(rows)))
        rows = normalize_dataset(rows)
        if peak > 0.0:
            # same scale factor, so queries and rows stay in one space
            queries = (queries / np.float32(peak)).astype(np.float32, copy=False)
    queries = np.ascontiguousarray(queries, dtype=np.float32)

    index = create_index(cfg.algorithm, cfg.metric, dim, cfg.params)
    off = cfg.offline_rows
    if off:
        index.load_initial(make_records(rows[:off]))
    online = make_records(rows[off:], start_id=off)

    stream = run_stream(
        index, online, cfg.stream, clock=cfg.clock, cost=cfg.cost, keep_trace=keep_trace
    )
    truth = compute_ground_truth(
        rows, np.arange(rows.shape[0], dtype=np.int64), queries, cfg.queries.k, cfg.metric
    )
    query = run_query_phase(
        index, queries, cfg.queries.k, truth, stream, clock=cfg.clock, cost=cfg.cost
    )
    report = build_report(resolved_dict(cfg), cfg.algorithm, cfg.clock, stream, query, off)
    return report, stream


# ---------------------------------------------------------------------------
# command line


def _load_doc(path: str) -> dict:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("%s: %s" % (path, exc)) from exc
    if not isinstance(doc, dict):
        raise ConfigError("%s: config root must be a mapping" % path)
    return doc


def _write_bytes(path: str, data: bytes) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(data)


def _parse_value(text: str):
    s = text.strip()
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    return s


def _slug(value) -> str:
    return re.sub(r"[^-A-Za-z0-9_.]", "_", str(value))


def _group_key(axis: str) -> str:
    # the config echo flattens the dataset section, so a sweep over
    # e.g. dataset.drift.position groups on config.dataset.position
    if axis.startswith("dataset."):
        return "config.dataset." + axis.split(".")[-1]
    return "config." + axis


def _cmd_run(args) -> int:
    doc = _load_doc(args.config)
    if args.clock is not None:
        set_by_path(doc, "clock", args.clock)
    if args.seed is not None:
        set_by_path(doc, "seed", args.seed)
    cfg = config_from_dict(doc)

    report, stream = execute(cfg, keep_trace=args.trace is not None)
    if args.trace is not None:
        write_trace(stream.trace, args.trace)

    if args.output:
        out_path = os.path.join(args.output, "report.json")
    elif cfg.output:
        out_path = cfg.output
    else:
        out_path = "report.json"
    _write_bytes(out_path, emit(report, "json"))
    print(
        "algorithm=%s recall@%d=%.6g query_latency_s=%.6g drop_ratio=%.6g report=%s"
        % (
            cfg.algorithm,
            cfg.queries.k,
            report.recall_at_k,
            report.query_latency_s,
            report.drop_ratio,
            out_path,
        )
    )
    return 0


def _cmd_sweep(args) -> int:
    doc = _load_doc(args.config)
    values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    os.makedirs(args.output, exist_ok=True)

    reports = []
    for value in values:
        trial = copy.deepcopy(doc)
        set_by_path(trial, args.axis, value)
        report, _ = execute(config_from_dict(trial))
        reports.append(report)
        _write_bytes(os.path.join(args.output, "run-%s.json" % _slug(value)), emit(report, "json"))

    table = summarize(reports, _group_key(args.axis))
    _write_bytes(os.path.join(args.output, "summary.csv"), emit(table, "csv"))
    _write_bytes(os.path.join(args.output, "summary.json"), emit(table, "json"))
    print(
        "swept %s over %d value(s); recall and latency summary in %s"
        % (args.axis, len(values), os.path.join(args.output, "summary.csv"))
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="streamknn",
        description="Streaming nearest-neighbour benchmark runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one configuration and write its report")
    run_p.add_argument("config", help="YAML configuration file")
    run_p.add_argument("--output", help="directory to write report.json into")
    run_p.add_argument("--clock", choices=["wall", "virtual"], help="override the clock mode")
    run_p.add_argument("--seed", type=int, help="override the run seed")
    run_p.add_argument("--trace", help="also write the admission trace to this file")

    sweep_p = sub.add_parser("sweep", help="re-run one configuration across several values")
    sweep_p.add_argument("config", help="YAML configuration file")
    sweep_p.add_argument("--axis", required=True, help="dotted config key to vary")
    sweep_p.add_argument("--values", required=True, help="comma-separated values for the axis")
    sweep_p.add_argument("--output", default="sweep_out", help="directory for reports and summary")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except (ConfigError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
