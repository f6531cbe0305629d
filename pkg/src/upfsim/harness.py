"""End-to-end slot loop: association, per-cell allocation, metrics, output."""

from __future__ import annotations

import bz2
import csv
import gzip
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .allocation import ALGORITHMS, Allocator, latency_arrays
from .association import ActiveLoad, PathLossModel, associate_stream
from .metrics import AggregateMetrics, SlotMetrics, ci95, measure, percentile_from_arrays
from .mobility import limit_slots, stream_slots
from .topology import NetworkGraph, build_network, load_bs_deployment

log = logging.getLogger("upfsim")

MIN_SLOT_DURATION = 1.0
RECOMMENDED_SLOT_DURATION = 5.0

SLOT_COLUMNS = ["slot", "algorithm", "k", "fraction", "p90_hops", "mean_hops", "exec_time_s", "total_ues"]
AGGREGATE_COLUMNS = ["algorithm", "fraction", "mean_p90", "ci95", "mean_exec_time_s", "slots"]


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    bs_file: str | None = None
    trace_file: str | None = None
    link_threshold: float = 500.0
    slot_duration: float = 5.0
    max_slots: int | None = None
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    upf_fractions: list[float] = field(default_factory=lambda: [0.02, 0.05, 0.10])
    eval_mode: str = "same_slot"
    seed: int = 0
    pathloss: PathLossModel = field(default_factory=PathLossModel)
    bs_columns: tuple[int, int] = (0, 1)
    benchmark_mode: bool = False
    workers: int | None = None
    output: str | None = None
    format: str = "csv"
    verbose: bool = False

    def validate(self) -> None:
        if self.slot_duration < MIN_SLOT_DURATION:
            raise ConfigError(
                f"slot duration {self.slot_duration}s is below the {MIN_SLOT_DURATION:g}s minimum"
            )
        if self.slot_duration < RECOMMENDED_SLOT_DURATION:
            log.warning("slot duration below %gs causes frequent reconfiguration", RECOMMENDED_SLOT_DURATION)
        if self.link_threshold <= 0:
            raise ConfigError("link threshold must be positive")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithm(s): {', '.join(unknown)}")
        if not self.algorithms:
            raise ConfigError("no algorithms selected")
        for u in self.upf_fractions:
            if not 0 < u <= 1:
                raise ConfigError(f"UPF fraction {u} outside (0, 1]")
        if self.eval_mode not in ("same_slot", "next_slot"):
            raise ConfigError(f"unknown eval mode {self.eval_mode!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.max_slots is not None and self.max_slots < 0:
            raise ConfigError("max_slots must be non-negative")


def budget(fraction: float, n_stations: int) -> int:
    """UPF count for a fraction of stations, rounded half up, at least 1."""
    return max(1, min(n_stations, math.floor(fraction * n_stations + 0.5)))


@dataclass
class ResultsTable:
    rows: list[SlotMetrics] = field(default_factory=list)
    aggregates: list[AggregateMetrics] = field(default_factory=list)
    skipped_slots: int = 0


def aggregate(rows: Sequence[SlotMetrics]) -> list[AggregateMetrics]:
    cells: dict[tuple[str, float], list[SlotMetrics]] = {}
    for row in rows:
        cells.setdefault((row.algorithm, row.fraction), []).append(row)
    out = []
    for (alg, frac), group in cells.items():
        p90s = [float(r.p90_latency) for r in group]
        half = ci95(p90s)[1] if len(p90s) >= 2 else None
        out.append(
            AggregateMetrics(
                algorithm=alg,
                fraction=frac,
                mean_of_p90=sum(p90s) / len(p90s),
                ci95_halfwidth=half,
                mean_exec_time=sum(r.exec_time for r in group) / len(group),
                slot_count=len(group),
            )
        )
    return out


def evaluate(upf_nodes, load: ActiveLoad, hop) -> tuple[int, float]:
    lat, weights = latency_arrays(upf_nodes, load, hop)
    return percentile_from_arrays(lat, weights), float(lat @ weights) / int(weights.sum())


def simulate(
    graph: NetworkGraph,
    loads: Iterable[ActiveLoad],
    algorithms: Sequence[str],
    fractions: Sequence[float],
    *,
    seed: int = 0,
    eval_mode: str = "same_slot",
    benchmark_mode: bool = False,
    workers: int | None = None,
) -> ResultsTable:
    """Run every (algorithm, fraction) cell on each slot's load."""
    cells = [(alg, frac, budget(frac, graph.n)) for alg in algorithms for frac in fractions]
    allocator = Allocator(graph, seed)
    allocator.prepare(sorted({k for alg, _, k in cells if alg == "static_kmeans"}))
    hop = graph.hop_dist
    table = ResultsTable()
    pending: dict[tuple[str, float], tuple] = {}

    pool = None
    if not benchmark_mode:
        pool = ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1)

    def run_cell(cell, load):
        alg, _, k = cell
        return measure(allocator, alg, load, k)

    try:
        for n_slot, load in enumerate(loads, start=1):
            if eval_mode == "next_slot" and load.total_ues > 0:
                for (alg, frac), (k, alloc, elapsed) in pending.items():
                    p90, mean = evaluate(alloc.upf_nodes, load, hop)
                    table.rows.append(SlotMetrics(load.slot_index, alg, k, frac, p90, mean, elapsed, load.total_ues))
            pending = {}
            if load.total_ues == 0:
                table.skipped_slots += 1
                log.debug("slot %d has no active UEs, skipped", load.slot_index)
                continue
            if pool is None:
                results = [run_cell(cell, load) for cell in cells]
            else:
                results = list(pool.map(lambda c: run_cell(c, load), cells))
            for (alg, frac, k), (alloc, elapsed) in zip(cells, results):
                if eval_mode == "same_slot":
                    p90, mean = evaluate(alloc.upf_nodes, load, hop)
                    table.rows.append(SlotMetrics(load.slot_index, alg, k, frac, p90, mean, elapsed, load.total_ues))
                else:
                    pending[(alg, frac)] = (k, alloc, elapsed)
            if n_slot % 100 == 0:
                log.info("slot %d processed (%d rows, %d skipped)", load.slot_index, len(table.rows), table.skipped_slots)
    finally:
        if pool is not None:
            pool.shutdown()

    log.info("skipped_slots=%d", table.skipped_slots)
    table.aggregates = aggregate(table.rows)
    return table


def open_trace(path: str):
    """Binary handle on a trace; ``-`` is stdin, ``.bz2``/``.gz`` are decompressed."""
    if path == "-":
        return os.fdopen(os.dup(0), "rb")
    if path.endswith(".bz2"):
        return bz2.open(path, "rb")
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def run_sweep(config: SweepConfig) -> ResultsTable:
    config.validate()
    if not config.bs_file or not config.trace_file:
        raise ConfigError("both a deployment file and a trace file are required")
    stations = load_bs_deployment(config.bs_file, config.bs_columns)
    if config.trace_file != "-" and not os.access(config.trace_file, os.R_OK):
        raise FileNotFoundError(config.trace_file)
    for u in config.upf_fractions:
        if u * len(stations) < 1:
            raise ConfigError(f"fraction {u} gives fewer than one UPF for {len(stations)} stations")
    graph = build_network(stations, config.link_threshold)
    log.info("graph: %d stations, %d edges", graph.n, len(graph.edges))

    with open_trace(config.trace_file) as fh:
        slots = limit_slots(stream_slots(fh, config.slot_duration), config.max_slots)
        loads = (load for _, load in associate_stream(slots, graph.coords, config.pathloss))
        return simulate(
            graph,
            loads,
            config.algorithms,
            config.upf_fractions,
            seed=config.seed,
            eval_mode=config.eval_mode,
            benchmark_mode=config.benchmark_mode,
            workers=config.workers,
        )


# -- output -------------------------------------------------------------------

def _slot_record(r: SlotMetrics) -> list:
    return [r.slot_index, r.algorithm, r.k, repr(r.fraction), r.p90_latency,
            repr(r.mean_latency), repr(r.exec_time), r.total_ues]


def _aggregate_record(a: AggregateMetrics) -> list:
    ci = "" if a.ci95_halfwidth is None else repr(a.ci95_halfwidth)
    return [a.algorithm, repr(a.fraction), repr(a.mean_of_p90), ci, repr(a.mean_exec_time), a.slot_count]


def emit_results(table: ResultsTable, output, fmt: str = "csv") -> list[Path]:
    """Write the table under directory ``output``; returns the written paths.

    CSV produces ``slots.csv`` and ``aggregate.csv``; JSON produces a single
    ``results.json`` holding both.
    """
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        slots_path, agg_path = out / "slots.csv", out / "aggregate.csv"
        with open(slots_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SLOT_COLUMNS)
            writer.writerows(_slot_record(r) for r in table.rows)
        with open(agg_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(AGGREGATE_COLUMNS)
            writer.writerows(_aggregate_record(a) for a in table.aggregates)
        return [slots_path, agg_path]
    if fmt == "json":
        path = out / "results.json"
        doc = {
            "slots": [dict(zip(SLOT_COLUMNS, _slot_values(r))) for r in table.rows],
            "aggregate": [dict(zip(AGGREGATE_COLUMNS, _aggregate_values(a))) for a in table.aggregates],
            "skipped_slots": table.skipped_slots,
        }
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return [path]
    raise ConfigError(f"unknown format {fmt!r}")


def _slot_values(r: SlotMetrics) -> list:
    d = asdict(r)
    return [d["slot_index"], d["algorithm"], d["k"], d["fraction"], d["p90_latency"],
            d["mean_latency"], d["exec_time"], d["total_ues"]]


def _aggregate_values(a: AggregateMetrics) -> list:
    return [a.algorithm, a.fraction, a.mean_of_p90, a.ci95_halfwidth, a.mean_exec_time, a.slot_count]


def _slot_from(values) -> SlotMetrics:
    slot, alg, k, frac, p90, mean, t, ues = values
    return SlotMetrics(int(slot), alg, int(k), float(frac), int(p90), float(mean), float(t), int(ues))


def _aggregate_from(values) -> AggregateMetrics:
    alg, frac, mean_p90, ci, t, slots = values
    ci = None if ci in ("", None) else float(ci)
    return AggregateMetrics(alg, float(frac), float(mean_p90), ci, float(t), int(slots))


def read_results(output, fmt: str = "csv") -> ResultsTable:
    out = Path(output)
    if fmt == "json":
        doc = json.loads((out / "results.json").read_text(encoding="utf-8"))
        return ResultsTable(
            rows=[_slot_from([d[c] for c in SLOT_COLUMNS]) for d in doc["slots"]],
            aggregates=[_aggregate_from([d[c] for c in AGGREGATE_COLUMNS]) for d in doc["aggregate"]],
            skipped_slots=doc.get("skipped_slots", 0),
        )
    with open(out / "slots.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [_slot_from(r) for r in reader]
    with open(out / "aggregate.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        aggs = [_aggregate_from(r) for r in reader]
    return ResultsTable(rows=rows, aggregates=aggs)
