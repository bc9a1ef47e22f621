"""Benchmark runner: batches of rollout queries against synthesized bound
certificates, with per-query ground-truth references where tractable, plus
report serialization (JSON records, CSV, plain-text table, summary figure)."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .graph import GcsGraph
from .oracle import exact_sppgcs, PathGuardExceeded, DEFAULT_PATH_GUARD
from .policy import rollout, DEFAULT_MAX_ITERS
from .synthesis import LowerBoundCertificate

INF = math.inf


@dataclass
class QueryRecord:
    query_id: int
    mode: str                      # certificate label, e.g. quadratic | affine
    horizon: int
    status: str                    # success | exhausted | iteration_cap
    cost: float | None             # None unless status == success
    oracle_cost: float | None      # None when the reference was skipped
    gap_pct: float | None          # 100 * (cost / oracle_cost - 1)
    solve_time: float
    iterations: int = 0
    path: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["path"] = list(self.path)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QueryRecord":
        d = dict(d)
        d["path"] = tuple(d.get("path", ()))
        return cls(**d)


@dataclass
class BenchmarkReport:
    scenario_fingerprint: str
    records: list = field(default_factory=list)
    oracle_skipped: bool = False

    def configs(self):
        return sorted({(r.mode, r.horizon) for r in self.records})

    def aggregates(self) -> dict:
        """Per-(mode, horizon) summary, recomputed from the raw records;
        failed queries are excluded from the gap statistics."""
        out = {}
        for mode, horizon in self.configs():
            recs = sorted((r for r in self.records
                           if r.mode == mode and r.horizon == horizon),
                          key=lambda r: r.query_id)
            gaps = [r.gap_pct for r in recs
                    if r.status == "success" and r.gap_pct is not None]
            times = [r.solve_time for r in recs]
            n_fail = sum(r.status != "success" for r in recs)
            out[(mode, horizon)] = {
                "queries": len(recs),
                "median_gap_pct": float(np.median(gaps)) if gaps else None,
                "p75_gap_pct": float(np.percentile(gaps, 75)) if gaps else None,
                "failure_rate_pct": 100.0 * n_fail / len(recs) if recs else 0.0,
                "median_time": float(np.median(times)) if times else None,
                "p75_time": float(np.percentile(times, 75)) if times else None,
                "max_time": float(np.max(times)) if times else None,
            }
        return out

    def to_dict(self) -> dict:
        return {
            "scenario_fingerprint": self.scenario_fingerprint,
            "oracle_skipped": self.oracle_skipped,
            "records": [r.to_dict() for r in
                        sorted(self.records,
                               key=lambda r: (r.query_id, r.mode, r.horizon))],
            "aggregates": [
                {"mode": m, "horizon": h, **agg}
                for (m, h), agg in self.aggregates().items()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        return cls(scenario_fingerprint=d["scenario_fingerprint"],
                   oracle_skipped=d.get("oracle_skipped", False),
                   records=[QueryRecord.from_dict(r) for r in d["records"]])

    def table(self) -> str:
        """Plain-text summary table, one row per (mode, horizon)."""
        header = (f"{'mode':<12} {'h':>2} {'queries':>7} {'med gap %':>10} "
                  f"{'p75 gap %':>10} {'fail %':>7} {'med t (s)':>10} "
                  f"{'p75 t (s)':>10} {'max t (s)':>10}")
        lines = [header, "-" * len(header)]

        def fmt(x, prec=3):
            return "n/a" if x is None else f"{x:.{prec}f}"

        for (mode, horizon), agg in self.aggregates().items():
            lines.append(
                f"{mode:<12} {horizon:>2} {agg['queries']:>7} "
                f"{fmt(agg['median_gap_pct']):>10} {fmt(agg['p75_gap_pct']):>10} "
                f"{fmt(agg['failure_rate_pct'], 1):>7} "
                f"{fmt(agg['median_time']):>10} {fmt(agg['p75_time']):>10} "
                f"{fmt(agg['max_time']):>10}")
        return "\n".join(lines)


def sample_queries(graph: GcsGraph, n: int, seed: int = 0,
                   source: str | None = None) -> list:
    """n (source vertex, point) query pairs sampled uniformly from the source
    vertex set."""
    if source is None:
        if not graph.sources:
            raise ValueError("scenario has no source vertices")
        source = graph.sources[0]
    rng = np.random.default_rng(seed)
    points = graph.vertices[source].set.sample(rng, n)
    return [(source, np.asarray(p, dtype=float)) for p in points]


def run_benchmark(graph: GcsGraph, certs: dict, queries, horizons,
                  max_iters: int = DEFAULT_MAX_ITERS,
                  oracle_max_edges: int | None = None,
                  oracle_path_guard: int = DEFAULT_PATH_GUARD,
                  skip_oracle: bool = False,
                  accuracy: float = 1e-8) -> BenchmarkReport:
    """Run every certificate in `certs` (label -> certificate) at every horizon
    over the given (source vertex, point) queries. Each query gets one
    ground-truth reference unless skip_oracle is set or the search guard
    trips, in which case its gap is marked unavailable."""
    fingerprint = graph.fingerprint()
    report = BenchmarkReport(scenario_fingerprint=fingerprint,
                             oracle_skipped=skip_oracle)
    if not certs or not queries:
        return report
    for label, cert in certs.items():
        if cert.graph_fingerprint != fingerprint:
            raise ValueError(f"certificate {label!r} was synthesized "
                             "for a different scenario")
    target = next(iter(certs.values())).target
    for cert in certs.values():
        if cert.target != target:
            raise ValueError("certificates disagree on the target vertex")
    x_t = _target_point(graph, certs)
    if oracle_max_edges is None:
        oracle_max_edges = len(graph.vertices) - 1

    for qid, (source, x_s) in enumerate(queries):
        oracle_cost = None
        if not skip_oracle:
            try:
                ref = exact_sppgcs(graph, source, x_s, target, x_t,
                                   max_path_edges=oracle_max_edges,
                                   path_guard=oracle_path_guard,
                                   accuracy=accuracy)
                if ref.feasible:
                    oracle_cost = ref.cost
            except PathGuardExceeded:
                report.oracle_skipped = True
        for label, cert in certs.items():
            for horizon in horizons:
                t0 = time.perf_counter()
                res = rollout(graph, cert, source, x_s, target, x_t,
                              horizon=horizon, max_iters=max_iters,
                              accuracy=accuracy)
                elapsed = time.perf_counter() - t0
                gap = None
                if res.ok and oracle_cost is not None and oracle_cost > 0:
                    gap = 100.0 * (res.cost / oracle_cost - 1.0)
                report.records.append(QueryRecord(
                    query_id=qid, mode=label, horizon=horizon,
                    status=res.status,
                    cost=res.cost if res.ok else None,
                    oracle_cost=oracle_cost, gap_pct=gap,
                    solve_time=elapsed, iterations=res.iterations,
                    path=res.path if res.ok else ()))
    return report


def _target_point(graph: GcsGraph, certs: dict):
    cert = next(iter(certs.values()))
    if cert.target_mode == "fixed" and cert.target_point is not None:
        return np.asarray(cert.target_point, dtype=float)
    lo, hi = graph.vertices[cert.target].set.bounding_box()
    return 0.5 * (np.asarray(lo) + np.asarray(hi))


def write_report(report: BenchmarkReport, base_path: str) -> list:
    """Write <base>.json, <base>.csv, <base>.txt, and <base>.png; returns the
    paths written."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    json_path = f"{base_path}.json"
    with open(json_path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    paths.append(json_path)

    csv_path = f"{base_path}.csv"
    fieldnames = ["query_id", "mode", "horizon", "status", "cost",
                  "oracle_cost", "gap_pct", "solve_time", "iterations", "path"]
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for rec in sorted(report.records,
                          key=lambda r: (r.query_id, r.mode, r.horizon)):
            row = rec.to_dict()
            row["path"] = "/".join(row["path"])
            writer.writerow(row)
    paths.append(csv_path)

    txt_path = f"{base_path}.txt"
    with open(txt_path, "w") as f:
        f.write(report.table() + "\n")
    paths.append(txt_path)

    fig_path = f"{base_path}.png"
    aggs = report.aggregates()
    modes = sorted({m for m, _ in aggs})
    fig, (ax_gap, ax_time) = plt.subplots(1, 2, figsize=(10, 4))
    for mode in modes:
        hs = sorted(h for m, h in aggs if m == mode)
        gaps = [aggs[(mode, h)]["median_gap_pct"] for h in hs]
        times = [aggs[(mode, h)]["median_time"] for h in hs]
        if any(g is not None for g in gaps):
            ax_gap.plot(hs, [g if g is not None else np.nan for g in gaps],
                        marker="o", label=mode)
        ax_time.plot(hs, times, marker="s", label=mode)
    ax_gap.set_xlabel("lookahead horizon")
    ax_gap.set_ylabel("median gap (%)")
    ax_gap.legend()
    ax_time.set_xlabel("lookahead horizon")
    ax_time.set_ylabel("median solve time (s)")
    ax_time.legend()
    fig.tight_layout()
    fig.savefig(fig_path)
    plt.close(fig)
    paths.append(fig_path)
    return paths
