"""Benchmark runner and report serialization."""

import csv
import json

import numpy as np
import pytest

from gcsplan import (BenchmarkReport, QueryRecord, SynthesisOptions,
                     run_benchmark, sample_queries, synthesize_bounds,
                     write_report)
from gcsplan.scenarios import build_nine_vertex_scenario, build_two_segment_scenario


@pytest.fixture(scope="module")
def two_segment():
    g = build_two_segment_scenario()
    certs = {"quadratic": synthesize_bounds(g, "t", SynthesisOptions()),
             "affine": synthesize_bounds(g, "t",
                                         SynthesisOptions(mode="affine"))}
    return g, certs


@pytest.fixture(scope="module")
def small_report(two_segment):
    g, certs = two_segment
    queries = sample_queries(g, 4, seed=9)
    return g, run_benchmark(g, certs, queries, horizons=(1, 2),
                            oracle_max_edges=3)


class TestSampleQueries:
    def test_deterministic_and_inside_source_set(self):
        g = build_nine_vertex_scenario()
        qs = sample_queries(g, 10, seed=5)
        qs2 = sample_queries(g, 10, seed=5)
        for (v, x), (v2, x2) in zip(qs, qs2):
            assert v == v2 == "src"
            np.testing.assert_allclose(x, x2)
            assert g.vertices[v].set.contains(x, tol=1e-9)

    def test_explicit_source(self):
        g = build_two_segment_scenario()
        qs = sample_queries(g, 3, seed=0, source="w")
        assert all(v == "w" for v, _ in qs)


class TestRunBenchmark:
    def test_empty_queries_empty_report(self, two_segment):
        g, certs = two_segment
        report = run_benchmark(g, certs, [], horizons=(1,))
        assert report.records == []
        assert report.aggregates() == {}

    def test_fingerprint_mismatch_rejected(self, two_segment):
        g, certs = two_segment
        other = build_nine_vertex_scenario()
        with pytest.raises(ValueError, match="different scenario"):
            run_benchmark(other, certs, sample_queries(other, 1), horizons=(1,))

    def test_record_counts_and_configs(self, small_report):
        _, report = small_report
        assert len(report.records) == 4 * 2 * 2
        assert report.configs() == [("affine", 1), ("affine", 2),
                                    ("quadratic", 1), ("quadratic", 2)]

    def test_gaps_nonnegative_and_paths_valid(self, small_report):
        g, report = small_report
        for r in report.records:
            assert r.status == "success"
            assert r.gap_pct is not None
            assert r.gap_pct >= -1e-6
            assert r.path[0] == "s" and r.path[-1] == "t"
            assert r.cost >= r.oracle_cost - 1e-8

    def test_skip_oracle(self, two_segment):
        g, certs = two_segment
        queries = sample_queries(g, 2, seed=1)
        report = run_benchmark(g, certs, queries, horizons=(1,),
                               skip_oracle=True)
        assert report.oracle_skipped
        assert all(r.oracle_cost is None and r.gap_pct is None
                   for r in report.records)
        aggs = report.aggregates()
        assert all(a["median_gap_pct"] is None for a in aggs.values())


class TestReport:
    def test_aggregates_recomputable(self, small_report):
        _, report = small_report
        aggs = report.aggregates()
        for (mode, h), agg in aggs.items():
            recs = [r for r in report.records
                    if r.mode == mode and r.horizon == h]
            gaps = [r.gap_pct for r in recs if r.status == "success"]
            assert agg["queries"] == len(recs)
            assert agg["median_gap_pct"] == pytest.approx(np.median(gaps))
            assert agg["failure_rate_pct"] == 0.0

    def test_roundtrip(self, small_report):
        _, report = small_report
        back = BenchmarkReport.from_dict(report.to_dict())
        assert back.scenario_fingerprint == report.scenario_fingerprint
        assert back.aggregates() == report.aggregates()

    def test_table_has_one_row_per_config(self, small_report):
        _, report = small_report
        lines = report.table().splitlines()
        assert len(lines) == 2 + len(report.configs())

    def test_write_report_files(self, small_report, tmp_path):
        _, report = small_report
        base = str(tmp_path / "bench")
        paths = write_report(report, base)
        assert sorted(paths) == [f"{base}.csv", f"{base}.json",
                                 f"{base}.png", f"{base}.txt"]
        with open(f"{base}.json") as f:
            data = json.load(f)
        assert len(data["records"]) == len(report.records)
        with open(f"{base}.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == len(report.records)
        # CSV rows agree with the JSON records (shared sort order)
        for row, rec in zip(rows, data["records"]):
            assert int(row["query_id"]) == rec["query_id"]
            assert row["mode"] == rec["mode"]
            assert row["path"] == "/".join(rec["path"])
        with open(f"{base}.png", "rb") as f:
            assert f.read(8).startswith(b"\x89PNG")
        assert (tmp_path / "bench.txt").read_text().splitlines()[0].startswith("mode")


class TestQueryRecord:
    def test_roundtrip(self):
        rec = QueryRecord(query_id=3, mode="quadratic", horizon=2,
                          status="success", cost=1.5, oracle_cost=1.4,
                          gap_pct=7.1, solve_time=0.1, iterations=4,
                          path=("s", "t"))
        assert QueryRecord.from_dict(rec.to_dict()) == rec
