"""End-to-end command-line harness: every subcommand run in-process."""

import json

import pytest

from gcsplan.cli import main
from gcsplan.graph import GcsGraph
from gcsplan.synthesis import LowerBoundCertificate


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def scenario_file(workdir):
    path = workdir / "scn.json"
    assert main(["reference", "--variant", "two-segment",
                 "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def cert_file(workdir, scenario_file):
    path = workdir / "cert.json"
    assert main(["synthesize", "--scenario", str(scenario_file),
                 "--out", str(path)]) == 0
    return path


class TestGen:
    def test_boxes_deterministic(self, workdir):
        a, b = workdir / "ga.json", workdir / "gb.json"
        for out in (a, b):
            assert main(["gen", "--kind", "boxes", "--seed", "5",
                         "--n-boxes", "6", "--out", str(out)]) == 0
        assert GcsGraph.load(a).fingerprint() == GcsGraph.load(b).fingerprint()

    def test_digraph_with_summary(self, workdir):
        out = workdir / "dg.json"
        summary = workdir / "dg_summary.json"
        assert main(["gen", "--kind", "digraph", "--seed", "2",
                     "--n-vertices", "8", "--out", str(out),
                     "--json-out", str(summary)]) == 0
        data = json.loads(summary.read_text())
        assert data["vertices"] == 8
        assert data["out"] == str(out)

    def test_layered(self, workdir):
        out = workdir / "lay.json"
        assert main(["gen", "--kind", "layered", "--seed", "7",
                     "--n-layers", "3", "--out", str(out)]) == 0
        assert "src" in GcsGraph.load(out).vertices


class TestBezier:
    def test_from_boxes_json(self, workdir):
        boxes = workdir / "boxes.json"
        boxes.write_text(json.dumps([{"lo": [0, 0], "hi": [4, 4]},
                                     {"lo": [2, 0], "hi": [8, 4]}]))
        out = workdir / "bez.json"
        assert main(["bezier", "--boxes", str(boxes), "--degree", "3",
                     "--smoothness", "1", "--out", str(out)]) == 0
        g = GcsGraph.load(out)
        assert g.vertices["c0"].dimension == 8

    def test_bad_smoothness_is_an_error(self, workdir, capsys):
        boxes = workdir / "boxes2.json"
        boxes.write_text(json.dumps([{"lo": [0, 0], "hi": [4, 4]}]))
        rc = main(["bezier", "--boxes", str(boxes), "--degree", "2",
                   "--smoothness", "2", "--out", str(workdir / "x.json")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestSynthesizeRolloutOracle:
    def test_synthesize_writes_certificate(self, cert_file, scenario_file):
        cert = LowerBoundCertificate.load(cert_file)
        assert cert.graph_fingerprint == GcsGraph.load(scenario_file).fingerprint()

    def test_rollout_matches_oracle(self, workdir, scenario_file, cert_file):
        r_out = workdir / "rollout.json"
        assert main(["rollout", "--scenario", str(scenario_file),
                     "--cert", str(cert_file), "--source-vertex", "s",
                     "--source-point", "0,-2", "--horizon", "2",
                     "--json-out", str(r_out)]) == 0
        o_out = workdir / "oracle.json"
        assert main(["oracle", "--scenario", str(scenario_file),
                     "--source-vertex", "s", "--source-point", "0,-2",
                     "--max-edges", "3", "--json-out", str(o_out)]) == 0
        roll = json.loads(r_out.read_text())
        orac = json.loads(o_out.read_text())
        assert roll["status"] == "success"
        assert roll["cost"] >= orac["cost"] - 1e-6

    def test_walk_oracle_lower_bounds_exact(self, workdir, scenario_file):
        w_out = workdir / "walk.json"
        assert main(["oracle", "--scenario", str(scenario_file),
                     "--source-vertex", "s", "--source-point", "0,-2",
                     "--max-edges", "6", "--walks",
                     "--json-out", str(w_out)]) == 0
        walk = json.loads(w_out.read_text())
        assert walk["cost"] == pytest.approx(32.0, abs=1e-4)

    def test_missing_scenario_is_an_error(self, workdir, capsys):
        rc = main(["synthesize", "--scenario", str(workdir / "nope.json"),
                   "--out", str(workdir / "c.json")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestBench:
    def test_bench_writes_all_outputs(self, workdir, scenario_file, cert_file):
        base = workdir / "bench"
        assert main(["bench", "--scenario", str(scenario_file),
                     "--cert", f"quadratic={cert_file}",
                     "--queries", "2", "--horizons", "1,2",
                     "--oracle-max-edges", "3", "--out", str(base)]) == 0
        for ext in (".json", ".csv", ".txt", ".png"):
            assert (workdir / f"bench{ext}").exists()
        data = json.loads((workdir / "bench.json").read_text())
        assert len(data["records"]) == 4


class TestRender:
    def test_render_with_cert(self, workdir, scenario_file, cert_file):
        out = workdir / "scene.svg"
        assert main(["render", "--scenario", str(scenario_file),
                     "--cert", str(cert_file), "--out", str(out)]) == 0
        assert out.read_text().lstrip().startswith("<?xml")
