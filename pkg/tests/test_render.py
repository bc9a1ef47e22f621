"""SVG rendering: determinism, well-formedness, dimensional guards."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from gcsplan import SynthesisOptions, render_svg, rollout, synthesize_bounds
from gcsplan.render import _segment_endpoints
from gcsplan.scenarios import (build_bezier_scenario, build_two_segment_scenario)
from gcsplan.sets import ConvexSetDescription


@pytest.fixture(scope="module")
def scenario():
    g = build_two_segment_scenario()
    cert = synthesize_bounds(g, "t", SynthesisOptions())
    res = rollout(g, cert, "s", [0.0, -2.0], "t", [8.0, -2.0], horizon=2)
    assert res.ok
    return g, cert, res.trajectory


class TestRenderSvg:
    def test_plain_graph_is_well_formed_xml(self, scenario, tmp_path):
        g, _, _ = scenario
        out = tmp_path / "plain.svg"
        render_svg(g, str(out))
        root = ET.parse(out).getroot()
        assert root.tag.endswith("svg")

    def test_byte_identical_across_runs(self, scenario, tmp_path):
        g, cert, traj = scenario
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        render_svg(g, str(a), cert=cert, trajectories=[traj])
        render_svg(g, str(b), cert=cert, trajectories=[traj])
        assert a.read_bytes() == b.read_bytes()

    def test_contours_and_trajectory_add_content(self, scenario, tmp_path):
        g, cert, traj = scenario
        plain = tmp_path / "plain.svg"
        full = tmp_path / "full.svg"
        render_svg(g, str(plain))
        render_svg(g, str(full), cert=cert, trajectories=[traj])
        assert full.stat().st_size > plain.stat().st_size
        assert "s/w/t" in full.read_text() or "path" in full.read_text()

    def test_non_2d_rejected(self, tmp_path):
        g = build_bezier_scenario([([0.0, 0.0], [4.0, 4.0]),
                                   ([2.0, 0.0], [8.0, 4.0])])
        with pytest.raises(ValueError, match="2D"):
            render_svg(g, str(tmp_path / "no.svg"))


class TestSegmentEndpoints:
    def test_axis_aligned_segment(self):
        seg = ConvexSetDescription.segment([1.0, 0.0], [7.0, 0.0])
        lo, hi = seg.bounding_box()
        p0, p1 = _segment_endpoints(seg, lo, hi)
        got = sorted([tuple(np.round(p0, 5)), tuple(np.round(p1, 5))])
        assert got == [(1.0, 0.0), (7.0, 0.0)]

    def test_diagonal_segment(self):
        seg = ConvexSetDescription.segment([0.0, 0.0], [2.0, 2.0])
        lo, hi = seg.bounding_box()
        p0, p1 = _segment_endpoints(seg, lo, hi)
        assert not np.allclose(p0, p1)
        for p in (p0, p1):
            assert seg.contains(p, tol=1e-5)
