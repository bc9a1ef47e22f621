"""Scenario builders: random box environments, layered corridors, smooth-curve
control-point graphs, and the frozen small instances."""

import numpy as np
import pytest

from gcsplan import exact_sppgcs, validate_graph
from gcsplan.oracle import _edge_min_lengths
from gcsplan.scenarios import (EnvGenParams, LayeredEnvParams,
                               build_bezier_scenario,
                               build_nine_vertex_scenario,
                               build_singleton_digraph,
                               build_two_segment_scenario,
                               generate_layered_env, generate_random_env)


class TestRandomEnv:
    def test_deterministic_in_seed(self):
        a = generate_random_env(EnvGenParams(seed=3, n_boxes=8))
        b = generate_random_env(EnvGenParams(seed=3, n_boxes=8))
        assert a.fingerprint() == b.fingerprint()
        c = generate_random_env(EnvGenParams(seed=4, n_boxes=8))
        assert c.fingerprint() != a.fingerprint()

    def test_validates_and_has_paired_edges(self):
        g = generate_random_env(EnvGenParams(seed=3, n_boxes=8))
        assert validate_graph(g).ok
        for e in g.edges:
            if e.head != "t":
                assert g.has_edge(e.head, e.tail)
        assert g.source_distribution["b0"]["kind"] == "uniform_box"

    def test_target_reachable_from_source(self):
        g = generate_random_env(EnvGenParams(seed=3, n_boxes=8))
        reached = set()
        stack = ["b0"]
        while stack:
            v = stack.pop()
            if v in reached:
                continue
            reached.add(v)
            stack.extend(g.successors(v))
        assert "t" in reached


class TestLayeredEnv:
    PARAMS = LayeredEnvParams(seed=7, n_layers=4, target_frac=0.85,
                              src_frac=0.3)

    def test_deterministic_in_seed(self):
        a = generate_layered_env(self.PARAMS)
        b = generate_layered_env(self.PARAMS)
        assert a.fingerprint() == b.fingerprint()

    def test_validates(self):
        g = generate_layered_env(self.PARAMS)
        assert validate_graph(g).ok
        assert not g.successors("t")
        assert g.successors("src")

    def test_strictly_positive_edge_minima(self):
        g = generate_layered_env(self.PARAMS)
        mins = _edge_min_lengths(g)
        assert min(mins.values()) > 0.0

    def test_target_reachable(self):
        g = generate_layered_env(self.PARAMS)
        lo, hi = g.vertices["src"].set.bounding_box()
        x_t = g.vertices["t"].set.bounding_box()[0]
        sol = exact_sppgcs(g, "src", 0.5 * (lo + hi), "t", x_t,
                           max_path_edges=self.PARAMS.n_layers + 3)
        assert sol.feasible


class TestBezierScenario:
    BOXES = [([0.0, 0.0], [4.0, 4.0]), ([2.0, 0.0], [8.0, 4.0])]

    def test_smoothness_must_be_below_degree(self):
        with pytest.raises(ValueError):
            build_bezier_scenario(self.BOXES, degree=2, smoothness=2)

    def test_zero_length_query(self):
        g = build_bezier_scenario(self.BOXES, degree=3, smoothness=1)
        x_t = g.vertices["t"].set.bounding_box()[0]
        sol = exact_sppgcs(g, "c1", x_t, "t", x_t, max_path_edges=1)
        assert sol.cost == pytest.approx(0.0, abs=1e-7)

    def test_straight_line_equal_spacing(self):
        g = build_bezier_scenario(self.BOXES, degree=3, smoothness=1)
        start = np.tile([3.0, 2.0], 4)
        x_t = g.vertices["t"].set.bounding_box()[0]
        sol = exact_sppgcs(g, "c0", start, "t", x_t, max_path_edges=3)
        assert sol.feasible
        # control points of the moving pieces lie on one line, equally spaced
        cps = np.concatenate([p.reshape(-1, 2) for p in sol.trajectory.points[:-1]])
        diffs = np.diff(cps, axis=0)
        moving = diffs[np.linalg.norm(diffs, axis=1) > 1e-6]
        np.testing.assert_allclose(moving - moving[0], 0.0, atol=1e-4)

    def test_continuity_constraints_hold(self):
        g = build_bezier_scenario(self.BOXES, degree=3, smoothness=1)
        start = np.tile([3.0, 2.0], 4)
        x_t = g.vertices["t"].set.bounding_box()[0]
        sol = exact_sppgcs(g, "c0", start, "t", x_t, max_path_edges=3)
        pts = [p.reshape(-1, 2) for p in sol.trajectory.points]
        for a, b in zip(pts, pts[1:]):
            np.testing.assert_allclose(a[-1], b[0], atol=1e-6)
        # first-difference continuity between the two box pieces
        np.testing.assert_allclose(pts[0][-1] - pts[0][-2], pts[1][1] - pts[1][0],
                                   atol=1e-5)


class TestFrozenInstances:
    def test_two_segment_shape(self):
        g = build_two_segment_scenario()
        assert sorted(g.vertices) == ["s", "t", "v", "w"]
        assert len(g.edges) == 12
        assert validate_graph(g).ok

    def test_nine_vertex_shape(self):
        g = build_nine_vertex_scenario()
        assert len(g.vertices) == 9
        assert len(g.edges) == 25
        assert validate_graph(g).ok

    def test_singleton_digraph(self):
        g = build_singleton_digraph(seed=2)
        assert validate_graph(g).ok
        assert set(g.source_distribution) == set(g.vertices)
        total = sum(s["weight"] for s in g.source_distribution.values())
        assert total == pytest.approx(1.0)
        # deterministic in the seed
        assert g.fingerprint() == build_singleton_digraph(seed=2).fingerprint()
