"""Online lookahead policy: candidate enumeration, stepping, full rollouts."""

import numpy as np
import pytest

from gcsplan import (ConvexSetDescription, GcsEdge, GcsGraph, GcsVertex,
                     QuadraticForm, SynthesisOptions, exact_sppgcs,
                     lookahead_value, rollout, step_policy, synthesize_bounds)
from gcsplan.policy import (RolloutState, evaluate_candidate,
                            lookahead_candidates, reverse_trajectory)
from gcsplan.pathopt import reoptimize_path
from gcsplan.scenarios import build_two_segment_scenario

from gcsplan.synthesis import LowerBoundCertificate as Cert

SQD = QuadraticForm.squared_distance(2)


def point_graph(points: dict, edges, sources=(), targets=()):
    g = GcsGraph(sources=list(sources), targets=list(targets))
    for name, p in points.items():
        g.add_vertex(GcsVertex(name, ConvexSetDescription.point(p)))
    for a, b in edges:
        g.add_edge(GcsEdge(a, b, SQD))
    return g


def manual_cert(graph, target, bounds):
    return Cert(mode="quadratic", target_mode="fixed", target=target,
                target_point=None, bounds=bounds, penalties={},
                cycle_penalties={}, objective_value=0.0,
                graph_fingerprint=graph.fingerprint())


class TestLookaheadCandidates:
    def test_chain_one_step(self):
        g = point_graph({"a": [0.0, 0.0], "b": [1.0, 0.0], "t": [2.0, 0.0]},
                        [("a", "b"), ("b", "t")], ["a"], ["t"])
        assert lookahead_candidates(g, "a", "t", 1) == [("a", "b")]

    def test_complete_graph_with_visited(self):
        g = build_two_segment_scenario()
        seqs = lookahead_candidates(g, "v", "t", 2, visited=("s", "w"))
        assert seqs == [("v", "t")]

    def test_excluded_first_steps(self):
        g = build_two_segment_scenario()
        seqs = lookahead_candidates(g, "s", "t", 1, excluded=frozenset({"v"}))
        firsts = {seq[1] for seq in seqs}
        assert "v" not in firsts and firsts


class TestEvaluateCandidate:
    def test_direct_edge_to_target(self):
        g = point_graph({"s": [0.0, 0.0], "t": [3.0, 4.0]}, [("s", "t")],
                        ["s"], ["t"])
        g.source_distribution = {"s": {"kind": "point_mass",
                                       "point": [0.0, 0.0], "weight": 1.0}}
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        cand = evaluate_candidate(g, cert, ("s", "t"), [0.0, 0.0], "t",
                                  x_t=[3.0, 4.0])
        assert cand.value == pytest.approx(25.0, abs=1e-6)
        np.testing.assert_allclose(cand.points[1], [3.0, 4.0], atol=1e-6)

    def test_terminal_bound_consistency(self):
        g = build_two_segment_scenario()
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        x_s = np.array([0.0, -2.0])
        cand = evaluate_candidate(g, cert, ("s", "w"), x_s, "t")
        p = cand.points[1]
        edge_cost = g.edge("s", "w").length(np.concatenate([x_s, p]))
        assert cand.value == pytest.approx(edge_cost + cert.evaluate("w", p),
                                           abs=1e-6)

    def test_infeasible_candidate_signals_inf(self):
        # pin the start outside the tail vertex's singleton set
        g = build_two_segment_scenario()
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        cand = evaluate_candidate(g, cert, ("s", "v"), [5.0, 5.0], "t")
        assert cand.value == np.inf
        assert cand.points is None


class TestStepPolicy:
    def test_single_candidate(self):
        g = point_graph({"a": [0.0, 0.0], "b": [1.0, 0.0], "t": [2.0, 0.0]},
                        [("a", "b"), ("b", "t")], ["a"], ["t"])
        g.source_distribution = {"a": {"kind": "point_mass",
                                       "point": [0.0, 0.0], "weight": 1.0}}
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        state = RolloutState(vertex="a", point=np.zeros(2), visited=())
        best = step_policy(g, cert, state, "t", x_t=[2.0, 0.0])
        assert best.sequence[1] == "b"

    def test_argmin_of_two_candidates(self):
        g = point_graph({"s": [0.0, 0.0], "a": [1.0, 0.0], "b": [0.0, 5.0],
                         "t": [2.0, 0.0]},
                        [("s", "a"), ("a", "t"), ("s", "b"), ("b", "t")],
                        ["s"], ["t"])
        g.source_distribution = {"s": {"kind": "point_mass",
                                       "point": [0.0, 0.0], "weight": 1.0}}
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        state = RolloutState(vertex="s", point=np.zeros(2), visited=())
        best = step_policy(g, cert, state, "t", x_t=[2.0, 0.0], horizon=2)
        assert best.sequence == ("s", "a", "t")


class TestRollout:
    def test_single_edge_chain(self):
        g = point_graph({"s": [0.0, 0.0], "t": [3.0, 4.0]}, [("s", "t")],
                        ["s"], ["t"])
        g.source_distribution = {"s": {"kind": "point_mass",
                                       "point": [0.0, 0.0], "weight": 1.0}}
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        res = rollout(g, cert, "s", [0, 0], "t", [3, 4])
        assert res.ok
        assert res.path == ("s", "t")
        assert res.cost == pytest.approx(25.0, abs=1e-6)

    def test_backtrack_out_of_dead_end(self):
        # d is a trap: its bound is a huge underestimate, luring the one-step
        # policy into a vertex with no way out
        g = point_graph({"s": [0.0, 0.0], "d": [0.5, 0.0], "a": [4.0, 0.0],
                         "t": [5.0, 0.0]},
                        [("s", "d"), ("s", "a"), ("a", "t")], ["s"], ["t"])
        bounds = {v: QuadraticForm.zero(2) for v in g.vertices}
        bounds["d"] = QuadraticForm.constant(-100.0, 2)
        cert = manual_cert(g, "t", bounds)
        res = rollout(g, cert, "s", [0, 0], "t", [5, 0])
        assert res.ok
        assert res.path == ("s", "a", "t")
        assert res.backtracks == 1

    def test_disconnected_exhausts(self):
        g = point_graph({"s": [0.0, 0.0], "t": [1.0, 0.0]}, [], ["s"], ["t"])
        bounds = {v: QuadraticForm.zero(2) for v in g.vertices}
        cert = manual_cert(g, "t", bounds)
        res = rollout(g, cert, "s", [0, 0], "t", [1, 0])
        assert res.status == "exhausted"
        assert not res.ok

    def test_fingerprint_mismatch_rejected(self):
        g = build_two_segment_scenario()
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        other = point_graph({"s": [0.0, 0.0], "t": [1.0, 0.0]}, [("s", "t")],
                            ["s"], ["t"])
        with pytest.raises(ValueError, match="different scenario"):
            rollout(other, cert, "s", [0, 0], "t", [1, 0])

    def test_success_cost_not_below_oracle(self):
        g = build_two_segment_scenario()
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        res = rollout(g, cert, "s", [0, -2], "t", [8, -2], horizon=2)
        assert res.ok
        oracle = exact_sppgcs(g, "s", [0, -2], "t", [8, -2], max_path_edges=3)
        assert res.cost >= oracle.cost - 1e-6
        assert not g.validate_trajectory(res.trajectory)


class TestLookaheadValue:
    def test_full_horizon_matches_oracle(self):
        g = point_graph({"s": [0.0, 0.0], "a": [1.0, 1.0], "t": [2.0, 0.0]},
                        [("s", "a"), ("a", "t"), ("s", "t")], ["s"], ["t"])
        g.source_distribution = {"s": {"kind": "point_mass",
                                       "point": [0.0, 0.0], "weight": 1.0}}
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        val = lookahead_value(g, cert, "s", [0, 0], "t", x_t=[2, 0], horizon=2)
        oracle = exact_sppgcs(g, "s", [0, 0], "t", [2, 0], max_path_edges=2)
        assert val == pytest.approx(oracle.cost, abs=1e-6)

    def test_at_target_is_zero(self):
        g = build_two_segment_scenario()
        cert = synthesize_bounds(g, "t", SynthesisOptions(penalties=False))
        assert lookahead_value(g, cert, "t", [8, -2], "t") == 0.0


class TestReoptimizePath:
    def test_two_edge_path_through_segment(self):
        g = build_two_segment_scenario()
        traj, cost = reoptimize_path(g, ("s", "w", "t"),
                                     np.array([0.0, -2.0]),
                                     np.array([8.0, -2.0]))
        # analytic optimum: reflect across the segment's line y=0
        assert cost == pytest.approx(40.0, abs=1e-6)
        assert not g.validate_trajectory(traj)

    def test_reverse_trajectory_on_symmetric_graph(self):
        g = build_two_segment_scenario()
        traj, cost = reoptimize_path(g, ("s", "w", "t"),
                                     np.array([0.0, -2.0]),
                                     np.array([8.0, -2.0]))
        rev = reverse_trajectory(g, traj)
        assert rev.path == ("t", "w", "s")
        assert g.trajectory_cost(rev) == pytest.approx(g.trajectory_cost(traj),
                                                       abs=1e-9)
        assert g.trajectory_cost(rev) == pytest.approx(cost, abs=1e-6)
