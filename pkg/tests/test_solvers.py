"""Conic program wrapper: SDP and convex QP entry points."""

import numpy as np
import pytest

from gcsplan import ConvexSetDescription, QuadraticForm
from gcsplan.solvers import ConicProgram, solve_convex_qp, solve_sdp


class TestSolveSdp:
    def test_psd_boundary(self):
        # maximize t subject to [[1, t], [t, 1]] PSD -> t = 1
        import cvxpy as cp
        prog = ConicProgram()
        t = prog.add_scalar("t")
        prog.require_psd(cp.bmat([[cp.Constant(1.0), t], [t, cp.Constant(1.0)]]))
        prog.set_maximize(t)
        res = solve_sdp(prog)
        assert res.ok
        assert res.objective_value == pytest.approx(1.0, abs=1e-6)

    def test_scalar_lp(self):
        prog = ConicProgram()
        j = prog.add_scalar("j")
        prog.add_constraint(j <= 5)
        prog.set_maximize(j)
        res = solve_sdp(prog)
        assert res.ok
        assert res.objective_value == pytest.approx(5.0, abs=1e-7)

    def test_chain_lp_matches_classical(self):
        # cost-to-go LP on a chain s -> a -> t with lengths 2 and 3:
        # maximize J_s subject to J_s <= 2 + J_a, J_a <= 3 + J_t, J_t = 0
        prog = ConicProgram()
        js = prog.add_scalar("js")
        ja = prog.add_scalar("ja")
        jt = prog.add_scalar("jt")
        prog.add_constraint(js <= 2 + ja)
        prog.add_constraint(ja <= 3 + jt)
        prog.add_constraint(jt == 0)
        prog.set_maximize(js)
        res = solve_sdp(prog)
        assert res.ok
        assert res.objective_value == pytest.approx(5.0, abs=1e-7)

    def test_unbounded_status(self):
        prog = ConicProgram()
        j = prog.add_scalar("j")
        prog.set_maximize(j)
        res = solve_sdp(prog)
        assert res.status == "unbounded"

    def test_infeasible_status(self):
        prog = ConicProgram()
        j = prog.add_scalar("j", nonneg=True)
        prog.add_constraint(j <= -1)
        prog.set_maximize(j)
        res = solve_sdp(prog)
        assert res.status == "infeasible"

    def test_determinism(self):
        values = []
        for _ in range(2):
            prog = ConicProgram()
            t = prog.add_scalar("t")
            prog.add_constraint(t <= 3)
            prog.set_maximize(t)
            values.append(solve_sdp(prog).objective_value)
        assert abs(values[0] - values[1]) <= 1e-9

    def test_dump(self, tmp_path):
        prog = ConicProgram()
        t = prog.add_scalar("t")
        prog.add_constraint(t <= 1)
        prog.set_maximize(t)
        out = tmp_path / "prog.txt"
        prog.dump(out)
        assert out.read_text()


class TestSolveConvexQp:
    def test_projection_onto_box(self):
        obj = QuadraticForm.from_blocks(quad=np.eye(2), linear=[-6.0, -8.0],
                                        constant=25.0)
        box = ConvexSetDescription.box([0.0, 0.0], [1.0, 1.0])
        res = solve_convex_qp(obj, [box])
        assert res.ok
        assert res.objective_value == pytest.approx(13.0, abs=1e-6)
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)

    def test_equality_slice(self):
        obj = QuadraticForm.squared_norm(2)
        pinned = ConvexSetDescription(dimension=2,
                                      affine_eqs=(((1.0, 0.0), 1.0),))
        box = ConvexSetDescription.box([0.0, 0.0], [2.0, 2.0])
        res = solve_convex_qp(obj, [pinned, box])
        assert res.ok
        assert res.objective_value == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-3)

    def test_two_segment_path_matches_oracle(self):
        from gcsplan.scenarios import build_two_segment_scenario
        from gcsplan.pathopt import solve_sequence
        from gcsplan import exact_sppgcs
        g = build_two_segment_scenario()
        x_s = np.array([0.0, -2.0])
        x_t = np.array([8.0, -2.0])
        result, _ = solve_sequence(g, ("s", "w", "t"),
                                   fixed={0: x_s, 2: x_t})
        assert result.ok
        sub = exact_sppgcs(g, "s", x_s, "t", x_t, max_path_edges=2)
        assert result.objective_value == pytest.approx(sub.cost, abs=1e-6)

    def test_infeasible_is_signal_not_error(self):
        obj = QuadraticForm.squared_norm(1)
        a = ConvexSetDescription.box([0.0], [1.0])
        b = ConvexSetDescription.box([2.0], [3.0])
        res = solve_convex_qp(obj, [a, b])
        assert not res.ok
        assert res.status == "infeasible"
