"""Thin solver layer for the two program classes used by the pipeline:
semidefinite programs (offline synthesis) and small convex QPs (online lookahead)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .quadratic import QuadraticForm
from .sets import ConvexSetDescription

DEFAULT_SDP_ACCURACY = 1e-8
DEFAULT_QP_ACCURACY = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolveResult:
    status: str
    objective_value: float | None = None
    x: np.ndarray | None = None            # stacked scalar variables (QP path)
    values: dict = field(default_factory=dict)  # named variable values (SDP path)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class ConicProgram:
    """Conic program with scalar variables, PSD matrix blocks, a linear
    objective, and affine constraints. Backed by cvxpy."""

    def __init__(self):
        import cvxpy as cp

        self._cp = cp
        self._vars: dict[str, object] = {}
        self._constraints = []
        self._objective = None
        self._sense = "maximize"

    def add_scalar(self, name: str, nonneg: bool = False):
        v = self._cp.Variable(nonneg=nonneg, name=name)
        self._vars[name] = v
        return v

    def add_psd_block(self, name: str, n: int):
        v = self._cp.Variable((n, n), PSD=True, name=name)
        self._vars[name] = v
        return v

    def add_symmetric(self, name: str, n: int):
        v = self._cp.Variable((n, n), symmetric=True, name=name)
        self._vars[name] = v
        return v

    def add_vector(self, name: str, n: int, nonneg: bool = False):
        v = self._cp.Variable(n, nonneg=nonneg, name=name)
        self._vars[name] = v
        return v

    def add_constraint(self, con):
        self._constraints.append(con)

    def require_psd(self, expr):
        # slices of symmetric variables are not tracked as symmetric; the
        # symmetrized expression agrees with the intended matrix
        if not isinstance(expr, np.ndarray):
            expr = 0.5 * (expr + expr.T)
        self._constraints.append(expr >> 0)

    def set_maximize(self, expr):
        self._objective = expr
        self._sense = "maximize"

    def set_minimize(self, expr):
        self._objective = expr
        self._sense = "minimize"

    def dump(self, path):
        """Write the compiled sparse conic data for external verification."""
        import json

        cp = self._cp
        obj = cp.Maximize(self._objective) if self._sense == "maximize" else cp.Minimize(self._objective)
        prob = cp.Problem(obj, self._constraints)
        data, _, _ = prob.get_problem_data(cp.CLARABEL)
        doc = {}
        for key in ("c", "b"):
            if key in data:
                doc[key] = np.asarray(data[key]).ravel().tolist()
        if "A" in data:
            A = data["A"].tocoo()
            doc["A"] = {"shape": list(A.shape), "row": A.row.tolist(),
                        "col": A.col.tolist(), "val": A.data.tolist()}
        with open(path, "w") as f:
            json.dump(doc, f)

    def solve(self, accuracy: float = DEFAULT_SDP_ACCURACY, max_iters: int | None = None) -> SolveResult:
        cp = self._cp
        obj = cp.Maximize(self._objective) if self._sense == "maximize" else cp.Minimize(self._objective)
        prob = cp.Problem(obj, self._constraints)
        t0 = time.perf_counter()
        kwargs = {"tol_gap_abs": accuracy, "tol_gap_rel": accuracy,
                  "tol_feas": accuracy}
        if max_iters is not None:
            kwargs["max_iter"] = max_iters
        try:
            prob.solve(solver=cp.CLARABEL, **kwargs)
        except cp.error.SolverError:
            return SolveResult(status=NUMERICAL_FAILURE)
        wall = time.perf_counter() - t0
        status = _map_cvxpy_status(prob.status)
        result = SolveResult(status=status, stats={"wall_time": wall, "solver_status": prob.status})
        if status == OPTIMAL:
            result.objective_value = float(prob.value)
            result.values = {name: (np.array(v.value) if v.value is not None else None)
                             for name, v in self._vars.items()}
        return result


def _map_cvxpy_status(status: str) -> str:
    import cvxpy as cp

    if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return OPTIMAL
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return INFEASIBLE
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return UNBOUNDED
    return NUMERICAL_FAILURE


def solve_sdp(program: ConicProgram, accuracy: float = DEFAULT_SDP_ACCURACY,
              max_iters: int | None = None) -> SolveResult:
    return program.solve(accuracy=accuracy, max_iters=max_iters)


def solve_convex_qp(objective: QuadraticForm, sets, accuracy: float = DEFAULT_QP_ACCURACY) -> SolveResult:
    """Minimize a convex quadratic over the intersection of convex sets on one
    stacked variable. Infeasibility is a normal status, not an exception."""
    n = objective.dimension
    for s in sets:
        if s.dimension != n:
            raise ValueError("all sets must constrain the full stacked variable")
    has_quads = any(s.quad_ineqs for s in sets)
    if not has_quads:
        result = _solve_qp_cvxopt(objective, sets, accuracy)
        if result is not None:
            return result
    return _solve_qp_cvxpy(objective, sets, accuracy)


def _stack_affine(sets):
    eqs_a, eqs_b, ineqs_a, ineqs_b = [], [], [], []
    for s in sets:
        for a, b in s.affine_eqs:
            eqs_a.append(a)
            eqs_b.append(b)
        for a, b in s.affine_ineqs:
            ineqs_a.append(a)
            ineqs_b.append(b)
    return eqs_a, eqs_b, ineqs_a, ineqs_b


def _solve_qp_cvxopt(objective: QuadraticForm, sets, accuracy: float) -> SolveResult | None:
    """Dense cvxopt path for affine-constrained QPs; returns None to fall back."""
    from cvxopt import matrix, solvers
    from scipy.linalg import qr as _scipy_qr

    n = objective.dimension
    eqs_a, eqs_b, ineqs_a, ineqs_b = _stack_affine(sets)

    # fully pinned variables admit a direct solution
    A_red = b_red = None
    if eqs_a:
        A = np.array(eqs_a)
        b = np.array(eqs_b)
        x0, res, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        resid = np.linalg.norm(A @ x0 - b)
        if resid > 1e-6:
            return SolveResult(status=INFEASIBLE)
        if resid > 0.0:
            # points pinned from a previous solve sit a solver tolerance off
            # the set manifold; use the nearest consistent right-hand side
            b = A @ x0
        if rank == n:
            for a, c in zip(ineqs_a, ineqs_b):
                if a @ x0 - c > 1e-9:
                    return SolveResult(status=INFEASIBLE)
            return SolveResult(status=OPTIMAL, objective_value=objective(x0), x=x0)
        # cvxopt requires full-rank equalities; keep an independent row subset
        # (the residual check above already certified the dropped rows)
        if rank < A.shape[0]:
            _, _, pivots = _scipy_qr(A.T, pivoting=True, mode="economic")
            keep = np.sort(pivots[:rank])
            A_red, b_red = A[keep], b[keep]
        else:
            A_red, b_red = A, b

    P = matrix(2.0 * objective.quad_block)
    q = matrix(objective.linear_coeff)
    G = matrix(np.array(ineqs_a)) if ineqs_a else matrix(np.zeros((0, n)))
    h = matrix(np.array(ineqs_b, dtype=float)) if ineqs_b else matrix(np.zeros(0))
    kwargs = {}
    if A_red is not None:
        kwargs["A"] = matrix(A_red)
        kwargs["b"] = matrix(np.asarray(b_red, dtype=float))
    options = {"show_progress": False, "abstol": accuracy, "reltol": accuracy,
               "feastol": max(accuracy, 1e-9), "maxiters": 200}
    t0 = time.perf_counter()
    try:
        sol = solvers.qp(P, q, G, h, options=options, **kwargs)
    except (ValueError, ArithmeticError, ZeroDivisionError):
        return None
    wall = time.perf_counter() - t0
    if sol["status"] == "optimal":
        x = np.array(sol["x"]).ravel()
        return SolveResult(status=OPTIMAL, objective_value=objective(x) + 0.0, x=x,
                           stats={"wall_time": wall, "iterations": sol.get("iterations")})
    if sol["status"] == "primal infeasible":
        return SolveResult(status=INFEASIBLE, stats={"wall_time": wall})
    return None  # unknown / dual infeasible: retry with the conic solver


def _solve_qp_cvxpy(objective: QuadraticForm, sets, accuracy: float) -> SolveResult:
    import cvxpy as cp

    n = objective.dimension
    x = cp.Variable(n)
    cons = []
    for s in sets:
        cons.extend(s.cvxpy_constraints(x))
    obj = cp.quad_form(x, cp.psd_wrap(objective.quad_block)) \
        + objective.linear_coeff @ x + objective.constant_coeff
    prob = cp.Problem(cp.Minimize(obj), cons)
    t0 = time.perf_counter()
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=accuracy, tol_gap_rel=accuracy,
                   tol_feas=accuracy)
    except cp.error.SolverError:
        return SolveResult(status=NUMERICAL_FAILURE)
    wall = time.perf_counter() - t0
    status = _map_cvxpy_status(prob.status)
    if status == OPTIMAL:
        xv = np.array(x.value).ravel()
        return SolveResult(status=OPTIMAL, objective_value=objective(xv), x=xv,
                           stats={"wall_time": wall})
    return SolveResult(status=status, stats={"wall_time": wall})
