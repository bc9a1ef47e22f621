"""Fixed-sequence convex programs: optimize the continuous points along a
given vertex sequence (repeats allowed, each visit gets its own point)."""

from __future__ import annotations

import numpy as np

from .graph import GcsGraph, Trajectory
from .quadratic import QuadraticForm
from .sets import ConvexSetDescription
from .solvers import SolveResult, solve_convex_qp


def sequence_program(graph: GcsGraph, sequence, fixed=None, terminal_bound=None):
    """Assemble the convex program for a vertex sequence.

    fixed: dict position -> point (pins the visit at that position).
    terminal_bound: optional QuadraticForm added on the last visit's point.
    Returns (objective, sets, offsets) with offsets[i] the variable offset of visit i.
    """
    sequence = list(sequence)
    fixed = fixed or {}
    dims = [graph.vertices[v].dimension for v in sequence]
    offsets = np.concatenate([[0], np.cumsum(dims)])[:-1]
    total = int(sum(dims))

    sets = []
    for i, v in enumerate(sequence):
        sets.append(graph.vertices[v].set.lifted(total, int(offsets[i])))
        if i in fixed:
            sets.append(ConvexSetDescription.point(fixed[i]).lifted(total, int(offsets[i])))

    objective = QuadraticForm.zero(total)
    for i in range(len(sequence) - 1):
        e = graph.edge(sequence[i], sequence[i + 1])
        idx = np.concatenate([np.arange(offsets[i], offsets[i] + dims[i]),
                              np.arange(offsets[i + 1], offsets[i + 1] + dims[i + 1])])
        objective = objective + e.length.lifted(total, idx)
        if e.joint_set is not None:
            js = e.joint_set
            lift_idx = idx
            lifted = _lift_set(js, total, lift_idx)
            sets.append(lifted)

    if terminal_bound is not None:
        i = len(sequence) - 1
        idx = np.arange(offsets[i], offsets[i] + dims[i])
        objective = objective + terminal_bound.lifted(total, idx)

    return objective, sets, offsets


def _lift_set(s: ConvexSetDescription, total: int, index_map) -> ConvexSetDescription:
    index_map = np.asarray(index_map, dtype=int)
    eqs, ineqs = [], []
    for a, b in s.affine_eqs:
        aa = np.zeros(total)
        aa[index_map] = a
        eqs.append((aa, b))
    for a, b in s.affine_ineqs:
        aa = np.zeros(total)
        aa[index_map] = a
        ineqs.append((aa, b))
    quads = tuple(q.lifted(total, index_map) for q in s.quad_ineqs)
    return ConvexSetDescription(dimension=total, affine_eqs=tuple(eqs),
                                affine_ineqs=tuple(ineqs), quad_ineqs=quads)


def solve_sequence(graph: GcsGraph, sequence, fixed=None, terminal_bound=None,
                   accuracy: float = 1e-8):
    """Solve the fixed-sequence program; returns (SolveResult, points or None)."""
    objective, sets, offsets = sequence_program(graph, sequence, fixed, terminal_bound)
    result = solve_convex_qp(objective, sets, accuracy=accuracy)
    if not result.ok:
        return result, None
    dims = [graph.vertices[v].dimension for v in sequence]
    pinned = fixed or {}
    points = []
    for i, (v, o, d) in enumerate(zip(sequence, offsets, dims)):
        p = result.x[int(o):int(o) + d]
        if i not in pinned:
            p = _snap_to_equalities(graph.vertices[v].set, p)
        points.append(p)
    return result, points


def _snap_to_equalities(set_, point):
    """Project a solver output onto the set's affine equalities, removing the
    solver's feasibility slack so downstream pinning and validation see points
    exactly on the constraint manifold."""
    eqs = set_.affine_eqs
    if not eqs:
        return point
    A = np.array([a for a, _ in eqs], dtype=float)
    b = np.array([c for _, c in eqs], dtype=float)
    corr, *_ = np.linalg.lstsq(A, A @ point - b, rcond=None)
    return point - corr


def reoptimize_path(graph: GcsGraph, path, source_point, target_point,
                    accuracy: float = 1e-8):
    """Solve the path-restricted problem with pinned endpoints.

    Returns (Trajectory, cost) or raises InfeasiblePathError.
    """
    path = list(path)
    fixed = {0: np.asarray(source_point, dtype=float),
             len(path) - 1: np.asarray(target_point, dtype=float)}
    result, points = solve_sequence(graph, path, fixed=fixed, accuracy=accuracy)
    if not result.ok:
        raise InfeasiblePathError(f"path {tuple(path)} is infeasible with pinned endpoints "
                                  f"(status {result.status})")
    return Trajectory(path=path, points=points), float(result.objective_value)


class InfeasiblePathError(RuntimeError):
    pass
