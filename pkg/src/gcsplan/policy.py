"""Online phase: greedy multi-step lookahead rollouts driven by the
synthesized cost-to-go lower bounds.

Each step enumerates the simple vertex sequences of a fixed lookahead depth
(shorter if they reach the target), optimizes the continuous points along
each with the bound as terminal cost, and commits to the first edge of the
best candidate. Vertices already visited are never revisited; dead ends
trigger depth-first backtracking with per-state exclusion of failed first
steps."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .graph import GcsGraph, Trajectory
from .pathopt import solve_sequence, reoptimize_path, InfeasiblePathError
from .quadratic import QuadraticForm
from .synthesis import LowerBoundCertificate

INF = math.inf
TIE_TOL = 1e-9
DEFAULT_MAX_ITERS = 10000


@dataclass(frozen=True)
class RolloutState:
    vertex: str
    point: np.ndarray
    visited: tuple                 # vertices already committed, in order
    excluded: frozenset = frozenset()   # first steps already ruled out here


@dataclass
class LookaheadCandidate:
    sequence: tuple
    value: float                   # +inf if the candidate program is infeasible
    points: list | None = None


@dataclass
class RolloutResult:
    status: str                    # success | exhausted | iteration_cap
    path: tuple
    trajectory: Trajectory | None = None    # re-optimized end to end
    committed: Trajectory | None = None     # points as committed step by step
    cost: float = INF
    iterations: int = 0
    backtracks: int = 0
    qps_solved: int = 0
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "success"


def _terminal_bound(cert: LowerBoundCertificate, vertex: str, x_t) -> QuadraticForm:
    J = cert.bounds[vertex]
    if cert.target_mode == "joint":
        if x_t is None:
            raise ValueError("joint target mode requires a target point")
        n_tgt = len(np.asarray(x_t).ravel())
        n_v = J.dimension - n_tgt
        return J.fixed(range(n_v, J.dimension), x_t)
    return J


def lookahead_candidates(graph: GcsGraph, vertex: str, target: str, horizon: int,
                         visited=(), excluded=frozenset()):
    """Simple sequences from vertex with exactly `horizon` edges, or fewer if
    they end at the target; visited vertices and excluded first steps are skipped."""
    if horizon < 1:
        raise ValueError("lookahead horizon must be at least 1")
    blocked = set(visited)
    blocked.add(vertex)
    out = []

    def extend(seq):
        last = seq[-1]
        depth = len(seq) - 1
        if last == target or depth == horizon:
            out.append(tuple(seq))
            return
        for w in graph.successors(last):
            if w in blocked or w in seq:
                continue
            if depth == 0 and w in excluded:
                continue
            seq.append(w)
            extend(seq)
            seq.pop()

    extend([vertex])
    return [seq for seq in out if len(seq) > 1]


def evaluate_candidate(graph: GcsGraph, cert: LowerBoundCertificate, sequence,
                       current_point, target: str, x_t=None,
                       accuracy: float = 1e-8) -> LookaheadCandidate:
    """Optimize the points along a candidate sequence: edge lengths plus the
    bound at the free end, or pinned arrival if the sequence reaches the target.
    Revisit penalties are deliberately left out of the online objective."""
    sequence = tuple(sequence)
    fixed = {0: np.asarray(current_point, dtype=float)}
    terminal = None
    if sequence[-1] == target:
        if x_t is not None:
            fixed[len(sequence) - 1] = np.asarray(x_t, dtype=float)
    else:
        terminal = _terminal_bound(cert, sequence[-1], x_t)
    result, points = solve_sequence(graph, sequence, fixed=fixed,
                                    terminal_bound=terminal, accuracy=accuracy)
    if not result.ok:
        return LookaheadCandidate(sequence=sequence, value=INF)
    return LookaheadCandidate(sequence=sequence, value=float(result.objective_value),
                              points=points)


def step_policy(graph: GcsGraph, cert: LowerBoundCertificate, state: RolloutState,
                target: str, x_t=None, horizon: int = 1,
                accuracy: float = 1e-8, stats: dict | None = None) -> LookaheadCandidate | None:
    """Best lookahead candidate from the current state, or None if every
    candidate is infeasible. Value ties within a small tolerance break
    lexicographically on the vertex sequence."""
    seqs = lookahead_candidates(graph, state.vertex, target, horizon,
                                visited=state.visited, excluded=state.excluded)
    best = None
    for seq in sorted(seqs):
        cand = evaluate_candidate(graph, cert, seq, state.point, target, x_t,
                                  accuracy=accuracy)
        if stats is not None:
            stats["qps"] = stats.get("qps", 0) + 1
        if cand.value == INF:
            continue
        if best is None or cand.value < best.value - TIE_TOL:
            best = cand
    return best


def lookahead_value(graph: GcsGraph, cert: LowerBoundCertificate, vertex: str,
                    point, target: str, x_t=None, horizon: int = 1,
                    accuracy: float = 1e-8) -> float:
    """Value of the lookahead program at a state with nothing visited yet;
    +inf when no candidate is feasible."""
    if vertex == target:
        return 0.0
    state = RolloutState(vertex=vertex, point=np.asarray(point, dtype=float), visited=())
    best = step_policy(graph, cert, state, target, x_t, horizon, accuracy)
    return INF if best is None else best.value


def rollout(graph: GcsGraph, cert: LowerBoundCertificate, source: str, x_s,
            target: str, x_t, horizon: int = 1, max_iters: int = DEFAULT_MAX_ITERS,
            accuracy: float = 1e-8) -> RolloutResult:
    """Run the lookahead policy from (source, x_s) until the target, with
    depth-first backtracking over dead ends; on arrival the committed path is
    re-optimized end to end with both endpoints pinned."""
    if source not in graph.vertices or target not in graph.vertices:
        raise KeyError("unknown source or target vertex")
    x_s = np.asarray(x_s, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    if cert.graph_fingerprint != graph.fingerprint():
        raise ValueError("certificate was synthesized for a different scenario")

    # frames[i] = [vertex, point, excluded first steps at this state]
    frames = [[source, x_s, set()]]
    iterations = 0
    backtracks = 0
    stats = {"qps": 0}
    t0 = time.perf_counter()

    def finish(status, path, trajectory=None, committed=None, cost=INF):
        return RolloutResult(status=status, path=path, trajectory=trajectory,
                             committed=committed, cost=cost,
                             iterations=iterations, backtracks=backtracks,
                             qps_solved=stats["qps"],
                             wall_time=time.perf_counter() - t0)

    while True:
        vertex = frames[-1][0]
        if vertex == target:
            path = tuple(f[0] for f in frames)
            committed = Trajectory(path=path, points=[f[1] for f in frames])
            try:
                traj, cost = reoptimize_path(graph, path, x_s, x_t, accuracy=accuracy)
            except InfeasiblePathError:
                # arrival was certified step by step; treat as numerical failure
                return finish("exhausted", path)
            return finish("success", path, trajectory=traj, committed=committed,
                          cost=cost)
        if iterations >= max_iters:
            return finish("iteration_cap", tuple(f[0] for f in frames))
        iterations += 1
        visited = tuple(f[0] for f in frames[:-1])
        state = RolloutState(vertex=vertex, point=frames[-1][1], visited=visited,
                             excluded=frozenset(frames[-1][2]))
        best = step_policy(graph, cert, state, target, x_t, horizon, accuracy, stats=stats)
        if best is None:
            # dead end: back up and rule this first step out at the parent
            if len(frames) == 1:
                return finish("exhausted", (source,))
            dead = frames.pop()
            frames[-1][2].add(dead[0])
            backtracks += 1
            continue
        next_vertex = best.sequence[1]
        frames.append([next_vertex, best.points[1], set()])


def reverse_trajectory(graph: GcsGraph, trajectory: Trajectory) -> Trajectory:
    """Reverse a trajectory on a symmetric graph (every edge paired with a
    reverse edge of identical length and joint constraints)."""
    path = list(trajectory.path)
    for u, v in zip(path, path[1:]):
        if not graph.has_edge(v, u):
            raise ValueError(f"graph has no reverse edge ({v}, {u})")
        fwd, rev = graph.edge(u, v), graph.edge(v, u)
        same_len = np.abs(fwd.length.coeffs - _swap_blocks(rev.length,
                          graph.vertices[v].dimension,
                          graph.vertices[u].dimension)).max() <= 1e-12
        if not same_len:
            raise ValueError(f"edge ({u}, {v}) and its reverse have different lengths")
    return Trajectory(path=tuple(reversed(path)),
                      points=list(reversed(trajectory.points)))


def _swap_blocks(form: QuadraticForm, n_first: int, n_second: int) -> np.ndarray:
    """Coefficients of the form with its two variable blocks exchanged."""
    idx = np.concatenate([np.arange(n_second, n_second + n_first),
                          np.arange(0, n_second)])
    return form.lifted(n_first + n_second, idx).coeffs
