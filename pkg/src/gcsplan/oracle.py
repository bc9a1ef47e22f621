"""Ground-truth solvers: exhaustive path/walk enumeration with per-sequence
convex optimization, and classical all-pairs shortest paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import GcsGraph, Trajectory
from .pathopt import solve_sequence

DEFAULT_PATH_GUARD = 10 ** 6
INF = math.inf


@dataclass
class OracleSolution:
    cost: float                      # +inf if infeasible
    path: tuple | None = None
    trajectory: Trajectory | None = None
    paths_examined: int = 0

    @property
    def feasible(self) -> bool:
        return self.cost < INF


class PathGuardExceeded(RuntimeError):
    """The instance is too large for exhaustive enumeration."""


def _edge_min_lengths(graph: GcsGraph) -> dict:
    """Per-edge lower bound on the length over the feasible joint set (cached)."""
    cache = getattr(graph, "_edge_min_cache", None)
    if cache is not None:
        return cache
    from .solvers import solve_convex_qp
    from .pathopt import _lift_set

    cache = {}
    for e in graph.edges:
        nt = graph.vertices[e.tail].dimension
        nh = graph.vertices[e.head].dimension
        total = nt + nh
        sets = [graph.vertices[e.tail].set.lifted(total, 0),
                graph.vertices[e.head].set.lifted(total, nt)]
        if e.joint_set is not None:
            sets.append(_lift_set(e.joint_set, total, np.arange(total)))
        res = solve_convex_qp(e.length, sets)
        cache[e.key] = max(0.0, res.objective_value) if res.ok else 0.0
    graph._edge_min_cache = cache
    return cache


def _sequence_lower_bound(graph, seq, x_s, x_t, edge_mins, squared_dist):
    lb = sum(edge_mins[(u, v)] for u, v in zip(seq, seq[1:]))
    if squared_dist:
        k = len(seq) - 1
        if k > 0:
            disp = float(np.sum((np.asarray(x_t) - np.asarray(x_s)) ** 2))
            lb = max(lb, disp / k)
    return lb


def _pair_min_lengths(graph: GcsGraph) -> dict:
    """Per-pair lower bound on the summed length of two consecutive edges
    (u, v), (v, w) over the joint feasible set (cached)."""
    cache = getattr(graph, "_pair_min_cache", None)
    if cache is not None:
        return cache
    from .solvers import solve_convex_qp
    from .pathopt import _lift_set

    cache = {}
    for e in graph.edges:
        u, v = e.key
        for f in graph.edges:
            if f.tail != v:
                continue
            w = f.head
            nu = graph.vertices[u].dimension
            nv = graph.vertices[v].dimension
            nw = graph.vertices[w].dimension
            total = nu + nv + nw
            sets = [graph.vertices[u].set.lifted(total, 0),
                    graph.vertices[v].set.lifted(total, nu),
                    graph.vertices[w].set.lifted(total, nu + nv)]
            if e.joint_set is not None:
                sets.append(_lift_set(e.joint_set, total, np.arange(nu + nv)))
            if f.joint_set is not None:
                sets.append(_lift_set(f.joint_set, total,
                                      np.arange(nu, nu + nv + nw)))
            obj = (e.length.lifted(total, np.arange(nu + nv)) +
                   f.length.lifted(total, np.arange(nu, nu + nv + nw)))
            res = solve_convex_qp(obj, sets)
            cache[(u, v, w)] = max(0.0, res.objective_value) if res.ok else 0.0
    graph._pair_min_cache = cache
    return cache


def _pair_min_to_target(graph: GcsGraph, t: str, edge_mins: dict,
                        pair_mins: dict) -> dict:
    """Per-edge admissible remaining cost: for a path starting with edge e and
    ending at t, cost >= edge_min(e)/2 + sum of pair_min/2 over consecutive
    edge pairs + edge_min(last)/2, minimized by a shortest path on the edge
    graph. Returned keyed by edge; entries are lower bounds on the full cost
    of any such path (including edge e itself)."""
    import heapq

    # Dijkstra backwards over the edge graph; the transition weight
    # pair_min/2 + edge_min(e)/2 - edge_min(f)/2 is nonnegative because
    # pair_min >= edge_min(e) + edge_min(f)
    by_head = {}
    for e in edge_mins:
        by_head.setdefault(e[1], []).append(e)
    dist = {}
    heap = []
    for e, c in edge_mins.items():
        if e[1] == t:
            dist[e] = float(c)
            heapq.heappush(heap, (dist[e], e))
    while heap:
        d, f = heapq.heappop(heap)
        if d > dist.get(f, INF):
            continue
        for e in by_head.get(f[0], []):
            pm = pair_mins.get((e[0], e[1], f[1]), edge_mins[e] + edge_mins[f])
            cand = d - edge_mins[f] / 2.0 + pm / 2.0 + edge_mins[e] / 2.0
            if cand < dist.get(e, INF) - 1e-15:
                dist[e] = cand
                heapq.heappush(heap, (cand, e))
    return dist


def _pinned_edge_mins(graph: GcsGraph, s: str, x_s) -> dict:
    """Minimum length of each out-edge of s with the tail pinned at x_s,
    keyed by head vertex (per-query; not cached)."""
    from .solvers import solve_convex_qp

    x_s = np.asarray(x_s, dtype=float)
    out = {}
    for e in graph.edges:
        if e.tail != s:
            continue
        nt = graph.vertices[s].dimension
        # dropping any joint edge constraint keeps this a valid lower bound
        pinned = e.length.fixed(range(nt), x_s)
        res = solve_convex_qp(pinned, [graph.vertices[e.head].set])
        out[e.head] = max(0.0, res.objective_value) if res.ok else 0.0
    return out


def _displacement_floors(graph: GcsGraph, x_t) -> dict:
    """Per-vertex squared distance from the vertex set to the pinned target
    point (one small convex program per vertex)."""
    from .solvers import solve_convex_qp
    from .quadratic import QuadraticForm

    x_t = np.asarray(x_t, dtype=float)
    out = {}
    for v, vert in graph.vertices.items():
        n = vert.dimension
        if n != len(x_t):
            out[v] = 0.0
            continue
        obj = QuadraticForm.from_blocks(quad=np.eye(n), linear=-2.0 * x_t,
                                        constant=float(x_t @ x_t))
        res = solve_convex_qp(obj, [vert.set])
        out[v] = max(0.0, res.objective_value) if res.ok else 0.0
    return out


def _min_cost_to_target(graph: GcsGraph, t: str, edge_mins: dict) -> dict:
    """Admissible remaining-cost heuristic: classical shortest distances to t
    over the per-edge minimum lengths."""
    tables = floyd_warshall(tuple(sorted(graph.vertices)), edge_mins)
    idx = tables.vertices.index(t)
    return {v: float(tables.cost[i, idx]) for i, v in enumerate(tables.vertices)}


def exact_sppgcs(graph: GcsGraph, s: str, x_s, t: str, x_t,
                 max_path_edges: int, path_guard: int = DEFAULT_PATH_GUARD,
                 accuracy: float = 1e-8) -> OracleSolution:
    """Exact shortest path between pinned endpoints: depth-first search over
    simple s-t paths up to max_path_edges with one convex program per complete
    path, pruned by admissible lower bounds (per-edge minimum lengths, their
    classical shortest-path completion, and a displacement bound)."""
    if s not in graph.vertices or t not in graph.vertices:
        raise KeyError("unknown source or target vertex")
    x_s = np.asarray(x_s, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    edge_mins = _edge_min_lengths(graph)
    pair_mins = _pair_min_lengths(graph)
    min_to_t = _min_cost_to_target(graph, t, edge_mins)
    pair_to_t = _pair_min_to_target(graph, t, edge_mins, pair_mins)
    hops_to_t = _min_cost_to_target(graph, t, {k: 1.0 for k in edge_mins})
    squared = graph.all_squared_distance_lengths()
    # squared-distance paths with m edges from x to x_t cost at least
    # |x_t - x|^2 / m (Cauchy-Schwarz), so precompute per-vertex floors
    disp_sq = _displacement_floors(graph, x_t) if squared else None
    succ = {v: graph.successors(v) for v in graph.vertices}
    start_mins = _pinned_edge_mins(graph, s, x_s)

    best = OracleSolution(cost=INF)
    nodes = 0

    def dfs(seq, on_path, lbs):
        # lbs[k] is a running lower bound on the cost of seq[:k+1]; the
        # recursion pairs consecutive edges so horizontal detours are charged
        nonlocal nodes
        nodes += 1
        if nodes > path_guard:
            raise PathGuardExceeded(f"search tree exceeds the guard of {path_guard}")
        v = seq[-1]
        if v == t:
            best.paths_examined += 1
            result, points = solve_sequence(graph, seq, fixed={0: x_s, len(seq) - 1: x_t},
                                            accuracy=accuracy)
            if result.ok and result.objective_value < best.cost - 1e-12:
                best.cost = float(result.objective_value)
                best.path = tuple(seq)
                best.trajectory = Trajectory(path=tuple(seq), points=points)
            return
        if len(seq) - 1 == max_path_edges:
            return
        budget = max_path_edges - len(seq)
        children = []
        for w in succ[v]:
            f = (v, w)
            if w in on_path or hops_to_t.get(w, INF) > budget or f not in pair_to_t:
                continue
            first = max(edge_mins[f], start_mins.get(w, 0.0)) if len(seq) == 1 \
                else edge_mins[f]
            child_lb = lbs[-1] + first
            if len(seq) >= 2:
                child_lb = max(child_lb, lbs[-2] + pair_mins[(seq[-2], v, w)])
            rem_w = 0.0
            if w != t:
                rem_w = min_to_t[w]
                if disp_sq is not None and budget > 0:
                    rem_w = max(rem_w, disp_sq[w] / budget)
            lb = max(lbs[-1] + pair_to_t[f], child_lb + rem_w)
            children.append((lb, child_lb, w))
        # most promising child first: good incumbents make the pruning bite
        for lb, child_lb, w in sorted(children):
            if best.cost < INF and lb >= best.cost - 1e-12:
                continue
            seq.append(w)
            on_path.add(w)
            lbs.append(child_lb)
            dfs(seq, on_path, lbs)
            lbs.pop()
            on_path.discard(w)
            seq.pop()

    dfs([s], {s}, [0.0])
    return best


def relaxed_walk_oracle(graph: GcsGraph, s: str, x_s, t: str, x_t,
                        max_walk_edges: int | None = None,
                        path_guard: int = DEFAULT_PATH_GUARD,
                        accuracy: float = 1e-8) -> OracleSolution:
    """Minimum cost over s-t walks (vertex revisits allowed); lower-bounds
    exact_sppgcs by feasible-set containment."""
    if max_walk_edges is None:
        max_walk_edges = 2 * len(graph.vertices)
    succ = {v: graph.successors(v) for v in graph.vertices}
    walks = []

    def extend(seq):
        if len(walks) > path_guard:
            raise PathGuardExceeded(f"walk count exceeds the guard of {path_guard}")
        v = seq[-1]
        if v == t:
            walks.append(tuple(seq))
            return
        if len(seq) - 1 == max_walk_edges:
            return
        for w in succ[v]:
            seq.append(w)
            extend(seq)
            seq.pop()

    extend([s])
    return _best_over_sequences(graph, walks, x_s, x_t, accuracy)


def _best_over_sequences(graph, sequences, x_s, x_t, accuracy) -> OracleSolution:
    x_s = np.asarray(x_s, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    edge_mins = _edge_min_lengths(graph)
    squared = graph.all_squared_distance_lengths()
    best = OracleSolution(cost=INF, paths_examined=len(sequences))
    order = sorted(range(len(sequences)), key=lambda i: (len(sequences[i]), sequences[i]))
    for i in order:
        seq = sequences[i]
        if best.cost < INF:
            lb = _sequence_lower_bound(graph, seq, x_s, x_t, edge_mins, squared)
            if lb >= best.cost - 1e-12:
                continue
        fixed = {0: x_s, len(seq) - 1: x_t}
        result, points = solve_sequence(graph, seq, fixed=fixed, accuracy=accuracy)
        if not result.ok:
            continue
        if result.objective_value < best.cost - 1e-12 or (
                abs(result.objective_value - best.cost) <= 1e-12 and
                (best.path is None or seq < best.path)):
            best.cost = float(result.objective_value)
            best.path = seq
            best.trajectory = Trajectory(path=seq, points=points)
    return best


@dataclass
class DiscreteApspTables:
    vertices: tuple
    cost: np.ndarray        # cost[v, t] = shortest v-t distance, +inf if none
    successor: dict         # (v, t) -> next vertex on a shortest v-t path

    def cost_between(self, v: str, t: str) -> float:
        i, j = self.vertices.index(v), self.vertices.index(t)
        return float(self.cost[i, j])

    def walk(self, v: str, t: str):
        """Follow the successor matrix from v to t."""
        path = [v]
        while path[-1] != t:
            nxt = self.successor.get((path[-1], t))
            if nxt is None:
                return None
            path.append(nxt)
        return path


def floyd_warshall(vertices, edge_costs: dict) -> DiscreteApspTables:
    """All-pairs shortest paths on a discrete graph with nonnegative edge costs.

    edge_costs maps (tail, head) -> cost.
    """
    vertices = tuple(vertices)
    index = {v: i for i, v in enumerate(vertices)}
    n = len(vertices)
    for (u, v), c in edge_costs.items():
        if c < 0:
            raise ValueError(f"negative edge cost on ({u}, {v})")
    D = np.full((n, n), INF)
    np.fill_diagonal(D, 0.0)
    for (u, v), c in edge_costs.items():
        D[index[u], index[v]] = min(D[index[u], index[v]], float(c))
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    successor = {}
    for ti, t in enumerate(vertices):
        for vi, v in enumerate(vertices):
            if v == t or not np.isfinite(D[vi, ti]):
                continue
            # greedy one-step lookahead on the cost-to-go
            best_w, best_val = None, INF
            for (u, w), c in sorted(edge_costs.items()):
                if u != v:
                    continue
                val = c + D[index[w], ti]
                if val < best_val - 1e-12:
                    best_val, best_w = val, w
            successor[(v, t)] = best_w
    return DiscreteApspTables(vertices=vertices, cost=D, successor=successor)
