"""Scenario builders: seeded random 2D box environments, smooth-curve
control-point graphs, and the fixed small instances used throughout the
test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import GcsGraph, GcsVertex, GcsEdge
from .quadratic import QuadraticForm
from .sets import ConvexSetDescription


class ScenarioGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvGenParams:
    seed: int = 0
    n_boxes: int = 10
    world: float = 10.0
    min_size: float = 1.5
    max_size: float = 4.0
    retries: int = 200
    joint_midpoint_sets: bool = False   # constrain segment midpoints to overlaps


def _boxes_overlap(lo_a, hi_a, lo_b, hi_b, margin: float = 1e-9):
    lo = np.maximum(lo_a, lo_b)
    hi = np.minimum(hi_a, hi_b)
    return np.all(hi - lo > margin), lo, hi


def _components(n, adjacency):
    seen = set()
    comp = {}
    for start in range(n):
        if start in seen:
            continue
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            comp[v] = start
            stack.extend(adjacency[v])
    return comp


def generate_random_env(params: EnvGenParams) -> GcsGraph:
    """Random 2D environment: one vertex per axis-aligned box, a pair of
    directed squared-distance edges per overlapping box pair, a box source
    with a uniform distribution, and a singleton target inside the box
    farthest from the source. Deterministic in the seed; retries reseed
    until the overlap graph connects every box to the target."""
    for attempt in range(params.retries):
        rng = np.random.default_rng((params.seed, attempt))
        centers = rng.uniform(0.0, params.world, size=(params.n_boxes, 2))
        halves = rng.uniform(params.min_size / 2, params.max_size / 2,
                             size=(params.n_boxes, 2))
        los = np.clip(centers - halves, 0.0, params.world)
        his = np.clip(centers + halves, 0.0, params.world)

        adjacency = {i: [] for i in range(params.n_boxes)}
        overlaps = {}
        for i in range(params.n_boxes):
            for j in range(i + 1, params.n_boxes):
                hit, lo, hi = _boxes_overlap(los[i], his[i], los[j], his[j])
                if hit:
                    adjacency[i].append(j)
                    adjacency[j].append(i)
                    overlaps[(i, j)] = (lo, hi)
        comp = _components(params.n_boxes, adjacency)
        if len(set(comp.values())) != 1:
            continue

        source = 0
        dists = np.linalg.norm(centers - centers[source], axis=1)
        host = int(np.argmax(dists))
        target_point = 0.5 * (los[host] + his[host])

        g = GcsGraph(sources=["b0"], targets=["t"])
        for i in range(params.n_boxes):
            g.add_vertex(GcsVertex(f"b{i}", ConvexSetDescription.box(los[i], his[i])))
        g.add_vertex(GcsVertex("t", ConvexSetDescription.point(target_point)))
        sqd = QuadraticForm.squared_distance(2)
        for (i, j), (lo, hi) in sorted(overlaps.items()):
            joint = _midpoint_joint_set(lo, hi) if params.joint_midpoint_sets else None
            g.add_edge(GcsEdge(f"b{i}", f"b{j}", sqd, joint_set=joint))
            g.add_edge(GcsEdge(f"b{j}", f"b{i}", sqd, joint_set=joint))
        for i in range(params.n_boxes):
            if ConvexSetDescription.box(los[i], his[i]).contains(target_point):
                g.add_edge(GcsEdge(f"b{i}", "t", sqd))
        g.source_distribution = {"b0": {"kind": "uniform_box", "weight": 1.0,
                                        "lo": list(los[0]), "hi": list(his[0])}}
        return g
    raise ScenarioGenerationError(
        f"failed to generate a connected environment in {params.retries} attempts")


def _midpoint_joint_set(lo, hi) -> ConvexSetDescription:
    """(x, y) such that the segment midpoint (x + y) / 2 lies in [lo, hi]."""
    n = len(lo)
    ineqs = []
    for i in range(n):
        a = np.zeros(2 * n)
        a[i] = 0.5
        a[n + i] = 0.5
        ineqs.append((a.copy(), float(hi[i])))
        ineqs.append((-a, float(-lo[i])))
    return ConvexSetDescription(dimension=2 * n, affine_ineqs=tuple(ineqs))


# ---------------------------------------------------------------------------
# smooth-curve control-point graphs


def build_bezier_scenario(boxes, degree: int = 3, smoothness: int = 1,
                          source_index: int = 0, target_point=None) -> GcsGraph:
    """Each vertex variable stacks the control points of one polynomial curve
    piece inside a 2D box. Edges between overlapping boxes carry endpoint
    continuity (and derivative continuity up to the requested order) as joint
    equality constraints; the edge length sums the squared distances between
    the tail's consecutive control points. The target is a singleton where
    every control point coincides."""
    if degree < 1:
        raise ValueError("curve degree must be at least 1")
    if not 0 <= smoothness < degree:
        raise ValueError(f"smoothness order {smoothness} inconsistent with degree {degree}")
    boxes = [(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)) for lo, hi in boxes]
    dim = 2
    n_cp = degree + 1
    n = dim * n_cp

    def stacked_box(lo, hi):
        return ConvexSetDescription.product([ConvexSetDescription.box(lo, hi)] * n_cp)

    if target_point is None:
        target_point = 0.5 * (boxes[-1][0] + boxes[-1][1])
    target_point = np.asarray(target_point, dtype=float)

    g = GcsGraph(sources=[f"c{source_index}"], targets=["t"])
    for i, (lo, hi) in enumerate(boxes):
        g.add_vertex(GcsVertex(f"c{i}", stacked_box(lo, hi)))
    g.add_vertex(GcsVertex("t", ConvexSetDescription.point(np.tile(target_point, n_cp))))

    length = _internal_control_point_cost(dim, n_cp)

    def continuity_set(order):
        eqs = []
        for k in range(order + 1):
            # k-th forward difference at the tail's end equals the head's start
            for d in range(dim):
                a = np.zeros(2 * n)
                for j in range(k + 1):
                    c = (-1.0) ** (k - j) * _binom(k, j)
                    a[dim * (n_cp - 1 - k + j) + d] += c       # tail block
                    a[n + dim * j + d] -= c                    # head block
                eqs.append((a, 0.0))
        return ConvexSetDescription(dimension=2 * n, affine_eqs=tuple(eqs))

    joint_full = continuity_set(smoothness)
    joint_c0 = continuity_set(0)
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            hit, _, _ = _boxes_overlap(*boxes[i], *boxes[j])
            if hit:
                g.add_edge(GcsEdge(f"c{i}", f"c{j}", length, joint_set=joint_full))
                g.add_edge(GcsEdge(f"c{j}", f"c{i}", length, joint_set=joint_full))
    for i, (lo, hi) in enumerate(boxes):
        if ConvexSetDescription.box(lo, hi).contains(target_point):
            # only positional continuity into the coincident target stack
            g.add_edge(GcsEdge(f"c{i}", "t", length, joint_set=joint_c0))
    lo, hi = boxes[source_index]
    g.source_distribution = {f"c{source_index}": {
        "kind": "uniform_box", "weight": 1.0,
        "lo": list(np.tile(lo, n_cp)), "hi": list(np.tile(hi, n_cp))}}
    return g


def _binom(k, j):
    from math import comb
    return float(comb(k, j))


def _internal_control_point_cost(dim, n_cp) -> QuadraticForm:
    """Sum of squared distances between the tail's consecutive control points,
    as a function of the joint edge variable (tail stack, head stack)."""
    n = dim * n_cp
    total = QuadraticForm.zero(2 * n)
    sqd = QuadraticForm.squared_distance(dim)
    for i in range(n_cp - 1):
        idx = np.concatenate([np.arange(dim * i, dim * (i + 1)),
                              np.arange(dim * (i + 1), dim * (i + 2))])
        total = total + sqd.lifted(2 * n, idx)
    return total


# ---------------------------------------------------------------------------
# fixed instances


def build_two_segment_scenario() -> GcsGraph:
    """Four fully connected vertices (three points, one segment) with
    squared-distance lengths. The geometry is frozen so that the cheapest
    walk revisits the segment and is strictly cheaper than the cheapest
    simple path, which makes the revisit-penalty machinery observable."""
    s = np.array([0.0, -2.0])
    v = np.array([4.0, 2.0])
    t = np.array([8.0, -2.0])
    g = GcsGraph(sources=["s"], targets=["t"])
    g.add_vertex(GcsVertex("s", ConvexSetDescription.point(s)))
    g.add_vertex(GcsVertex("v", ConvexSetDescription.point(v)))
    g.add_vertex(GcsVertex("w", ConvexSetDescription.segment([1.0, 0.0], [7.0, 0.0])))
    g.add_vertex(GcsVertex("t", ConvexSetDescription.point(t)))
    sqd = QuadraticForm.squared_distance(2)
    ids = ["s", "v", "w", "t"]
    for a in ids:
        for b in ids:
            if a != b:
                g.add_edge(GcsEdge(a, b, sqd))
    g.source_distribution = {"s": {"kind": "point_mass", "weight": 1.0, "point": list(s)}}
    return g


def build_nine_vertex_scenario() -> GcsGraph:
    """Nine-vertex, 25-edge 2D instance with multiple cycles: a box source on
    top, two layers of three segments, a gate segment, and a singleton target
    at the bottom. Within-layer edge pairs form 2-cycles; a direct edge from
    the middle segment to the target competes with the gate route. Geometry
    frozen: the synthesized bounds are near-tight here, which makes shallow
    lookahead rollouts reliably optimal."""
    g = GcsGraph(sources=["src"], targets=["t"])
    seg = ConvexSetDescription.segment
    g.add_vertex(GcsVertex("src", ConvexSetDescription.box([4.0, 8.0], [6.0, 9.5])))
    g.add_vertex(GcsVertex("a1", seg([0.5, 6.5], [3.0, 6.5])))
    g.add_vertex(GcsVertex("a2", seg([4.0, 6.5], [6.0, 6.5])))
    g.add_vertex(GcsVertex("a3", seg([7.0, 6.5], [9.5, 6.5])))
    g.add_vertex(GcsVertex("b1", seg([0.5, 4.0], [3.0, 4.0])))
    g.add_vertex(GcsVertex("b2", seg([4.0, 4.0], [6.0, 4.0])))
    g.add_vertex(GcsVertex("b3", seg([7.0, 4.0], [9.5, 4.0])))
    g.add_vertex(GcsVertex("c", seg([3.5, 2.5], [6.5, 2.5])))
    g.add_vertex(GcsVertex("t", ConvexSetDescription.point([5.0, 1.5])))
    sqd = QuadraticForm.squared_distance(2)
    edges = [("src", "a1"), ("src", "a2"), ("src", "a3"),
             ("a1", "a2"), ("a2", "a1"), ("a2", "a3"), ("a3", "a2"),
             ("a1", "b1"), ("a1", "b2"), ("a1", "b3"),
             ("a2", "b1"), ("a2", "b2"), ("a2", "b3"),
             ("a3", "b1"), ("a3", "b2"), ("a3", "b3"),
             ("b1", "b2"), ("b2", "b1"), ("b2", "b3"), ("b3", "b2"),
             ("b1", "c"), ("b2", "c"), ("b3", "c"),
             ("c", "t"), ("b2", "t")]
    for u, v in edges:
        g.add_edge(GcsEdge(u, v, sqd))
    g.source_distribution = {"src": {"kind": "uniform_box", "weight": 1.0,
                                     "lo": [4.0, 8.0], "hi": [6.0, 9.5]}}
    return g


@dataclass(frozen=True)
class LayeredEnvParams:
    seed: int = 0
    n_layers: int = 12
    per_layer: int = 4
    width: float = 20.0
    layer_gap: float = 2.0
    gap_jitter: float = 0.6
    min_len: float = 0.75
    max_len: float = 2.5
    reach: float = 1.5               # max horizontal gap for a downward edge
    target_frac: float = 0.5         # target x position as a fraction of width
    src_frac: float = 0.5            # source box center, fraction of width


def generate_layered_env(params: LayeredEnvParams) -> GcsGraph:
    """Random corridor-style environment: a box source above stacked layers of
    disjoint horizontal segments, a singleton target below. Downward edges
    connect consecutive layers; horizontally adjacent segments within a layer
    form 2-cycles. Layers are vertically separated, so every edge has a
    strictly positive minimum length and branch-and-bound oracles stay exact
    at this scale."""
    rng = np.random.default_rng(params.seed)
    top = params.n_layers * params.layer_gap + params.layer_gap
    g = GcsGraph(sources=["src"], targets=["t"])
    src_x = params.src_frac * params.width
    src_lo = [src_x - 2.0, top]
    src_hi = [src_x + 2.0, top + 1.5]
    g.add_vertex(GcsVertex("src", ConvexSetDescription.box(src_lo, src_hi)))

    sqd = QuadraticForm.squared_distance(2)
    y = top
    layers = []
    layer_spans = []
    for k in range(params.n_layers):
        y -= params.layer_gap + rng.uniform(-params.gap_jitter, params.gap_jitter)
        # disjoint x-intervals left to right
        names = []
        spans = []
        cursor = rng.uniform(0.0, 2.0)
        for i in range(params.per_layer):
            length = rng.uniform(params.min_len, params.max_len)
            lo_x = cursor
            hi_x = min(lo_x + length, params.width)
            name = f"s{k}_{i}"
            g.add_vertex(GcsVertex(name, ConvexSetDescription.segment(
                [lo_x, y], [hi_x, y])))
            names.append(name)
            spans.append((lo_x, hi_x))
            cursor = hi_x + rng.uniform(1.0, 2.5)
            if cursor >= params.width - params.min_len:
                break
        layers.append(names)
        layer_spans.append(spans)

    target_point = np.array([params.target_frac * params.width,
                             y - params.layer_gap])
    g.add_vertex(GcsVertex("t", ConvexSetDescription.point(target_point)))

    for a, b in zip(["src"] * len(layers[0]), layers[0]):
        g.add_edge(GcsEdge(a, b, sqd))
    def x_gap(a, b):
        return max(a[0] - b[1], b[0] - a[1], 0.0)

    for k in range(len(layers) - 1):
        down = []
        for i, u in enumerate(layers[k]):
            for j, v in enumerate(layers[k + 1]):
                gap = x_gap(layer_spans[k][i], layer_spans[k + 1][j])
                down.append((gap, u, v))
                if gap <= params.reach:
                    g.add_edge(GcsEdge(u, v, sqd))
        # keep the layers connected even if nothing is within reach
        gap, u, v = min(down)
        if gap > params.reach:
            g.add_edge(GcsEdge(u, v, sqd))
        for u, v in zip(layers[k], layers[k][1:]):
            g.add_edge(GcsEdge(u, v, sqd))
            g.add_edge(GcsEdge(v, u, sqd))
    for u in layers[-1]:
        g.add_edge(GcsEdge(u, "t", sqd))
    g.source_distribution = {"src": {"kind": "uniform_box", "weight": 1.0,
                                     "lo": src_lo, "hi": src_hi}}
    return g


def build_singleton_digraph(seed: int, n_vertices: int = 20, edge_prob: float = 0.3,
                            dim: int = 2, max_cost: float = 10.0) -> GcsGraph:
    """Random digraph with singleton sets and constant nonnegative edge costs:
    the degenerate case where the continuous problem collapses to classical
    shortest paths. The source distribution spreads over every vertex so the
    synthesized bounds are pushed up at all of them."""
    rng = np.random.default_rng(seed)
    for attempt in range(200):
        points = rng.uniform(0.0, 10.0, size=(n_vertices, dim))
        names = [f"n{i}" for i in range(n_vertices)]
        edges = []
        for i in range(n_vertices):
            for j in range(n_vertices):
                if i != j and rng.random() < edge_prob:
                    edges.append((i, j, float(rng.uniform(0.0, max_cost))))
        # reachability of the target from the source
        adj = {i: [] for i in range(n_vertices)}
        for i, j, _ in edges:
            adj[i].append(j)
        reach = set()
        stack = [0]
        while stack:
            u = stack.pop()
            if u in reach:
                continue
            reach.add(u)
            stack.extend(adj[u])
        if n_vertices - 1 not in reach:
            continue
        g = GcsGraph(sources=[names[0]], targets=[names[-1]])
        for name, p in zip(names, points):
            g.add_vertex(GcsVertex(name, ConvexSetDescription.point(p)))
        for i, j, c in edges:
            g.add_edge(GcsEdge(names[i], names[j],
                               QuadraticForm.constant(c, 2 * dim)))
        g.source_distribution = {
            name: {"kind": "point_mass", "weight": 1.0 / n_vertices,
                   "point": list(points[i])}
            for i, name in enumerate(names)}
        return g
    raise ScenarioGenerationError("failed to generate a connected singleton digraph")
