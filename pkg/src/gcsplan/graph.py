"""Graphs of convex sets: data model, validation, path enumeration, serialization."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .quadratic import QuadraticForm
from .sets import ConvexSetDescription, UnboundedSetError, _matrix_to_dict, _matrix_from_dict

MEMBERSHIP_TOL = 1e-7


@dataclass(frozen=True)
class GcsVertex:
    id: str
    set: ConvexSetDescription

    @property
    def dimension(self) -> int:
        return self.set.dimension


@dataclass(frozen=True)
class GcsEdge:
    tail: str
    head: str
    length: QuadraticForm
    joint_set: ConvexSetDescription | None = None  # extra coupling beyond X_tail x X_head

    def __post_init__(self):
        if self.tail == self.head:
            raise ValueError(f"self-loop on vertex {self.tail!r} is not allowed")

    @property
    def key(self):
        return (self.tail, self.head)


@dataclass(frozen=True)
class Trajectory:
    path: tuple          # vertex ids
    points: tuple        # one ndarray per vertex

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))
        object.__setattr__(self, "points", tuple(np.asarray(p, dtype=float) for p in self.points))
        if len(self.path) != len(self.points):
            raise ValueError("trajectory must have one point per vertex")


class GcsGraph:
    """Directed graph pairing vertices with convex sets and edges with joint
    constraints and quadratic lengths."""

    def __init__(self, vertices=(), edges=(), sources=(), targets=(), source_distribution=None):
        self.vertices: dict[str, GcsVertex] = {}
        self.edges: list[GcsEdge] = []
        self.sources: list[str] = list(sources)
        self.targets: list[str] = list(targets)
        self.source_distribution = source_distribution  # dict vertex id -> SourceSpec-like dict
        self._edge_index: dict[tuple, GcsEdge] = {}
        for v in vertices:
            self.add_vertex(v)
        for e in edges:
            self.add_edge(e)

    def add_vertex(self, vertex: GcsVertex):
        if vertex.id in self.vertices:
            raise ValueError(f"duplicate vertex id {vertex.id!r}")
        self.vertices[vertex.id] = vertex

    def add_edge(self, edge: GcsEdge):
        self.edges.append(edge)
        self._edge_index[edge.key] = edge

    def edge(self, tail: str, head: str) -> GcsEdge:
        return self._edge_index[(tail, head)]

    def has_edge(self, tail: str, head: str) -> bool:
        return (tail, head) in self._edge_index

    def out_edges(self, v: str):
        return sorted((e for e in self.edges if e.tail == v), key=lambda e: e.head)

    def successors(self, v: str):
        return sorted(e.head for e in self.edges if e.tail == v)

    def joint_dimension(self, edge: GcsEdge) -> int:
        return self.vertices[edge.tail].dimension + self.vertices[edge.head].dimension

    # -- validation -----------------------------------------------------

    def validate(self, seed: int = 0, length_samples: int = 100) -> "ValidationReport":
        issues = []
        rng = np.random.default_rng(seed)
        for e in self.edges:
            if e.tail not in self.vertices or e.head not in self.vertices:
                issues.append(f"dangling edge ({e.tail} -> {e.head}): unknown vertex id")
        for v in self.vertices.values():
            asym = max((float(np.abs(q.coeffs - q.coeffs.T).max()) for q in v.set.quad_ineqs),
                       default=0.0)
            if asym > 1e-12:
                issues.append(f"asymmetric matrix in set of vertex {v.id!r}")
            try:
                v.set.bounding_box()
            except UnboundedSetError:
                issues.append(f"unbounded set at vertex {v.id!r}")
        for e in self.edges:
            if e.tail not in self.vertices or e.head not in self.vertices:
                continue
            tail, head = self.vertices[e.tail], self.vertices[e.head]
            n = tail.dimension + head.dimension
            if e.length.dimension != n:
                issues.append(f"edge ({e.tail} -> {e.head}): length dimension "
                              f"{e.length.dimension} != joint dimension {n}")
                continue
            if float(np.abs(e.length.coeffs - e.length.coeffs.T).max()) > 1e-12:
                issues.append(f"asymmetric matrix in length of edge ({e.tail} -> {e.head})")
            for z in self._sample_edge_points(e, rng, length_samples):
                if e.length(z) < -1e-9:
                    issues.append(f"negative edge length on ({e.tail} -> {e.head}) "
                                  f"at a feasible sample (value {e.length(z):.3e})")
                    break
        if self.sources and not all(s in self.vertices for s in self.sources):
            issues.append("source list references unknown vertex id")
        if self.targets and not all(t in self.vertices for t in self.targets):
            issues.append("target list references unknown vertex id")
        return ValidationReport(tuple(issues))

    def _sample_edge_points(self, edge: GcsEdge, rng, count: int):
        tail, head = self.vertices[edge.tail], self.vertices[edge.head]
        try:
            xt = tail.set.sample(rng, count)
            xh = head.set.sample(rng, count)
        except RuntimeError:
            return []
        pts = []
        for a, b in zip(xt, xh):
            z = np.concatenate([a, b])
            if edge.joint_set is None or edge.joint_set.contains(z, tol=1e-7):
                pts.append(z)
        return pts

    # -- paths ------------------------------------------------------------

    def enumerate_paths(self, s: str, t: str, max_len: int):
        """All simple s-t paths with at most max_len edges, lexicographic order."""
        if s not in self.vertices or t not in self.vertices:
            raise KeyError("unknown source or target vertex")
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        succ = {v: self.successors(v) for v in self.vertices}
        paths = []

        def extend(path, visited):
            v = path[-1]
            if len(path) - 1 > max_len:
                return
            if v == t:
                paths.append(tuple(path))
                return
            if len(path) - 1 == max_len:
                return
            for w in succ[v]:
                if w not in visited:
                    visited.add(w)
                    path.append(w)
                    extend(path, visited)
                    path.pop()
                    visited.discard(w)

        extend([s], {s})
        return paths

    # -- trajectories ------------------------------------------------------

    def validate_trajectory(self, traj: Trajectory, tol: float = MEMBERSHIP_TOL):
        """List of violated trajectory invariants (empty iff feasible)."""
        issues = []
        if len(set(traj.path)) != len(traj.path):
            issues.append("repeated vertex in path")
        for v, x in zip(traj.path, traj.points):
            if v not in self.vertices:
                issues.append(f"unknown vertex {v!r}")
                continue
            if not self.vertices[v].set.contains(x, tol=tol):
                issues.append(f"point of vertex {v!r} outside its set")
        for (u, v), (xu, xv) in zip(zip(traj.path, traj.path[1:]),
                                    zip(traj.points, traj.points[1:])):
            if not self.has_edge(u, v):
                issues.append(f"missing edge ({u} -> {v})")
                continue
            e = self.edge(u, v)
            if e.joint_set is not None and not e.joint_set.contains(
                    np.concatenate([xu, xv]), tol=tol):
                issues.append(f"edge constraint violated on ({u} -> {v})")
        return issues

    def trajectory_cost(self, traj: Trajectory) -> float:
        cost = 0.0
        for (u, v), (xu, xv) in zip(zip(traj.path, traj.path[1:]),
                                    zip(traj.points, traj.points[1:])):
            cost += self.edge(u, v).length(np.concatenate([xu, xv]))
        return cost

    def all_squared_distance_lengths(self) -> bool:
        return all(e.length.is_squared_distance() for e in self.edges)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "vertices": [
                {"id": v.id, "dimension": v.dimension, "set": v.set.to_dict()}
                for v in sorted(self.vertices.values(), key=lambda v: v.id)
            ],
            "edges": [
                {
                    "tail": e.tail,
                    "head": e.head,
                    "joint": e.joint_set.to_dict() if e.joint_set is not None else None,
                    "length": _matrix_to_dict(e.length.coeffs),
                }
                for e in self.edges
            ],
            "sources": list(self.sources),
            "targets": list(self.targets),
        }
        if self.source_distribution is not None:
            doc["source_distribution"] = self.source_distribution
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "GcsGraph":
        g = cls(sources=doc.get("sources", ()), targets=doc.get("targets", ()),
                source_distribution=doc.get("source_distribution"))
        for vd in doc["vertices"]:
            g.add_vertex(GcsVertex(
                id=vd["id"],
                set=ConvexSetDescription.from_dict(vd["set"], vd["dimension"])))
        for ed in doc["edges"]:
            joint = None
            if ed.get("joint") is not None:
                nt = g.vertices[ed["tail"]].dimension
                nh = g.vertices[ed["head"]].dimension
                joint = ConvexSetDescription.from_dict(ed["joint"], nt + nh)
            g.add_edge(GcsEdge(tail=ed["tail"], head=ed["head"],
                               length=QuadraticForm(_matrix_from_dict(ed["length"])),
                               joint_set=joint))
        return g

    def save(self, path):
        with open(path, "w") as f:
            f.write(canonical_json(self.to_dict()))

    @classmethod
    def load(cls, path) -> "GcsGraph":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def fingerprint(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple

    @property
    def ok(self) -> bool:
        return not self.issues


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def validate_graph(graph: GcsGraph, seed: int = 0) -> ValidationReport:
    return graph.validate(seed=seed)


def enumerate_paths(graph: GcsGraph, s: str, t: str, max_len: int):
    return graph.enumerate_paths(s, t, max_len)
