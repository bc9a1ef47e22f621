"""Bounded convex sets as intersections of affine and convex quadratic constraints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadratic import QuadraticForm

MEMBERSHIP_TOL = 1e-7


class UnboundedSetError(ValueError):
    """Raised when a set admits an unbounded direction."""


@dataclass(frozen=True)
class ConvexSetDescription:
    """Intersection of affine equalities a.x = b, affine inequalities a.x <= b,
    and convex quadratic inequalities q(x) <= 0."""

    dimension: int
    affine_eqs: tuple = ()     # tuple of (a: ndarray, b: float)
    affine_ineqs: tuple = ()   # tuple of (a: ndarray, b: float)
    quad_ineqs: tuple = ()     # tuple of QuadraticForm, each with PSD quadratic block

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("set dimension must be positive")
        eqs = tuple((np.asarray(a, dtype=float).ravel(), float(b)) for a, b in self.affine_eqs)
        ineqs = tuple((np.asarray(a, dtype=float).ravel(), float(b)) for a, b in self.affine_ineqs)
        for a, _ in eqs + ineqs:
            if a.shape[0] != self.dimension:
                raise ValueError("affine constraint dimension mismatch")
        for q in self.quad_ineqs:
            if q.dimension != self.dimension:
                raise ValueError("quadratic constraint dimension mismatch")
            if not q.is_convex():
                raise ValueError("quadratic inequality must have a PSD quadratic block")
        object.__setattr__(self, "affine_eqs", eqs)
        object.__setattr__(self, "affine_ineqs", ineqs)
        object.__setattr__(self, "quad_ineqs", tuple(self.quad_ineqs))

    # -- constructors -------------------------------------------------

    @classmethod
    def box(cls, lo, hi) -> "ConvexSetDescription":
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("invalid box bounds")
        n = lo.shape[0]
        ineqs = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            ineqs.append((e.copy(), hi[i]))
            ineqs.append((-e, -lo[i]))
        return cls(dimension=n, affine_ineqs=tuple(ineqs))

    @classmethod
    def point(cls, x) -> "ConvexSetDescription":
        x = np.asarray(x, dtype=float).ravel()
        n = x.shape[0]
        eqs = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            eqs.append((e, x[i]))
        return cls(dimension=n, affine_eqs=tuple(eqs))

    @classmethod
    def segment(cls, p0, p1) -> "ConvexSetDescription":
        """Line segment between p0 and p1: x = p0 + t (p1 - p0), 0 <= t <= 1."""
        p0 = np.asarray(p0, dtype=float).ravel()
        p1 = np.asarray(p1, dtype=float).ravel()
        d = p1 - p0
        norm = np.linalg.norm(d)
        if norm == 0:
            return cls.point(p0)
        n = p0.shape[0]
        u = d / norm
        eqs = []
        # directions orthogonal to the segment are pinned
        basis = np.linalg.svd(u.reshape(1, -1))[2][1:]
        for v in basis:
            eqs.append((v, float(v @ p0)))
        ineqs = [(u, float(u @ p1)), (-u, float(-u @ p0))]
        return cls(dimension=n, affine_eqs=tuple(eqs), affine_ineqs=tuple(ineqs))

    @classmethod
    def ball(cls, center, radius: float) -> "ConvexSetDescription":
        center = np.asarray(center, dtype=float).ravel()
        n = center.shape[0]
        q = QuadraticForm.from_blocks(
            quad=np.eye(n), linear=-2.0 * center,
            constant=float(center @ center) - radius ** 2, n=n)
        return cls(dimension=n, quad_ineqs=(q,))

    @classmethod
    def product(cls, sets) -> "ConvexSetDescription":
        """Cartesian product, variables stacked in order."""
        total = sum(s.dimension for s in sets)
        eqs, ineqs, quads = [], [], []
        offset = 0
        for s in sets:
            idx = np.arange(offset, offset + s.dimension)
            for a, b in s.affine_eqs:
                aa = np.zeros(total)
                aa[idx] = a
                eqs.append((aa, b))
            for a, b in s.affine_ineqs:
                aa = np.zeros(total)
                aa[idx] = a
                ineqs.append((aa, b))
            for q in s.quad_ineqs:
                quads.append(q.lifted(total, idx))
            offset += s.dimension
        return cls(dimension=total, affine_eqs=tuple(eqs),
                   affine_ineqs=tuple(ineqs), quad_ineqs=tuple(quads))

    def lifted(self, total_dim: int, offset: int) -> "ConvexSetDescription":
        """The same set constraining coordinates [offset, offset + dim) of a larger variable."""
        idx = np.arange(offset, offset + self.dimension)
        eqs, ineqs = [], []
        for a, b in self.affine_eqs:
            aa = np.zeros(total_dim)
            aa[idx] = a
            eqs.append((aa, b))
        for a, b in self.affine_ineqs:
            aa = np.zeros(total_dim)
            aa[idx] = a
            ineqs.append((aa, b))
        quads = tuple(q.lifted(total_dim, idx) for q in self.quad_ineqs)
        return ConvexSetDescription(dimension=total_dim, affine_eqs=tuple(eqs),
                                    affine_ineqs=tuple(ineqs), quad_ineqs=quads)

    # -- queries ------------------------------------------------------

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dimension:
            raise ValueError(f"expected point of dimension {self.dimension}, got {x.shape[0]}")
        for a, b in self.affine_eqs:
            if abs(a @ x - b) > tol:
                return False
        for a, b in self.affine_ineqs:
            if a @ x - b > tol:
                return False
        for q in self.quad_ineqs:
            if q(x) > tol:
                return False
        return True

    def bounding_box(self):
        """Per-coordinate [min, max], certified by 2n convex programs.

        Raises UnboundedSetError if some direction is unbounded.
        """
        import cvxpy as cp

        x = cp.Variable(self.dimension)
        cons = self.cvxpy_constraints(x)
        lo = np.empty(self.dimension)
        hi = np.empty(self.dimension)
        for i in range(self.dimension):
            for sign, out in ((1.0, lo), (-1.0, hi)):
                prob = cp.Problem(cp.Minimize(sign * x[i]), cons)
                prob.solve(solver=cp.CLARABEL)
                if prob.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
                    raise UnboundedSetError(f"unbounded set: coordinate {i} has no finite bound")
                if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
                    raise ValueError(f"bounding box program failed with status {prob.status}")
                out[i] = sign * prob.value
        return lo, hi

    def cvxpy_constraints(self, x):
        import cvxpy as cp

        cons = []
        for a, b in self.affine_eqs:
            cons.append(a @ x == b)
        for a, b in self.affine_ineqs:
            cons.append(a @ x <= b)
        for q in self.quad_ineqs:
            A = q.quad_block
            cons.append(cp.quad_form(x, cp.psd_wrap(A)) + q.linear_coeff @ x + q.constant_coeff <= 0)
        return cons

    def nonneg_constraint_forms(self):
        """All constraints as (QuadraticForm g, kind) with g(x) >= 0 for inequalities
        and g(x) = 0 for equalities; the convention used by nonnegativity certificates."""
        forms = []
        for a, b in self.affine_ineqs:
            forms.append((QuadraticForm.affine(-a, b), "ineq"))
        for q in self.quad_ineqs:
            forms.append((-q, "ineq"))
        for a, b in self.affine_eqs:
            forms.append((QuadraticForm.affine(a, -b), "eq"))
        return forms

    def sample(self, rng, count: int, bbox=None, max_tries: int = 10000):
        """Rejection-sample points from the set (uniform over its bounding box)."""
        if bbox is None:
            bbox = self.bounding_box()
        lo, hi = bbox
        # equality-constrained sets get their free directions sampled and the
        # rest projected; handle the common cases point and segment directly
        pts = []
        width = hi - lo
        if np.all(width <= 1e-9):
            return [0.5 * (lo + hi)] * count
        if self.affine_eqs:
            pts = self._sample_affine_slice(rng, count, lo, hi)
            if pts is not None:
                return pts
        pts = []
        tries = 0
        while len(pts) < count and tries < max_tries:
            x = lo + rng.random(self.dimension) * width
            tries += 1
            if self.contains(x, tol=1e-9):
                pts.append(x)
        if len(pts) < count:
            raise RuntimeError("rejection sampling failed; set may be lower-dimensional")
        return pts

    def _sample_affine_slice(self, rng, count, lo, hi):
        """Sample sets whose equalities leave a low-dimensional slice (e.g. segments)."""
        A = np.array([a for a, _ in self.affine_eqs])
        b = np.array([bb for _, bb in self.affine_eqs])
        # anchor at the bounding-box center projected onto the equality
        # manifold, so the pull-back loop contracts toward an interior point
        center = 0.5 * (lo + hi)
        step, *_ = np.linalg.lstsq(A, b - A @ center, rcond=None)
        x0 = center + step
        if np.linalg.norm(A @ x0 - b) > 1e-9:
            return None
        null = _nullspace(A)
        if null.shape[1] == 0:
            return [x0] * count
        pts = []
        tries = 0
        while len(pts) < count and tries < 10000:
            t = rng.standard_normal(null.shape[1])
            x = x0 + null @ (t * np.max(hi - lo))
            # pull back toward x0 until inside
            for _ in range(60):
                if self.contains(x, tol=1e-9):
                    pts.append(x)
                    break
                x = x0 + 0.7 * (x - x0)
            tries += 1
        return pts if len(pts) == count else None

    def to_dict(self) -> dict:
        return {
            "eqs": [{"a": list(a), "b": b} for a, b in self.affine_eqs],
            "ineqs": [{"a": list(a), "b": b} for a, b in self.affine_ineqs],
            "quads": [_matrix_to_dict(q.coeffs) for q in self.quad_ineqs],
        }

    @classmethod
    def from_dict(cls, data: dict, dimension: int) -> "ConvexSetDescription":
        eqs = tuple((np.array(e["a"], dtype=float), float(e["b"])) for e in data.get("eqs", []))
        ineqs = tuple((np.array(e["a"], dtype=float), float(e["b"])) for e in data.get("ineqs", []))
        quads = tuple(QuadraticForm(_matrix_from_dict(m)) for m in data.get("quads", []))
        return cls(dimension=dimension, affine_eqs=eqs, affine_ineqs=ineqs, quad_ineqs=quads)


def _nullspace(A, tol=1e-10):
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > tol * max(A.shape)))
    return vt[rank:].T


def _matrix_to_dict(M) -> dict:
    M = np.asarray(M, dtype=float)
    return {"shape": list(M.shape), "data": [float(v) for v in M.ravel()]}


def _matrix_from_dict(d) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["shape"])
