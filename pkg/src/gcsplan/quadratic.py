"""Quadratic functions in homogeneous matrix form.

A quadratic f on R^n is stored as a symmetric (n+1)x(n+1) matrix Q with

    f(x) = [1; x]^T Q [1; x] = Q[0,0] + 2 Q[0,1:] . x + x^T Q[1:,1:] x

so that sums, liftings into larger variable spaces, and partial
substitutions are plain matrix arithmetic.
"""

from __future__ import annotations

import numpy as np

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-9


class QuadraticForm:
    """Quadratic function f(x) = [1;x]^T Q [1;x] on R^n."""

    __slots__ = ("dimension", "coeffs")

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:
            raise ValueError(f"coefficient matrix must be square, got {coeffs.shape}")
        if coeffs.shape[0] < 2:
            raise ValueError("coefficient matrix must be at least 2x2 (n >= 1)")
        asym = np.abs(coeffs - coeffs.T).max()
        if asym > 1e-8:
            raise ValueError(f"coefficient matrix is asymmetric (max |Q - Q^T| = {asym:.3e})")
        if asym > SYMMETRY_TOL:
            coeffs = 0.5 * (coeffs + coeffs.T)
        object.__setattr__(self, "dimension", coeffs.shape[0] - 1)
        object.__setattr__(self, "coeffs", coeffs)
        coeffs.setflags(write=False)

    def __setattr__(self, name, value):
        raise AttributeError("QuadraticForm is immutable")

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "QuadraticForm":
        return cls(np.zeros((n + 1, n + 1)))

    @classmethod
    def constant(cls, value: float, n: int) -> "QuadraticForm":
        Q = np.zeros((n + 1, n + 1))
        Q[0, 0] = value
        return cls(Q)

    @classmethod
    def from_blocks(cls, quad=None, linear=None, constant=0.0, n=None) -> "QuadraticForm":
        """Build from f(x) = x^T A x + b^T x + c (note: b is the plain linear coefficient)."""
        if n is None:
            if quad is not None:
                n = np.asarray(quad).shape[0]
            elif linear is not None:
                n = len(linear)
            else:
                raise ValueError("dimension cannot be inferred")
        Q = np.zeros((n + 1, n + 1))
        Q[0, 0] = constant
        if linear is not None:
            b = np.asarray(linear, dtype=float)
            Q[0, 1:] = b / 2.0
            Q[1:, 0] = b / 2.0
        if quad is not None:
            A = np.asarray(quad, dtype=float)
            Q[1:, 1:] = 0.5 * (A + A.T)
        return cls(Q)

    @classmethod
    def squared_norm(cls, n: int) -> "QuadraticForm":
        """||x||^2 on R^n."""
        return cls.from_blocks(quad=np.eye(n), n=n)

    @classmethod
    def squared_distance(cls, n: int) -> "QuadraticForm":
        """||x - y||^2 on the joint variable (x, y) in R^n x R^n."""
        A = np.block([[np.eye(n), -np.eye(n)], [-np.eye(n), np.eye(n)]])
        return cls.from_blocks(quad=A, n=2 * n)

    @classmethod
    def affine(cls, a, b: float) -> "QuadraticForm":
        """a^T x + b."""
        return cls.from_blocks(linear=a, constant=b, n=len(a))

    # -- accessors ----------------------------------------------------

    @property
    def quad_block(self) -> np.ndarray:
        return self.coeffs[1:, 1:]

    @property
    def linear_coeff(self) -> np.ndarray:
        """b such that f(x) = x^T A x + b^T x + c."""
        return 2.0 * self.coeffs[0, 1:]

    @property
    def constant_coeff(self) -> float:
        return float(self.coeffs[0, 0])

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dimension:
            raise ValueError(f"expected point of dimension {self.dimension}, got {x.shape[0]}")
        u = np.concatenate(([1.0], x))
        return float(u @ self.coeffs @ u)

    def min_quad_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.quad_block).min())

    def is_convex(self, tol: float = PSD_TOL) -> bool:
        return self.min_quad_eigenvalue() >= -tol

    def is_squared_distance(self, tol: float = 1e-12) -> bool:
        n2 = self.dimension
        if n2 % 2 != 0:
            return False
        ref = QuadraticForm.squared_distance(n2 // 2)
        return bool(np.abs(self.coeffs - ref.coeffs).max() <= tol)

    # -- algebra ------------------------------------------------------

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch in quadratic form addition")
        return QuadraticForm(self.coeffs + other.coeffs)

    def __sub__(self, other: "QuadraticForm") -> "QuadraticForm":
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch in quadratic form subtraction")
        return QuadraticForm(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "QuadraticForm":
        return QuadraticForm(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "QuadraticForm":
        return QuadraticForm(-self.coeffs)

    # -- variable maps ------------------------------------------------

    def lift_matrix(self, total_dim: int, index_map) -> np.ndarray:
        """Selection matrix T with [1; x_local] = T [1; x_global]."""
        index_map = np.asarray(index_map, dtype=int)
        if index_map.shape[0] != self.dimension:
            raise ValueError("index map length must equal the form dimension")
        T = np.zeros((self.dimension + 1, total_dim + 1))
        T[0, 0] = 1.0
        for i, j in enumerate(index_map):
            T[i + 1, j + 1] = 1.0
        return T

    def lifted(self, total_dim: int, index_map) -> "QuadraticForm":
        """The same function viewed on R^total_dim with local variable i at global index index_map[i]."""
        T = self.lift_matrix(total_dim, index_map)
        return QuadraticForm(T.T @ self.coeffs @ T)

    def fixed(self, fixed_indices, fixed_values) -> "QuadraticForm":
        """Partial evaluation: pin the given coordinates, keep the rest in order."""
        fixed_indices = list(fixed_indices)
        fixed_values = np.asarray(fixed_values, dtype=float).ravel()
        free = [i for i in range(self.dimension) if i not in set(fixed_indices)]
        m = len(free)
        M = np.zeros((self.dimension + 1, m + 1))
        M[0, 0] = 1.0
        for idx, val in zip(fixed_indices, fixed_values):
            M[idx + 1, 0] = val
        for k, i in enumerate(free):
            M[i + 1, k + 1] = 1.0
        return QuadraticForm(M.T @ self.coeffs @ M)

    def __repr__(self):
        return f"QuadraticForm(n={self.dimension})"


def sym_outer(u, v) -> np.ndarray:
    """Symmetrized outer product (u v^T + v u^T) / 2."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    return 0.5 * (np.outer(u, v) + np.outer(v, u))
