"""Skew-symmetric matrix primitives used by the non-reversible samplers.

A matrix is stored as its strict upper triangle only (row-major order), so
S' = -S and the zero diagonal hold by construction and can never drift,
no matter how the entries are updated.

The adaptive samplers treat the entries below the diagonal, s(i, j) with
i > j, as the free parameters; the stored upper triangle is their negation.
Projection bounds in the adaptive updates therefore apply to the
lower-triangle parameters (identical to bounding the stored entries when
the interval is symmetric, which is the default).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

# Above this dimension, matrix-vector products iterate the stored triangle
# instead of materializing the dense matrix.
DENSE_DIM_MAX = 64


def n_pairs(dim: int) -> int:
    """Number of free entries of a dim x dim skew-symmetric matrix."""
    return dim * (dim - 1) // 2


@lru_cache(maxsize=None)
def pair_indices(dim: int):
    """(row, col) index arrays of the strict upper triangle in storage order.

    Storage order is row-major over pairs (i, j) with i < j:
    (0,1), (0,2), ..., (0,dim-1), (1,2), ...
    """
    rows, cols = np.triu_indices(dim, k=1)
    rows = rows.astype(np.intp)
    cols = cols.astype(np.intp)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@dataclass(frozen=True)
class SkewMatrix:
    """N x N skew-symmetric matrix stored as its strict upper triangle.

    Immutable value type: the entry array is copied on construction and
    marked read-only, so instances are safe to share across threads.
    """

    dim: int
    upper: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        upper = np.array(self.upper, dtype=float)
        if upper.shape != (n_pairs(self.dim),):
            raise ValueError(
                f"upper triangle of a {self.dim}x{self.dim} skew matrix needs "
                f"{n_pairs(self.dim)} entries, got shape {upper.shape}"
            )
        if upper.size and not np.all(np.isfinite(upper)):
            raise ValueError("skew entries must be finite")
        upper.setflags(write=False)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def zeros(cls, dim: int) -> "SkewMatrix":
        return cls(dim, np.zeros(n_pairs(dim)))

    @classmethod
    def _wrap(cls, dim: int, upper: np.ndarray) -> "SkewMatrix":
        # internal fast path for the samplers' per-step updates: caller
        # guarantees a fresh, finite, correctly-shaped float array
        obj = object.__new__(cls)
        upper.setflags(write=False)
        object.__setattr__(obj, "dim", dim)
        object.__setattr__(obj, "upper", upper)
        return obj

    @classmethod
    def from_dense(cls, mat) -> "SkewMatrix":
        """Extract the triangle from a dense matrix, validating S' = -S."""
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        if not np.array_equal(mat, -mat.T):
            raise ValueError("matrix is not exactly skew-symmetric")
        rows, cols = pair_indices(mat.shape[0])
        return cls(mat.shape[0], mat[rows, cols])

    @cached_property
    def _dense(self) -> np.ndarray:
        rows, cols = pair_indices(self.dim)
        m = np.zeros((self.dim, self.dim))
        m[rows, cols] = self.upper
        m[cols, rows] = -self.upper
        m.setflags(write=False)
        return m

    def dense(self) -> np.ndarray:
        """Explicit dense reconstruction (for tests and export; cached)."""
        return self._dense

    def entry(self, i: int, j: int) -> float:
        """S[i, j] with 0-based indices."""
        if not (0 <= i < self.dim and 0 <= j < self.dim):
            raise IndexError(f"indices ({i}, {j}) out of range for dim {self.dim}")
        if i == j:
            return 0.0
        a, b = (i, j) if i < j else (j, i)
        rows, cols = pair_indices(self.dim)
        p = int(np.flatnonzero((rows == a) & (cols == b))[0])
        return float(self.upper[p]) if i < j else float(-self.upper[p])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.upper))) if self.upper.size else 0.0


@dataclass(frozen=True)
class PerturbationMatrix(SkewMatrix):
    """Skew-symmetric random direction matrix with +/-1 upper entries."""

    def __post_init__(self):
        super().__post_init__()
        if self.upper.size and not np.all(np.abs(self.upper) == 1.0):
            raise ValueError("perturbation entries must be exactly +1 or -1")


def skew_apply(S: SkewMatrix, x) -> np.ndarray:
    """Product of the reconstructed full matrix with a vector.

    For dim > DENSE_DIM_MAX the product is accumulated over the stored
    triangle; the dense matrix is never materialized.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (S.dim,):
        raise ValueError(f"vector of shape {x.shape} does not match dim {S.dim}")
    if S.dim <= DENSE_DIM_MAX:
        return S.dense() @ x
    rows, cols = pair_indices(S.dim)
    y = np.zeros(S.dim)
    np.add.at(y, rows, S.upper * x[cols])
    np.add.at(y, cols, -(S.upper * x[rows]))
    return y


def skew_apply_rows(S: SkewMatrix, X: np.ndarray) -> np.ndarray:
    """Apply S to every row of X, shape (m, dim) -> (m, dim)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != S.dim:
        raise ValueError(f"row block of shape {X.shape} does not match dim {S.dim}")
    if S.dim <= DENSE_DIM_MAX:
        return X @ S.dense().T
    return np.stack([skew_apply(S, row) for row in X])


def skew_project(S: SkewMatrix, lo: float, hi: float) -> SkewMatrix:
    """Clamp every stored upper entry into [lo, hi]."""
    if lo > hi:
        raise ValueError(f"empty projection interval [{lo}, {hi}]")
    return SkewMatrix(S.dim, np.clip(S.upper, lo, hi))


def skew_perturbation_sample(dim: int, rng: np.random.Generator) -> PerturbationMatrix:
    """Independent +/-1 (prob. 1/2 each) upper entries; lower the negation.

    Consumes n_pairs(dim) integer draws from rng.
    """
    if dim < 2:
        raise ValueError(f"perturbation needs dim >= 2 (no free entries at dim {dim})")
    signs = rng.integers(0, 2, size=n_pairs(dim)).astype(float) * 2.0 - 1.0
    return PerturbationMatrix(dim, signs)


def skew_init_tridiagonal(dim: int, rng: np.random.Generator) -> SkewMatrix:
    """Standard-normal superdiagonal s(i, i+1); all other entries zero.

    Consumes dim - 1 Gaussian draws from rng, assigned in order
    s(0,1), s(1,2), ..., s(dim-2, dim-1).
    """
    if dim < 2:
        raise ValueError(f"tridiagonal init needs dim >= 2, got {dim}")
    rows, cols = pair_indices(dim)
    upper = np.zeros(n_pairs(dim))
    band = np.flatnonzero(cols == rows + 1)
    upper[band] = rng.standard_normal(dim - 1)
    return SkewMatrix(dim, upper)
