"""Sparse vector primitive shared by the SVM and the featurizers."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..errors import PatentscapeError

_NORM_TOL = 1e-9


class SparseVector:
    """Fixed-dimension sparse vector: strictly increasing indices, nonzero values.

    When ``normalized`` is set, the L2 norm must be 1 within 1e-9 (the zero
    vector is exempt).
    """

    __slots__ = ("dimension", "indices", "values", "normalized")

    def __init__(self, dimension: int, indices, values, normalized: bool = False):
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if indices.shape != values.shape or indices.ndim != 1:
            raise PatentscapeError("indices and values must be 1-D and aligned")
        if indices.size:
            if indices[0] < 0 or indices[-1] >= dimension:
                raise PatentscapeError(f"index out of range for dimension {dimension}")
            if np.any(np.diff(indices) <= 0):
                raise PatentscapeError("indices must be strictly increasing")
            if np.any(values == 0.0):
                raise PatentscapeError("stored values must be nonzero")
        if normalized and indices.size:
            norm = float(np.sqrt(np.dot(values, values)))
            if abs(norm - 1.0) > _NORM_TOL:
                raise PatentscapeError(f"vector marked normalized has norm {norm}")
        self.dimension = int(dimension)
        self.indices = indices
        self.values = values
        self.normalized = bool(normalized)

    @classmethod
    def from_pairs(cls, dimension: int, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        items = sorted((i, v) for i, v in pairs if v != 0.0)
        if items:
            idx, vals = zip(*items)
        else:
            idx, vals = (), ()
        return cls(dimension, idx, vals)

    @classmethod
    def from_dense(cls, arr) -> "SparseVector":
        arr = np.asarray(arr, dtype=np.float64)
        (idx,) = np.nonzero(arr)
        return cls(arr.size, idx, arr[idx])

    @classmethod
    def zeros(cls, dimension: int) -> "SparseVector":
        return cls(dimension, (), ())

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def l2_normalized(self) -> "SparseVector":
        """Unit-norm copy, marked normalized. The zero vector passes through."""
        n = self.norm()
        if n == 0.0:
            return SparseVector(self.dimension, (), (), normalized=True)
        return SparseVector(self.dimension, self.indices, self.values / n, normalized=True)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out

    def dot_dense(self, w: np.ndarray) -> float:
        if w.shape[0] != self.dimension:
            raise PatentscapeError(
                f"dimension mismatch: vector {self.dimension}, weights {w.shape[0]}"
            )
        if not self.indices.size:
            return 0.0
        return float(np.dot(w[self.indices], self.values))

    def dot(self, other: "SparseVector") -> float:
        if other.dimension != self.dimension:
            raise PatentscapeError(
                f"dimension mismatch: {self.dimension} vs {other.dimension}"
            )
        # merge over the shorter index set
        a, b = (self, other) if self.nnz <= other.nnz else (other, self)
        if not a.nnz or not b.nnz:
            return 0.0
        pos = np.searchsorted(b.indices, a.indices)
        pos = np.minimum(pos, b.indices.size - 1)
        hit = b.indices[pos] == a.indices
        return float(np.dot(a.values[hit], b.values[pos[hit]]))

    def add_to(self, dense: np.ndarray, scale: float = 1.0) -> None:
        """dense[indices] += scale * values (in place)."""
        if dense.shape[0] != self.dimension:
            raise PatentscapeError("dimension mismatch in add_to")
        if self.indices.size:
            dense[self.indices] += scale * self.values

    def squared_distance(self, other: "SparseVector") -> float:
        return max(
            self.norm() ** 2 + other.norm() ** 2 - 2.0 * self.dot(other), 0.0
        )

    @staticmethod
    def concat(parts: Sequence["SparseVector"]) -> "SparseVector":
        """Concatenate feature blocks, offsetting indices."""
        dim = sum(p.dimension for p in parts)
        idx_parts, val_parts = [], []
        offset = 0
        for p in parts:
            idx_parts.append(p.indices + offset)
            val_parts.append(p.values)
            offset += p.dimension
        indices = np.concatenate(idx_parts) if idx_parts else np.empty(0, dtype=np.int64)
        values = np.concatenate(val_parts) if val_parts else np.empty(0)
        return SparseVector(dim, indices, values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dimension, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self) -> str:
        pairs = ", ".join(f"{i}:{v:g}" for i, v in zip(self.indices[:6], self.values[:6]))
        more = "..." if self.nnz > 6 else ""
        return f"SparseVector(dim={self.dimension}, {{{pairs}{more}}})"
