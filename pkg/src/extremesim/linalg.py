"""Dense/sparse kernels used by the all-pairs formulas.

Dense matrices are plain float64 ``numpy.ndarray`` objects; ``as_dense``
is the checked constructor. Sparse observation-shaped matrices carry both
a CSR and a CSC view so that ``X @ Q`` and ``X.T @ P`` are both row-major
traversals.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, NumericError

__all__ = [
    "as_dense",
    "SparseMatrixDual",
    "frobenius_inner",
    "spmm",
    "weighted_gram",
    "pair_dots",
]


def as_dense(a, name="matrix"):
    """Return ``a`` as a 2-D float64 array, rejecting NaN/Inf."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(name, f"{name} contains non-finite entries")
    return arr


class SparseMatrixDual:
    """An m x n sparse matrix stored in both row- and column-major form.

    Entries are kept in row-major order (sorted by row, then column);
    ``rows``, ``cols`` and ``values`` expose that order directly. The CSC
    view is a permutation of the same triples.
    """

    def __init__(self, rows, cols, values, shape):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        m, n = (int(shape[0]), int(shape[1]))
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise DimensionError("rows, cols and values must be 1-D of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
                raise DimensionError(f"index out of range for shape {(m, n)}")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise DimensionError(
                    f"duplicate entry ({rows[k]}, {cols[k]}) in sparse matrix"
                )
        self.shape = (m, n)
        self.rows = rows
        self.cols = cols
        self.values = values
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=m), out=indptr[1:])
        self._indptr = indptr
        # position in row-major storage of each column-major entry
        self._csc_perm = np.lexsort((rows, cols))
        csc_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(cols, minlength=n), out=csc_indptr[1:])
        self._csc_indptr = csc_indptr
        self._build_views()

    def _build_views(self):
        m, n = self.shape
        self.csr = sp.csr_matrix((self.values, self.cols, self._indptr), shape=(m, n))
        self.csc = sp.csc_matrix(
            (self.values[self._csc_perm], self.rows[self._csc_perm], self._csc_indptr),
            shape=(m, n),
        )

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        r, c = np.nonzero(dense)
        return cls(r, c, dense[r, c], dense.shape)

    def with_values(self, values):
        """Same sparsity pattern, new values (given in row-major order)."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise DimensionError("value vector does not match the sparsity pattern")
        out = object.__new__(SparseMatrixDual)
        out.shape = self.shape
        out.rows, out.cols = self.rows, self.cols
        out.values = values
        out._indptr = self._indptr
        out._csc_perm = self._csc_perm
        out._csc_indptr = self._csc_indptr
        out._build_views()
        return out

    @property
    def nnz(self):
        return int(self.values.size)

    def row_counts(self):
        """|O_{i,:}| for every row."""
        return np.diff(self._indptr)

    def col_counts(self):
        """|O_{:,j}| for every column."""
        return np.diff(self._csc_indptr)

    def row_positions(self, rows):
        """Row-major storage positions of every entry in the given rows."""
        rows = np.asarray(rows, dtype=np.int64)
        starts = self._indptr[rows]
        lens = self._indptr[rows + 1] - starts
        offsets = np.cumsum(lens) - lens
        return np.arange(int(lens.sum())) - np.repeat(offsets, lens) + np.repeat(starts, lens)

    def row(self, i):
        """Column indices of row ``i`` (ascending)."""
        return self.cols[self._indptr[i] : self._indptr[i + 1]]

    def column(self, j):
        """Row indices of column ``j`` (ascending)."""
        sl = self._csc_perm[self._csc_indptr[j] : self._csc_indptr[j + 1]]
        return self.rows[sl]

    def column_major_triples(self):
        p = self._csc_perm
        return self.rows[p], self.cols[p], self.values[p]

    def toarray(self):
        return self.csr.toarray()

    def __repr__(self):
        return f"SparseMatrixDual(shape={self.shape}, nnz={self.nnz})"


def frobenius_inner(a, b):
    """<a, b>_F = sum_rc a_rc * b_rc."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def spmm(x, q, transposed=False):
    """``X @ q`` or, with ``transposed``, ``X.T @ q``.

    Cost is proportional to ``x.nnz * q.shape[1]``.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise DimensionError("dense operand must be 2-D")
    m, n = x.shape
    inner = m if transposed else n
    if q.shape[0] != inner:
        raise DimensionError(
            f"inner dimensions differ: sparse {x.shape}{'^T' if transposed else ''} "
            f"and dense {q.shape}"
        )
    if transposed:
        # CSC of X is CSR of X^T
        return np.asarray(x.csc.T @ q)
    return np.asarray(x.csr @ q)


def weighted_gram(p, weights, other):
    """``other.T @ diag(weights) @ p`` (a k x k matrix)."""
    p = np.asarray(p, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if p.ndim != 2 or other.ndim != 2 or weights.ndim != 1:
        raise DimensionError("weighted_gram expects two matrices and a vector")
    if not (p.shape[0] == other.shape[0] == weights.shape[0]):
        raise DimensionError(
            f"row counts differ: p {p.shape}, other {other.shape}, weights {weights.shape}"
        )
    return other.T @ (weights[:, None] * p)


def pair_dots(left, right, rows, cols, chunk=512):
    """``sum_k left[rows[t], k] * right[cols[t], k]`` for every pair ``t``.

    Processed in small chunks so the gathered rows stay in cache.
    """
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    out = np.empty(rows.size, dtype=np.float64)
    for s in range(0, rows.size, chunk):
        e = min(s + chunk, rows.size)
        out[s:e] = np.einsum("ij,ij->i", left[rows[s:e]], right[cols[s:e]])
    return out
