"""Sparse matrix storage and the shifted direct solver.

The CSR container here is the single interchange format of the package.
Products and factorizations are delegated to ``scipy.sparse`` (SuperLU),
which sees the same arrays without copying.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sps
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    """Raised when ``I + gamma*A`` has an exactly singular pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square or rectangular real matrix in canonical CSR form.

    Attributes
    ----------
    n_rows, n_cols : int
        Shape of the matrix.
    row_ptr : numpy.ndarray
        Row offsets, length ``n_rows + 1``.
    col_idx : numpy.ndarray
        Column indices, strictly increasing within each row.
    values : numpy.ndarray
        Stored entries as float64.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        col_idx = np.asarray(self.col_idx, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if row_ptr.shape != (self.n_rows + 1,):
            raise ValueError("row_ptr must have length n_rows + 1")
        if row_ptr[0] != 0 or row_ptr[-1] != len(values) or len(col_idx) != len(values):
            raise ValueError("row_ptr inconsistent with stored entries")
        if np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= self.n_cols):
            raise ValueError("column index out of range")
        # strictly increasing columns inside every row
        steps = np.diff(col_idx)
        row_starts = row_ptr[1:-1]
        inner = np.ones(len(steps), dtype=bool)
        inner[row_starts[(row_starts > 0) & (row_starts < len(col_idx))] - 1] = False
        if np.any(steps[inner] <= 0):
            raise ValueError("column indices must be strictly increasing within a row")
        for name, arr in (("row_ptr", row_ptr), ("col_idx", col_idx), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return len(self.values)

    @cached_property
    def _csr(self):
        return sps.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=self.shape, copy=False
        )

    def to_scipy(self):
        """Return a ``scipy.sparse.csr_matrix`` view (shares the buffers)."""
        return self._csr

    def toarray(self):
        return self._csr.toarray()

    def transpose(self):
        return from_scipy(self._csr.T)

    @classmethod
    def identity(cls, n):
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def zeros(cls, n, m=None):
        m = n if m is None else m
        return cls(n, m, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))


def from_scipy(mat):
    """Canonicalize any scipy sparse matrix or dense array into a SparseMatrix."""
    csr = sps.csr_matrix(mat, dtype=np.float64, copy=True)
    csr.sum_duplicates()
    csr.sort_indices()
    return SparseMatrix(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)


def csr_from_triplets(n, triplets):
    """Assemble an ``n x n`` CSR matrix from ``(row, col, value)`` triplets.

    Duplicate positions are summed. Explicit zeros produced by the input are
    kept, which the CSR invariants allow.
    """
    if n < 1:
        raise ValueError("n must be positive")
    trip = list(triplets)
    if trip:
        rows, cols, vals = (np.asarray(c) for c in zip(*trip))
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    rows = rows.astype(np.int64)
    cols = cols.astype(np.int64)
    bad = (rows < 0) | (rows >= n) | (cols < 0) | (cols >= n)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise ValueError(f"triplet {k} index ({rows[k]}, {cols[k]}) out of range for n={n}")
    coo = sps.coo_matrix((vals.astype(np.float64), (rows, cols)), shape=(n, n))
    return from_scipy(coo)


def spmv(A, x):
    """Return ``A @ x``; each row is summed in stored order."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.n_cols:
        raise ValueError(f"vector of length {x.shape} does not match {A.n_cols} columns")
    return A.to_scipy() @ x


@dataclass(eq=False)
class LuFactorization:
    """Sparse LU of ``M = I + gamma*A`` kept for repeated solves.

    ``n_solves`` counts calls to :func:`lu_solve` and exists for cost
    accounting only; the factors themselves are never modified.
    """

    gamma: float
    n: int
    _lu: object = field(repr=False)
    n_solves: int = 0


def shifted_lu(A, gamma):
    """Factorize ``I + gamma*A`` with SuperLU (COLAMD ordering, partial pivoting)."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if A.n_rows != A.n_cols:
        raise ValueError("shifted factorization needs a square matrix")
    n = A.n_rows
    M = (sps.identity(n, format="csr") + gamma * A.to_scipy()).tocsc()
    try:
        lu = spla.splu(M)
    except RuntimeError as exc:
        pivot = _first_zero_column(M)
        raise FactorizationError(
            f"I + gamma*A is singular (gamma={gamma}): {exc}"
            + (f"; zero pivot at column {pivot}" if pivot is not None else ""),
            pivot=pivot,
        ) from exc
    return LuFactorization(gamma=float(gamma), n=n, _lu=lu)


def _first_zero_column(M):
    # Best-effort pivot report: SuperLU does not expose the failing column.
    M = M.tocsc()
    M.eliminate_zeros()
    empty = np.flatnonzero(np.diff(M.indptr) == 0)
    return int(empty[0]) if len(empty) else None


def lu_solve(f, b):
    """Solve ``(I + gamma*A) x = b`` with a stored factorization."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != f.n:
        raise ValueError(f"right-hand side of length {b.shape} does not match n={f.n}")
    f.n_solves += 1
    return f._lu.solve(b)


def write_matrix_market(path, A, comment=""):
    """Write ``A`` in Matrix Market coordinate format."""
    scipy.io.mmwrite(os.fspath(path), A.to_scipy().tocoo(), comment=comment, field="real")


def read_matrix_market(path):
    """Read a Matrix Market coordinate file into a SparseMatrix."""
    return from_scipy(scipy.io.mmread(os.fspath(path)))
