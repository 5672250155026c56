"""Rank-local CSR matrices and distributed matvec/residual kernels.

Only rows of owned DOFs are authoritative. With the mapper's reordering those
rows are the contiguous range ``[0, n_own)``; slave and halo rows exist
locally (from assembling over halo cells) but are never read as results.
"""
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import sparse

from . import kernels

__all__ = ["CsrSparseMatrix", "SolveStats", "spmv", "residual", "residual_norm"]


@dataclass(frozen=True, eq=False)
class CsrSparseMatrix:
    """Compressed sparse rows with ascending, unique columns per row.

    ``column_keys`` optionally gives each column a rank-independent key (the
    DOF carrier key). Matvec and residual then add the entries of a row in
    ascending key order, so owned rows produce the same bits on every
    partition even though local column numbers differ.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    column_keys: np.ndarray | None = None

    @classmethod
    def from_coo(cls, rows, cols, vals, shape, order=None):
        """Sum duplicate entries in a fixed order.

        Contributions to one entry are added in ascending ``order`` (e.g. the
        gcn of the contributing cell), so two assemblies that see the same
        contributions produce bit-identical values.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        n_rows, n_cols = shape
        keys = rows * n_cols + cols
        sort = np.lexsort((order, keys)) if order is not None else np.argsort(keys, kind="stable")
        keys, vals = keys[sort], vals[sort]
        starts = np.flatnonzero(np.concatenate([[True], keys[1:] != keys[:-1]])) if keys.size \
            else np.zeros(0, np.int64)
        bounds = np.append(starts, keys.size).astype(np.int64)
        summed = np.empty(starts.size)
        kernels.segment_sum(vals, bounds, summed)
        ukeys = keys[starts]
        r, c = np.divmod(ukeys, n_cols)
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=n_rows), out=indptr[1:])
        return cls(n_rows, n_cols, indptr, c.astype(np.int64), summed)

    @classmethod
    def from_scipy(cls, m):
        m = sparse.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr.astype(np.int64),
                   m.indices.astype(np.int64), m.data.astype(float))

    @property
    def shape(self):
        return self.n_rows, self.n_cols

    @property
    def nnz(self):
        return self.values.size

    def to_scipy(self):
        return sparse.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def toarray(self):
        return self.to_scipy().toarray()

    @cached_property
    def _row_of(self):
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))

    @cached_property
    def entry_order(self):
        """Entry visiting order used by matvec and residual."""
        if self.column_keys is None:
            return np.arange(self.nnz, dtype=np.int64)
        return np.lexsort((self.column_keys[self.col_indices], self._row_of)).astype(np.int64)

    def with_column_keys(self, keys):
        return replace(self, column_keys=np.asarray(keys, dtype=np.int64))

    @cached_property
    def diagonal(self):
        d = np.zeros(self.n_rows)
        rows = self._row_of
        on = rows == self.col_indices
        d[rows[on]] = self.values[on]
        return d

    def row(self, i):
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def combine(self, alpha, other, beta):
        """``alpha * self + beta * other`` for matrices with identical pattern."""
        if not (np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)):
            raise ValueError("matrices must share a sparsity pattern")
        return replace(self, values=alpha * self.values + beta * other.values)

    def with_identity_rows(self, rows):
        """Copy with ``rows`` replaced by unit rows (off-diagonals dropped)."""
        mask = np.zeros(self.n_rows, dtype=bool)
        mask[np.asarray(rows, dtype=np.int64)] = True
        row_of = self._row_of
        keep = ~mask[row_of]
        r = np.concatenate([row_of[keep], np.flatnonzero(mask)])
        c = np.concatenate([self.col_indices[keep], np.flatnonzero(mask)])
        v = np.concatenate([self.values[keep], np.ones(int(mask.sum()))])
        out = CsrSparseMatrix.from_coo(r, c, v, self.shape)
        return out if self.column_keys is None else out.with_column_keys(self.column_keys)


@dataclass
class SolveStats:
    iterations: int = 0
    initial_residual: float = 0.0
    final_residual: float = 0.0
    converged: bool = True
    residuals: list = field(default_factory=list)
    solve_time: float = 0.0
    comm_time: float = 0.0
    cycle_times: list = field(default_factory=list)
    coarse_failures: int = 0

    @property
    def contraction(self):
        """Geometric mean of the per-iteration residual reduction."""
        if self.iterations == 0 or self.initial_residual == 0.0:
            return 0.0
        return (self.final_residual / self.initial_residual) ** (1.0 / self.iterations)


def _check(a, x):
    if a.n_cols != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix has {a.n_cols} columns, vector {x.shape[0]}")


def spmv(a, x, comm, out=None):
    """``y = A x`` on owned rows; other entries of ``y`` are zero.

    ``x`` must be current on every column referenced by owned rows (slaves and
    Halo1 after a smoothing step).
    """
    _check(a, x)
    y = np.zeros(a.n_rows) if out is None else out
    kernels.spmv_rows(a.row_offsets, a.entry_order, a.col_indices, a.values, x, y, 0, comm.n_own)
    return y


def residual(a, x, b, comm, out=None):
    """``r = b - A x`` on owned non-Dirichlet rows, zero elsewhere."""
    _check(a, x)
    r = np.zeros(a.n_rows) if out is None else out
    kernels.residual_rows(a.row_offsets, a.entry_order, a.col_indices, a.values, x, b, r, 0, comm.n_own)
    return r


def residual_norm(a, x, b, comm):
    """Global Euclidean norm of ``b - A x`` over owned non-Dirichlet DOFs."""
    r = residual(a, x, b, comm)
    n = comm.n_own
    return float(np.sqrt(comm.transport.allreduce_sum(float(np.dot(r[:n], r[:n])))))
