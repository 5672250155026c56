"""Compiled kernels.

Every function here has a twin of the same name and signature in
:mod:`parfem.kernels._numpy`. The compiled versions release the GIL, which is
what lets the per-rank threads of the in-process transport run concurrently.

``spmv_rows`` and ``residual_rows`` visit the entries of row ``i`` as
``order[indptr[i]:indptr[i + 1]]``; a rank-independent ``order`` makes row
sums bit-identical across partitions.
"""
import numba as nb
import numpy as np

_opts = {"nogil": True, "cache": True}


@nb.njit(**_opts)
def spmv_rows(indptr, order, indices, data, x, y, start, stop):
    for i in range(start, stop):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            p = order[k]
            acc += data[p] * x[indices[p]]
        y[i] = acc


@nb.njit(**_opts)
def residual_rows(indptr, order, indices, data, x, b, r, start, stop):
    for i in range(start, stop):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            p = order[k]
            acc += data[p] * x[indices[p]]
        r[i] = b[i] - acc


@nb.njit(**_opts)
def gs_sweep(indptr, indices, data, x, b, start, stop):
    for i in range(start, stop):
        acc = b[i]
        diag = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j == i:
                diag = data[k]
            else:
                acc -= data[k] * x[j]
        x[i] = acc / diag


@nb.njit(**_opts)
def jacobi_sweep(indptr, indices, data, diag, x, b, omega, start, stop, work):
    for i in range(start, stop):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        work[i] = x[i] + omega * (b[i] - acc) / diag[i]
    for i in range(start, stop):
        x[i] = work[i]


@nb.njit(**_opts)
def segment_sum(values, starts, out):
    n = starts.shape[0] - 1
    for s in range(n):
        acc = 0.0
        for k in range(starts[s], starts[s + 1]):
            acc += values[k]
        out[s] = acc


@nb.njit(**_opts)
def prolong_rows(indptr, indices, data, coarse, fine, start, stop):
    for i in range(start, stop):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * coarse[indices[k]]
        fine[i] = acc


@nb.njit(**_opts)
def restrict_rows(indptr, indices, data, fine, coarse, start, stop):
    for i in range(start, stop):
        v = fine[i]
        for k in range(indptr[i], indptr[i + 1]):
            coarse[indices[k]] += data[k] * v


@nb.njit(**_opts)
def greedy_masters(offsets, candidates, n_ranks, out):
    counts = np.zeros(n_ranks, dtype=np.int64)
    for e in range(offsets.shape[0] - 1):
        best = -1
        for k in range(offsets[e], offsets[e + 1]):
            r = candidates[k]
            if best < 0 or counts[r] < counts[best] or (counts[r] == counts[best] and r < best):
                best = r
        out[e] = best
        counts[best] += 1
