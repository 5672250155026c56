"""Reference kernels in plain numpy.

Same names and signatures as :mod:`parfem.kernels._numba`. Row-wise sums use
``np.bincount``, which accumulates in input order, so results match the
compiled loops to rounding.
"""
import numpy as np


def _row_ids(indptr, start, stop):
    lo, hi = indptr[start], indptr[stop]
    counts = np.diff(indptr[start:stop + 1])
    return lo, hi, np.repeat(np.arange(stop - start), counts)


def _row_products(indptr, indices, data, x, start, stop, order=None):
    lo, hi, rows = _row_ids(indptr, start, stop)
    pos = slice(lo, hi) if order is None else order[lo:hi]
    prod = data[pos] * x[indices[pos]]
    return np.bincount(rows, weights=prod, minlength=stop - start)


def spmv_rows(indptr, order, indices, data, x, y, start, stop):
    if stop > start:
        y[start:stop] = _row_products(indptr, indices, data, x, start, stop, order)


def residual_rows(indptr, order, indices, data, x, b, r, start, stop):
    if stop > start:
        r[start:stop] = b[start:stop] - _row_products(indptr, indices, data, x, start, stop, order)


def gs_sweep(indptr, indices, data, x, b, start, stop):
    # inherently sequential: one row at a time
    for i in range(start, stop):
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        vals = data[lo:hi]
        on_diag = cols == i
        diag = vals[on_diag].sum()
        off = ~on_diag
        x[i] = (b[i] - vals[off] @ x[cols[off]]) / diag


def jacobi_sweep(indptr, indices, data, diag, x, b, omega, start, stop, work):
    if stop > start:
        ax = _row_products(indptr, indices, data, x, start, stop)
        work[start:stop] = x[start:stop] + omega * (b[start:stop] - ax) / diag[start:stop]
        x[start:stop] = work[start:stop]


def segment_sum(values, starts, out):
    n = starts.shape[0] - 1
    if n == 0:
        return
    seg = np.repeat(np.arange(n), np.diff(starts))
    out[:n] = np.bincount(seg, weights=values[starts[0]:starts[-1]], minlength=n)


def prolong_rows(indptr, indices, data, coarse, fine, start, stop):
    if stop > start:
        fine[start:stop] = _row_products(indptr, indices, data, coarse, start, stop)


def restrict_rows(indptr, indices, data, fine, coarse, start, stop):
    if stop <= start:
        return
    lo, hi, rows = _row_ids(indptr, start, stop)
    contrib = data[lo:hi] * fine[start:stop][rows]
    coarse += np.bincount(indices[lo:hi], weights=contrib, minlength=coarse.shape[0])


def greedy_masters(offsets, candidates, n_ranks, out):
    counts = np.zeros(n_ranks, dtype=np.int64)
    for e in range(offsets.shape[0] - 1):
        cands = candidates[offsets[e]:offsets[e + 1]]
        # lexicographic (count, rank) minimum
        best = int(cands[np.lexsort((cands, counts[cands]))[0]])
        out[e] = best
        counts[best] += 1
