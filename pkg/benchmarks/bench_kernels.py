"""Compare the numba and numpy kernel backends on a 3D Q1 system.

    python3 benchmarks/bench_kernels.py [--n 24] [--repeat 5]
"""
import argparse
import time

import numpy as np

from parfem.kernels import backend_module
from parfem.linalg import CsrSparseMatrix


def poisson_3d(n):
    """7-point Laplacian on an n^3 grid, CSR arrays."""
    import scipy.sparse as sp
    t = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(n, n))
    eye = sp.identity(n)
    a = sp.kron(sp.kron(t, eye), eye) + sp.kron(sp.kron(eye, t), eye) + sp.kron(sp.kron(eye, eye), t)
    return CsrSparseMatrix.from_scipy(a)


def _time(fn, repeat):
    fn()  # warm-up, includes compilation for numba
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(n, repeat):
    a = poisson_3d(n)
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal(a.n_rows)
    b = rng.standard_normal(a.n_rows)
    ip, ix, dv = a.row_offsets, a.col_indices, a.values
    diag = a.diagonal
    order = a.entry_order
    starts = np.arange(0, dv.size + 1, 7, dtype=np.int64)
    rows = []
    for name in ("numba", "numpy"):
        k = backend_module(name)
        y = np.empty(a.n_rows)
        work = np.empty(a.n_rows)
        seg = np.empty(starts.size - 1)
        cases = {
            "spmv": lambda: k.spmv_rows(ip, order, ix, dv, x0, y, 0, a.n_rows),
            "gs_sweep": lambda: k.gs_sweep(ip, ix, dv, x0.copy(), b, 0, a.n_rows),
            "jacobi_sweep": lambda: k.jacobi_sweep(ip, ix, dv, diag, x0.copy(), b, 0.8, 0,
                                                   a.n_rows, work),
            "segment_sum": lambda: k.segment_sum(dv, starts, seg),
        }
        for case, fn in cases.items():
            rows.append((case, name, _time(fn, repeat)))
    return a.n_rows, rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    p.add_argument("--n", type=int, default=24)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    n_rows, rows = run(args.n, args.repeat)
    t = {(c, b): s for c, b, s in rows}
    print(f"rows={n_rows}")
    print(f"{'kernel':<14}{'numba [ms]':>12}{'numpy [ms]':>12}{'ratio':>8}")
    for case in dict.fromkeys(c for c, _, _ in rows):
        nb, npy = t[case, "numba"], t[case, "numpy"]
        print(f"{case:<14}{1e3 * nb:>12.3f}{1e3 * npy:>12.3f}{npy / nb:>8.1f}")


if __name__ == "__main__":
    main()
