"""Hot loops of the solver, compiled with numba or run as plain numpy.

The backend is chosen once at import time from the ``PARFEM_BACKEND``
environment variable (``numba``, the default, or ``numpy``). Setting
``PARFEM_DISABLE_NUMBA=1`` is an alias for ``PARFEM_BACKEND=numpy``. When numba
cannot be imported the numpy path is used silently.
"""
import os

from . import _numpy

__all__ = ["BACKEND", "backend_module", "spmv_rows", "residual_rows", "gs_sweep",
           "jacobi_sweep", "segment_sum", "prolong_rows", "restrict_rows",
           "greedy_masters"]


def _select():
    requested = os.environ.get("PARFEM_BACKEND", "numba").strip().lower()
    if os.environ.get("PARFEM_DISABLE_NUMBA", "").strip() not in ("", "0"):
        requested = "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"PARFEM_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba":
        try:
            from . import _numba
            return "numba", _numba
        except ImportError:  # pragma: no cover - numba is a declared dependency
            pass
    return "numpy", _numpy


BACKEND, _impl = _select()


def backend_module(name):
    """Return the kernel module for ``name`` regardless of the active backend."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba
        return _numba
    raise ValueError(f"unknown backend {name!r}")


spmv_rows = _impl.spmv_rows
residual_rows = _impl.residual_rows
gs_sweep = _impl.gs_sweep
jacobi_sweep = _impl.jacobi_sweep
segment_sum = _impl.segment_sum
prolong_rows = _impl.prolong_rows
restrict_rows = _impl.restrict_rows
greedy_masters = _impl.greedy_masters
