"""Smoothers (damped Jacobi, processor-local Gauss-Seidel) and the coarse solver."""
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .linalg import SolveStats, residual_norm

__all__ = ["SmootherKind", "SmootherConfig", "SingularDiagonal", "NoConvergence", "smooth",
           "coarse_solve"]


class SmootherKind(Enum):
    JACOBI = "jacobi"
    GAUSS_SEIDEL = "gauss_seidel"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower().replace("-", "_")
        aliases = {"gs": "gauss_seidel", "gaussseidel": "gauss_seidel", "j": "jacobi"}
        return cls(aliases.get(v, v))


class SingularDiagonal(ArithmeticError):
    """A row swept by the smoother has a zero diagonal entry."""


class NoConvergence(RuntimeError):
    """An iteration hit its cap before reaching the tolerance."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


@dataclass(frozen=True)
class SmootherConfig:
    """Smoother settings.

    Parameters
    ----------
    kind : SmootherKind
    pre_sweeps, post_sweeps : int
        Outer smoothing iterations before and after the coarse-grid correction.
    local_sweeps : int
        Rank-local sweeps per outer iteration, i.e. between two communications.
    damping : float
        Jacobi relaxation factor, ignored by Gauss-Seidel.
    """

    kind: SmootherKind = SmootherKind.GAUSS_SEIDEL
    pre_sweeps: int = 3
    post_sweeps: int = 3
    local_sweeps: int = 1
    damping: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "kind", SmootherKind.parse(self.kind))
        if self.pre_sweeps < 0 or self.post_sweeps < 0:
            raise ValueError("sweep counts must be >= 0")
        if self.local_sweeps < 1:
            raise ValueError("local_sweeps must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


def _check_diagonal(a, n):
    d = a.diagonal[:n]
    if n and not np.all(d != 0.0):
        raise SingularDiagonal(f"zero diagonal in row {int(np.flatnonzero(d == 0.0)[0])}")
    return d


def smooth(a, x, b, cfg, comm, sweeps=None):
    """Run ``sweeps`` outer smoothing iterations on the owned free rows.

    Each outer iteration performs ``cfg.local_sweeps`` rank-local sweeps and
    then one Master->Slave scatter and one Halo1 update, so slaves and Halo1
    are current when the next sweep reads them. Rows outside ``[0, n_own)``
    (slave, halo and Dirichlet) are never written by a sweep.
    """
    sweeps = cfg.pre_sweeps if sweeps is None else sweeps
    n = comm.n_own
    diag = _check_diagonal(a, n)
    ip, ix, dv = a.row_offsets, a.col_indices, a.values
    work = np.empty(n) if cfg.kind is SmootherKind.JACOBI else None
    for _ in range(sweeps):
        for _ in range(cfg.local_sweeps):
            if cfg.kind is SmootherKind.GAUSS_SEIDEL:
                kernels.gs_sweep(ip, ix, dv, x, b, 0, n)
            else:
                kernels.jacobi_sweep(ip, ix, dv, diag, x, b, cfg.damping, 0, n, work)
        comm.update_master_slave(x)
        comm.update_halo1(x)
    return x


def coarse_solve(a, x, b, comm, tol=1e-10, max_iter=10_000, raise_on_failure=False):
    """Gauss-Seidel to a relative residual of ``tol`` (w.r.t. the initial one).

    Hitting ``max_iter`` sets ``stats.converged = False``; it raises
    :class:`NoConvergence` only when ``raise_on_failure`` is set.
    """
    t0 = time.perf_counter()
    c0 = comm.transport.comm_time
    n = comm.n_own
    _check_diagonal(a, n)
    ip, ix, dv = a.row_offsets, a.col_indices, a.values
    r0 = residual_norm(a, x, b, comm)
    stats = SolveStats(initial_residual=r0, final_residual=r0, residuals=[r0])
    r = r0
    while r > tol * r0 and stats.iterations < max_iter:
        kernels.gs_sweep(ip, ix, dv, x, b, 0, n)
        comm.update_master_slave(x)
        comm.update_halo1(x)
        r = residual_norm(a, x, b, comm)
        stats.iterations += 1
        stats.residuals.append(r)
    stats.final_residual = r
    stats.converged = r <= tol * r0
    stats.solve_time = time.perf_counter() - t0
    stats.comm_time = comm.transport.comm_time - c0
    if not stats.converged and raise_on_failure:
        raise NoConvergence(f"coarse solve stalled at {r:.3e} after {max_iter} iterations", stats)
    return stats
