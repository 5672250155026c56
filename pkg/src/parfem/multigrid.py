"""Level hierarchy, nested-Q1 transfer operators and the parallel V-cycle."""
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assembly import apply_dirichlet, assemble_matrices
from .fecomm import ParFECommunicator
from .femapper import build_mapper
from .fespace import FEFamily, build_fespace
from .linalg import CsrSparseMatrix, SolveStats, residual, residual_norm
from .mesh import decode_keys, ref_vertex_offsets
from .partition import build_subdomain, refine_subdomain
from .solvers import NoConvergence, SmootherConfig, coarse_solve, smooth

__all__ = ["MultigridLevel", "MultigridConfig", "build_hierarchy", "build_prolongation",
           "prolongate", "restrict", "v_cycle", "solve_outer"]


@dataclass(eq=False)
class MultigridLevel:
    """Everything one rank keeps for one level.

    ``prolong`` maps coarse local DOFs of the level below onto this level's
    local DOFs (``None`` on level 0). Rows of fine Dirichlet DOFs and columns
    of coarse Dirichlet DOFs are empty, so prolongation and restriction act on
    the free spaces only and are exact adjoints there.
    """

    index: int
    sub: object
    space: object
    mapper: object
    comm: ParFECommunicator
    mass: CsrSparseMatrix
    stiffness: CsrSparseMatrix
    a: CsrSparseMatrix
    prolong: CsrSparseMatrix | None = None

    @property
    def n_dofs(self):
        return self.space.n_dofs

    @property
    def n_own(self):
        return self.comm.n_own


@dataclass(frozen=True)
class MultigridConfig:
    n_levels: int = 3
    cycles: int = 1
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    coarse_tol: float = 1e-10
    coarse_max_iter: int = 10_000
    outer_tol: float = 1e-9
    outer_max_cycles: int = 50

    def __post_init__(self):
        if self.n_levels < 1 or self.cycles < 1 or self.outer_max_cycles < 1:
            raise ValueError("level and cycle counts must be positive")


def build_prolongation(coarse, fine):
    """Multilinear interpolation from ``coarse`` to ``fine`` local DOFs (Q1).

    Each fine vertex is interpolated from one parent cell, preferring own
    cells and then the lowest gcn. Own fine vertices therefore only reference
    coarse DOFs of own coarse cells.
    """
    if coarse.space.family is not FEFamily.Q1:
        raise ValueError("transfer operators are implemented for Q1 only")
    fs, cs = fine.space, coarse.space
    fmesh, cmesh = fs.mesh, cs.mesh
    if fmesh.level != cmesh.level + 1:
        raise ValueError("levels are not adjacent")
    d = fmesh.dimension
    cd = fs.cell_dofs
    n_cells, m = cd.shape
    inc_cell = np.repeat(np.arange(n_cells), m)
    inc_dof = cd.ravel()
    not_own = (~fs.sub.own_mask).astype(np.int64)
    order = np.lexsort((fmesh.gcn[inc_cell], not_own[inc_cell], inc_dof))
    inc_cell, inc_dof = inc_cell[order], inc_dof[order]
    first = np.concatenate([[True], inc_dof[1:] != inc_dof[:-1]])
    dofs, cells = inc_dof[first], inc_cell[first]
    parents = fmesh.parent[cells]

    doubled = decode_keys(fs.dof_keys[dofs], d, fmesh.resolution)
    xi = (doubled / 2.0 - 2.0 * cmesh.corners[parents]) / 2.0
    offs = ref_vertex_offsets(d)
    w = np.prod(np.where(offs[None, :, :] == 1, xi[:, None, :], 1.0 - xi[:, None, :]), axis=2)
    cols = cs.cell_dofs[parents]
    rows = np.repeat(dofs, offs.shape[0])
    w, cols = w.ravel(), cols.ravel()
    keep = (w != 0.0) & ~cs.dirichlet_mask[cols] & ~fs.dirichlet_mask[rows]
    return CsrSparseMatrix.from_coo(rows[keep], cols[keep], w[keep], (fs.n_dofs, cs.n_dofs))


def build_hierarchy(coarse, pmap, transport, n_levels, family=FEFamily.Q1, mass_coeff=0.0,
                    stiffness_coeff=1.0, dirichlet=True, timings=None):
    """Levels ``0..n_levels-1`` of this rank, coarsest first.

    The system matrix on every level is ``mass_coeff * M + stiffness_coeff * K``
    with unit Dirichlet rows. ``timings``, if given, is a dict that receives
    the seconds spent in mesh/mapper setup and in assembly.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    if FEFamily.parse(family) is not FEFamily.Q1:
        raise ValueError("the multigrid hierarchy is implemented for Q1 only")
    timings = {} if timings is None else timings
    timings.setdefault("initialization", 0.0)
    timings.setdefault("assembling", 0.0)
    levels = []
    sub = None
    for lev in range(n_levels):
        t0 = time.perf_counter()
        sub = build_subdomain(coarse, pmap, transport.rank) if sub is None else refine_subdomain(sub)
        space = build_fespace(sub, FEFamily.Q1, dirichlet=dirichlet)
        mapper = build_mapper(space, transport, tag=("level", lev))
        space = mapper.space
        comm = ParFECommunicator(mapper, transport)
        t1 = time.perf_counter()
        m, k = assemble_matrices(space)
        a = apply_dirichlet(m.combine(mass_coeff, k, stiffness_coeff), None, space)
        level = MultigridLevel(lev, sub, space, mapper, comm, m, k, a)
        t2 = time.perf_counter()
        if levels:
            level.prolong = build_prolongation(levels[-1], level)
        timings["initialization"] += (t1 - t0) + (time.perf_counter() - t2)
        timings["assembling"] += t2 - t1
        levels.append(level)
    return levels


def prolongate(fine, coarse_values, out=None):
    """Interpolate consistent coarse values onto every local DOF of ``fine``."""
    p = fine.prolong
    if p is None or coarse_values.shape[0] != p.n_cols:
        raise ValueError("level mismatch in prolongation")
    y = np.zeros(p.n_rows) if out is None else out
    kernels.prolong_rows(p.row_offsets, p.col_indices, p.values, coarse_values, y, 0, p.n_rows)
    return y


def restrict(fine, fine_values, coarse):
    """Transpose of :func:`prolongate` on the free spaces.

    Owned free fine entries are pushed to coarse DOFs of own coarse cells, the
    partial sums are accumulated onto the masters and then scattered to all
    coarse replicas, so the result is consistent.
    """
    p = fine.prolong
    if p is None or fine_values.shape[0] != p.n_rows or coarse.n_dofs != p.n_cols:
        raise ValueError("level mismatch in restriction")
    out = np.zeros(p.n_cols)
    kernels.restrict_rows(p.row_offsets, p.col_indices, p.values, fine_values, out, 0, fine.n_own)
    coarse.comm.accumulate(out)
    return out


def _cycle(levels, li, x, b, cfg, coarse_stats):
    lev = levels[li]
    comm = lev.comm
    if li == 0:
        coarse_stats.append(coarse_solve(lev.a, x, b, comm, cfg.coarse_tol, cfg.coarse_max_iter))
        comm.make_consistent(x)
        return x
    sm = cfg.smoother
    smooth(lev.a, x, b, sm, comm, sm.pre_sweeps)
    comm.update_halo2(x)
    r = residual(lev.a, x, b, comm)
    below = levels[li - 1]
    rc = restrict(lev, r, below)
    ec = np.zeros(below.n_dofs)
    _cycle(levels, li - 1, ec, rc, cfg, coarse_stats)
    x += prolongate(lev, ec)
    smooth(lev.a, x, b, sm, comm, sm.post_sweeps)
    if sm.post_sweeps == 0:
        comm.update_master_slave(x)
        comm.update_halo1(x)
    comm.update_halo2(x)
    return x


def v_cycle(levels, x, b, cfg):
    """One V-cycle on the finest level of ``levels``; ``x`` is updated in place.

    ``x`` must hold the Dirichlet values on Dirichlet DOFs. A full consistency
    update runs at entry so a caller-modified ``x`` is safe to smooth.
    """
    top = levels[-1]
    t0 = time.perf_counter()
    c0 = top.comm.transport.comm_time
    top.comm.make_consistent(x)
    coarse_stats = []
    for _ in range(cfg.cycles):
        _cycle(levels, len(levels) - 1, x, b, cfg, coarse_stats)
    r = residual_norm(top.a, x, b, top.comm)
    stats = SolveStats(iterations=1, final_residual=r, residuals=[r],
                       converged=all(s.converged for s in coarse_stats))
    stats.solve_time = time.perf_counter() - t0
    stats.comm_time = top.comm.transport.comm_time - c0
    return x, stats


def _reference_norm(a, x, b, comm):
    """Norm of the right-hand side of the free-DOF system, ``b_f - A_fD g``.

    This is the residual of ``x`` with every free entry zeroed, so it depends
    on the boundary data in ``x`` but not on the initial guess.
    """
    z = np.where(comm.mapper.space.dirichlet_mask, x, 0.0)
    return residual_norm(a, z, b, comm)


def solve_outer(levels, x, b, cfg, raise_on_failure=True):
    """Repeat V-cycles until ``||b - A x|| <= outer_tol * ||b||``.

    ``||b||`` is the norm of the free-DOF right-hand side ``b_f - A_fD g``,
    i.e. boundary data moved to the right. Both norms run over owned free
    DOFs; Dirichlet rows hold exactly. If the reference norm is zero the
    initial residual sets the scale instead.
    """
    top = levels[-1]
    comm = top.comm
    t0 = time.perf_counter()
    c0 = comm.transport.comm_time
    comm.make_consistent(x)
    r = residual_norm(top.a, x, b, comm)
    scale = _reference_norm(top.a, x, b, comm) or r
    stats = SolveStats(initial_residual=r, final_residual=r, residuals=[r])
    while r > cfg.outer_tol * scale and stats.iterations < cfg.outer_max_cycles:
        tc = time.perf_counter()
        _, cs = v_cycle(levels, x, b, cfg)
        r = cs.final_residual
        stats.iterations += 1
        stats.residuals.append(r)
        stats.cycle_times.append(time.perf_counter() - tc)
        if not cs.converged:
            stats.coarse_failures += 1
    stats.final_residual = r
    stats.converged = r <= cfg.outer_tol * scale
    stats.solve_time = time.perf_counter() - t0
    stats.comm_time = comm.transport.comm_time - c0
    if not stats.converged and raise_on_failure:
        raise NoConvergence(f"multigrid stalled at relative residual {r / scale:.3e} after "
                            f"{stats.iterations} cycles", stats)
    return stats
