"""MatrixMarket export of a distributed system using the global DOF numbering.

Every rank writes its owned rows to a part file; rank 0 writes the header and
concatenates the parts in rank order. Indices are 1-based.
"""
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..assembly import assemble_load
from ..linalg import spmv
from ..mesh import generate_unit_mesh
from ..multigrid import build_hierarchy, solve_outer
from ..partition import Strategy, partition_cells
from ..transport import run_ranks
from .heat import ModelProblem

__all__ = ["export_matrixmarket", "export_rank", "run_export"]

_MATRIX_HEADER = "%%MatrixMarket matrix coordinate real general\n"
_ARRAY_HEADER = "%%MatrixMarket matrix array real general\n"


def _owned_rows(a, mapper):
    """Owned rows (free and Dirichlet) as global (row, col, value), sorted."""
    rows = np.flatnonzero(mapper.owned_free_mask | mapper.owned_dirichlet_mask)
    counts = np.diff(a.row_offsets)[rows]
    pos = np.concatenate([np.arange(a.row_offsets[r], a.row_offsets[r + 1]) for r in rows]) \
        if rows.size else np.zeros(0, np.int64)
    g = mapper.global_of
    gr = np.repeat(g[rows], counts)
    gc = g[a.col_indices[pos]]
    order = np.lexsort((gc, gr))
    return gr[order], gc[order], a.values[pos][order]


def export_matrixmarket(a, rhs, mapper, transport, path):
    """Write ``a`` (and ``rhs`` when given) as MatrixMarket files.

    The matrix goes to ``path``; the right-hand side to ``<stem>_rhs.mtx`` in
    ``array`` format, ordered by global number. Returns the written paths on
    rank 0 and ``None`` elsewhere.
    """
    path = Path(path)
    rank = transport.rank
    gr, gc, vals = _owned_rows(a, mapper)
    part = path.with_name(f"{path.name}.part{rank}")
    with open(part, "w") as fh:
        for i, j, v in zip(gr + 1, gc + 1, vals):
            fh.write(f"{i} {j} {v:.17g}\n")
    if rhs is not None:
        free = np.flatnonzero(mapper.owned_free_mask)
        fixed = np.flatnonzero(mapper.owned_dirichlet_mask)
        for kind, idx in (("free", free), ("dirichlet", fixed)):
            idx = idx[np.argsort(mapper.global_of[idx])]
            p = path.with_name(f"{path.name}.rhs-{kind}{rank}")
            with open(p, "w") as fh:
                fh.writelines(f"{v:.17g}\n" for v in rhs[idx])
    nnz = transport.allreduce_sum(int(vals.size))
    transport.barrier()
    written = None
    if rank == 0:
        n = mapper.n_global
        with open(path, "w") as out:
            out.write(_MATRIX_HEADER)
            out.write(f"{n} {n} {nnz}\n")
            for r in range(transport.size):
                p = path.with_name(f"{path.name}.part{r}")
                out.write(p.read_text())
                p.unlink()
        written = [path]
        if rhs is not None:
            rhs_path = path.with_name(path.stem + "_rhs.mtx")
            with open(rhs_path, "w") as out:
                out.write(_ARRAY_HEADER)
                out.write(f"{n} 1\n")
                for kind in ("free", "dirichlet"):
                    for r in range(transport.size):
                        p = path.with_name(f"{path.name}.rhs-{kind}{r}")
                        out.write(p.read_text())
                        p.unlink()
            written.append(rhs_path)
    transport.barrier()
    return written


def export_rank(transport, cfg, path, tol=None):
    """Assemble the first Crank-Nicolson system on the finest level, export it,
    and solve it with multigrid. Returns the rank's owned solution keyed by
    global number."""
    dt = cfg.dt
    problem = ModelProblem(cfg.dimension, cfg.end_time, dt)
    coarse = generate_unit_mesh(cfg.dimension, cfg.n_coarse)
    pmap = partition_cells(coarse, transport.size, Strategy.parse(cfg.partition))
    levels = build_hierarchy(coarse, pmap, transport, cfg.levels, mass_coeff=1.0,
                             stiffness_coeff=0.5 * dt)
    top = levels[-1]
    space, comm = top.space, top.comm
    coords = space.dof_coords
    bnd = space.dirichlet
    u = problem.exact(0.0, coords)
    f = assemble_load(space, comm, problem.source, 0.0) + assemble_load(space, comm, problem.source, dt)
    b = spmv(top.mass.combine(1.0, top.stiffness, -0.5 * dt), u, comm) + 0.5 * dt * f
    g = problem.boundary(dt, coords[bnd])
    b[bnd] = g
    u[bnd] = g
    written = export_matrixmarket(top.a, b, top.mapper, transport, path)
    mg = cfg.multigrid_config()
    if tol is not None:
        mg = replace(mg, outer_tol=tol)
    solve_outer(levels, u, b, mg)
    m = top.mapper
    own = np.flatnonzero(m.owned_free_mask | m.owned_dirichlet_mask)
    return {"written": written, "global": m.global_of[own], "values": u[own].copy(),
            "n_global": m.n_global}


def run_export(cfg, path, tol=None):
    """Export on ``cfg.ranks`` ranks; returns ``(paths, mg_solution_by_global_number)``."""
    results = run_ranks(cfg.ranks, export_rank, cfg, path, tol, timeout=cfg.timeout)
    x = np.empty(results[0]["n_global"])
    for r in results:
        x[r["global"]] = r["values"]
    return results[0]["written"], x
