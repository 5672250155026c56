"""Heat equation with a manufactured solution, Crank-Nicolson in time."""
import time
from dataclasses import dataclass, field

import numpy as np

from ..assembly import assemble_load, gauss_rule
from ..fespace import FEFamily, local_basis_eval
from ..linalg import spmv
from ..mesh import generate_unit_mesh
from ..multigrid import build_hierarchy, solve_outer
from ..partition import Strategy, partition_cells
from ..solvers import NoConvergence
from ..transport import run_ranks

__all__ = ["ModelProblem", "RunMetrics", "HeatResult", "l2_error", "heat_rank", "run_heat"]

DECAY = 0.1


@dataclass(frozen=True)
class ModelProblem:
    """``u = exp(-0.1 t) sin(pi x) cos(pi y) [cos(pi z)]`` on the unit box.

    ``f = du/dt - laplace(u) = (-0.1 + d pi^2) u`` and ``g = u`` on the boundary.
    """

    dimension: int = 3
    end_time: float = 5.0
    dt: float = 0.01

    def exact(self, t, points):
        p = np.atleast_2d(points)
        val = np.exp(-DECAY * t) * np.sin(np.pi * p[:, 0])
        for a in range(1, self.dimension):
            val = val * np.cos(np.pi * p[:, a])
        return val

    def source(self, t, points):
        return (-DECAY + self.dimension * np.pi ** 2) * self.exact(t, points)

    def boundary(self, t, points):
        return self.exact(t, points)


@dataclass
class RunMetrics:
    """Wall seconds per phase (slowest rank) and scaling figures vs a reference run."""

    ranks: int = 1
    initialization: float = 0.0
    assembling: float = 0.0
    solving: float = 0.0
    communication: float = 0.0
    total: float = 0.0
    reference_ranks: int = 1
    reference_total: float = 0.0
    reference_solving: float = 0.0

    @property
    def speedup(self):
        return self.reference_total / self.total if self.total > 0 else float("nan")

    @property
    def solve_speedup(self):
        return self.reference_solving / self.solving if self.solving > 0 else float("nan")

    @property
    def ideal_speedup(self):
        return self.ranks / self.reference_ranks

    @property
    def efficiency(self):
        return self.speedup / self.ideal_speedup

    @property
    def solve_efficiency(self):
        return self.solve_speedup / self.ideal_speedup

    def relative_to(self, ranks, total, solving):
        self.reference_ranks, self.reference_total, self.reference_solving = ranks, total, solving
        return self


@dataclass
class HeatResult:
    l2_error: float
    max_error: float
    metrics: RunMetrics
    keys: np.ndarray
    solution: np.ndarray
    n_global: int = 0
    cycles: list = field(default_factory=list)


def _q1_table(dimension, n_per_axis):
    rule = gauss_rule(dimension, n_per_axis)
    phi = np.array([[local_basis_eval(FEFamily.Q1, i, p)[0] for i in range(2 ** dimension)]
                    for p in rule.points])
    return rule, phi


def l2_error(space, comm, u, exact, t, n_per_axis=3):
    """Global ``||u_h - u||_L2`` over own cells (tensor Gauss, 3 points per axis)."""
    mesh = space.mesh
    own = np.flatnonzero(space.sub.own_mask)
    rule, phi = _q1_table(mesh.dimension, n_per_axis)
    h = mesh.cell_width
    pts = mesh.corners[own][:, None, :] * h + h * rule.points[None, :, :]
    uh = u[space.cell_dofs[own]] @ phi.T
    ue = exact(t, pts.reshape(-1, mesh.dimension)).reshape(uh.shape)
    local = float(mesh.cell_volume * np.sum((uh - ue) ** 2 * rule.weights[None, :]))
    return float(np.sqrt(comm.transport.allreduce_sum(local)))


def _owned(mapper):
    return np.flatnonzero(mapper.owned_free_mask | mapper.owned_dirichlet_mask)


def heat_rank(transport, cfg):
    """Body of one rank of :func:`run_heat`."""
    t_start = time.perf_counter()
    transport.reset_counters()
    problem = ModelProblem(cfg.dimension, cfg.end_time, cfg.dt)
    dt = cfg.dt
    timings = {}
    coarse = generate_unit_mesh(cfg.dimension, cfg.n_coarse)
    t0 = time.perf_counter()
    pmap = partition_cells(coarse, transport.size, Strategy.parse(cfg.partition))
    timings["initialization"] = time.perf_counter() - t0
    levels = build_hierarchy(coarse, pmap, transport, cfg.levels, mass_coeff=1.0,
                             stiffness_coeff=0.5 * dt, dirichlet=True, timings=timings)
    top = levels[-1]
    space, comm = top.space, top.comm
    t1 = time.perf_counter()
    rhs_op = top.mass.combine(1.0, top.stiffness, -0.5 * dt)
    coords = space.dof_coords
    bnd = space.dirichlet
    u = problem.exact(0.0, coords)
    f_old = assemble_load(space, comm, problem.source, 0.0)
    assembling = time.perf_counter() - t1
    mg = cfg.multigrid_config()
    solving = 0.0
    cycles = []
    for n in range(cfg.n_steps):
        t = (n + 1) * dt
        ta = time.perf_counter()
        f_new = assemble_load(space, comm, problem.source, t)
        b = spmv(rhs_op, u, comm)
        b += 0.5 * dt * (f_old + f_new)
        g = problem.boundary(t, coords[bnd])
        b[bnd] = g
        u[bnd] = g
        f_old = f_new
        tb = time.perf_counter()
        assembling += tb - ta
        try:
            stats = solve_outer(levels, u, b, mg)
        except NoConvergence as exc:
            raise NoConvergence(f"time step {n + 1}: {exc}", exc.stats) from exc
        solving += time.perf_counter() - tb
        cycles.append(stats.iterations)
    t_end = cfg.n_steps * dt
    l2 = l2_error(space, comm, u, problem.exact, t_end)
    own = _owned(top.mapper)
    local_max = float(np.max(np.abs(u[own] - problem.exact(t_end, coords[own])), initial=0.0))
    max_err = transport.allreduce_max(local_max)
    return {
        "l2": l2, "max": max_err, "keys": space.dof_keys[own], "values": u[own].copy(),
        "n_global": top.mapper.n_global, "cycles": cycles,
        "initialization": timings["initialization"], "assembling": timings["assembling"] + assembling,
        "solving": solving, "communication": transport.comm_time,
        "total": time.perf_counter() - t_start,
    }


def run_heat(cfg):
    """Run the model problem on ``cfg.ranks`` logical ranks.

    Returns the final-time errors, the phase timings (slowest rank per phase)
    and the finest-level solution keyed by rank-independent DOF keys.
    """
    results = run_ranks(cfg.ranks, heat_rank, cfg, timeout=cfg.timeout)
    keys = np.concatenate([r["keys"] for r in results])
    vals = np.concatenate([r["values"] for r in results])
    order = np.argsort(keys, kind="stable")
    phases = {k: max(r[k] for r in results)
              for k in ("initialization", "assembling", "solving", "communication", "total")}
    metrics = RunMetrics(ranks=cfg.ranks, **phases)
    metrics.relative_to(cfg.ranks, metrics.total, metrics.solving)
    return HeatResult(results[0]["l2"], results[0]["max"], metrics, keys[order], vals[order],
                      results[0]["n_global"], results[0]["cycles"])
