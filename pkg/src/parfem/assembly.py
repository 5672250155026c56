"""Q1 mass/stiffness/load assembly on a subdomain and Dirichlet rows."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fespace import FEFamily, local_basis_eval
from .femapper import DofClass
from .linalg import CsrSparseMatrix
from .mesh import ref_vertex_offsets

__all__ = ["QuadratureRule", "ElementMatrices", "gauss_rule", "reference_matrices",
           "element_matrices", "assemble_matrices", "assemble_load", "assemble_system",
           "apply_dirichlet"]


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss rule on [0, 1]^d, exact to polynomial degree ``2*n - 1`` per axis."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def gauss_rule(dimension, n_per_axis=2):
    x, w = np.polynomial.legendre.leggauss(n_per_axis)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    grids = np.meshgrid(*([x] * dimension), indexing="ij")
    wgrid = np.meshgrid(*([w] * dimension), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return QuadratureRule(pts, wts, 2 * n_per_axis - 1)


@lru_cache(maxsize=None)
def _basis_tables(dimension, n_per_axis):
    rule = gauss_rule(dimension, n_per_axis)
    n_loc = 2 ** dimension
    phi = np.empty((rule.points.shape[0], n_loc))
    grad = np.empty((rule.points.shape[0], n_loc, dimension))
    for q, p in enumerate(rule.points):
        for i in range(n_loc):
            phi[q, i], grad[q, i] = local_basis_eval(FEFamily.Q1, i, p)
    return rule, phi, grad


@lru_cache(maxsize=None)
def reference_matrices(dimension):
    """Unit-cell Q1 mass matrix and per-axis stiffness parts ``K_a``.

    For a box with widths ``h`` the element matrices are
    ``vol * M`` and ``sum_a vol / h_a**2 * K_a``.
    """
    rule, phi, grad = _basis_tables(dimension, 2)
    mass = np.einsum("q,qi,qj->ij", rule.weights, phi, phi)
    stiff = np.einsum("q,qia,qja->aij", rule.weights, grad, grad)
    return mass, stiff


@dataclass(frozen=True)
class ElementMatrices:
    mass: np.ndarray
    stiffness: np.ndarray
    load: np.ndarray


def _cell_quadrature_points(mesh, cells, n_per_axis):
    rule = gauss_rule(mesh.dimension, n_per_axis)
    h = mesh.cell_width
    lower = mesh.corners[cells] * h
    return lower[:, None, :] + h * rule.points[None, :, :]


def element_matrices(mesh, cell, f=None, t=0.0):
    """Mass, stiffness and load of one cell (local order = reference vertex order)."""
    vol = mesh.cell_volume
    if vol <= 0.0:
        raise ValueError("degenerate cell")
    mass_ref, stiff_ref = reference_matrices(mesh.dimension)
    h = mesh.cell_width
    mass = vol * mass_ref
    stiffness = (vol / h ** 2) * stiff_ref.sum(axis=0)
    load = np.zeros(mass.shape[0])
    if f is not None:
        load = _cell_loads(mesh, np.array([cell]), f, t)[0]
    return ElementMatrices(mass, stiffness, load)


def _cell_loads(mesh, cells, f, t):
    rule, phi, _ = _basis_tables(mesh.dimension, 2)
    pts = _cell_quadrature_points(mesh, cells, 2)
    fq = np.asarray(f(t, pts.reshape(-1, mesh.dimension)), dtype=float).reshape(pts.shape[:2])
    return mesh.cell_volume * (fq * rule.weights[None, :]) @ phi


def assemble_matrices(space):
    """Mass and stiffness over own and halo cells.

    Owned rows are complete (every cell around an owned DOF is local) and,
    because contributions are summed in gcn order, bit-identical to a
    single-rank assembly. Columns are tagged with the DOF keys so matvecs are
    partition-independent too.
    """
    if space.family is not FEFamily.Q1:
        raise ValueError("assembly is implemented for Q1 only")
    mesh = space.mesh
    mass_ref, stiff_ref = reference_matrices(mesh.dimension)
    vol, h = mesh.cell_volume, mesh.cell_width
    me = vol * mass_ref
    ke = (vol / h ** 2) * stiff_ref.sum(axis=0)
    cd = space.cell_dofs
    n_loc = cd.shape[1]
    rows = np.repeat(cd, n_loc, axis=1).ravel()
    cols = np.tile(cd, (1, n_loc)).ravel()
    order = np.repeat(mesh.gcn, n_loc * n_loc)
    n = space.n_dofs
    keys = space.dof_keys
    m = CsrSparseMatrix.from_coo(rows, cols, np.tile(me.ravel(), mesh.n_cells), (n, n), order)
    k = CsrSparseMatrix.from_coo(rows, cols, np.tile(ke.ravel(), mesh.n_cells), (n, n), order)
    return m.with_column_keys(keys), k.with_column_keys(keys)


def assemble_load(space, comm, f, t):
    """Load vector: own-cell contributions, accumulated across ranks, halos refreshed."""
    mesh = space.mesh
    own = np.flatnonzero(space.sub.own_mask)
    vec = np.zeros(space.n_dofs)
    if f is None or own.size == 0:
        if comm is not None:
            comm.accumulate(vec)
        return vec
    loads = _cell_loads(mesh, own, f, t)
    dofs = space.cell_dofs[own]
    vals = loads.ravel()
    idx = dofs.ravel()
    sort = np.lexsort((np.repeat(mesh.gcn[own], dofs.shape[1]), idx))
    vec += np.bincount(idx[sort], weights=vals[sort], minlength=space.n_dofs)
    if comm is not None:
        comm.accumulate(vec)
    return vec


def assemble_system(space, comm, f=None, t=0.0):
    """``(M, K, F)`` for the heat equation on this rank."""
    m, k = assemble_matrices(space)
    return m, k, assemble_load(space, comm, f, t)


def dirichlet_dofs(space):
    return np.flatnonzero(space.dirichlet_mask)


def apply_dirichlet(matrix, rhs, space, g=None, t=0.0):
    """Unit rows for Dirichlet DOFs and ``rhs = g`` there (no column elimination).

    Returns the new matrix; ``rhs`` is modified in place.
    """
    dofs = dirichlet_dofs(space)
    if rhs is not None and dofs.size:
        rhs[dofs] = 0.0 if g is None else g(t, space.dof_coords[dofs])
    return matrix.with_identity_rows(dofs)


def q1_vertex_order(dimension):
    return ref_vertex_offsets(dimension)


assert DofClass.DIRICHLET == max(DofClass)  # Dirichlet rows are last after reordering
