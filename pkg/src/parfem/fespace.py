"""Finite element families and per-subdomain DOF enumeration."""
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property

import numpy as np

from .mesh import cell_entity_keys, decode_keys, ref_vertex_offsets

__all__ = ["FEFamily", "FESpace", "build_fespace", "local_basis_eval"]


class FEFamily(Enum):
    """Supported element families and the entity kind carrying their DOFs."""

    Q1 = "q1"
    ROTATED_Q1 = "rotated_q1"
    Q0 = "q0"

    @property
    def carrier(self):
        return {"q1": "vertex", "rotated_q1": "facet", "q0": "cell"}[self.value]

    def n_local(self, dimension):
        return {"q1": 2 ** dimension, "rotated_q1": 2 * dimension, "q0": 1}[self.value]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"continuous": "q1", "continuousq1": "q1",
                   "nonconforming": "rotated_q1", "nonconformingrotatedq1": "rotated_q1",
                   "rotatedq1": "rotated_q1", "discontinuous": "q0", "discontinuousq0": "q0"}
        key = str(value).strip().lower().replace("-", "_")
        return cls(aliases.get(key.replace("_", ""), key))


@dataclass(frozen=True, eq=False)
class FESpace:
    """DOFs of one family on a subdomain mesh.

    ``cell_dofs[c, j]`` is the local DOF at position ``j`` of cell ``c``; the
    position is the cell-local index exchanged during mapping, so it means the
    same entity on every rank. ``dof_keys`` identifies the carrier entity of
    each DOF independently of the rank.
    """

    family: FEFamily
    sub: object
    cell_dofs: np.ndarray
    dof_keys: np.ndarray
    dirichlet_mask: np.ndarray

    @property
    def mesh(self):
        return self.sub.mesh

    @property
    def n_dofs(self):
        return self.dof_keys.shape[0]

    @property
    def dirichlet(self):
        return np.flatnonzero(self.dirichlet_mask)

    @cached_property
    def dof_coords(self):
        mesh = self.mesh
        return decode_keys(self.dof_keys, mesh.dimension, mesh.resolution) / (2.0 * mesh.resolution)

    def renumbered(self, perm):
        """Copy with DOF ``i`` moved to index ``perm[i]``."""
        perm = np.asarray(perm)
        keys = np.empty_like(self.dof_keys)
        keys[perm] = self.dof_keys
        mask = np.empty_like(self.dirichlet_mask)
        mask[perm] = self.dirichlet_mask
        return replace(self, cell_dofs=perm[self.cell_dofs], dof_keys=keys, dirichlet_mask=mask)


def build_fespace(sub, family=FEFamily.Q1, dirichlet=True):
    """Number the DOFs of ``family`` on ``sub`` (own and halo cells).

    DOFs are numbered by ascending carrier key. With ``dirichlet=False`` no DOF
    is marked Dirichlet (natural boundary conditions everywhere).
    """
    family = FEFamily.parse(family)
    mesh = sub.mesh
    keys = cell_entity_keys(mesh, family.carrier)
    uniq, inverse = np.unique(keys, return_inverse=True)
    cell_dofs = inverse.reshape(keys.shape).astype(np.int64)
    if dirichlet:
        doubled = decode_keys(uniq, mesh.dimension, mesh.resolution)
        mask = ((doubled == 0) | (doubled == 2 * mesh.resolution)).any(axis=1)
    else:
        mask = np.zeros(uniq.shape[0], dtype=bool)
    return FESpace(family, sub, cell_dofs, uniq.astype(np.int64), mask)


def _q1_eval(dimension, local_dof, x):
    offsets = ref_vertex_offsets(dimension)
    if not 0 <= local_dof < offsets.shape[0]:
        raise ValueError(f"local_dof {local_dof} invalid for Q1 in {dimension}D")
    bits = offsets[local_dof]
    factors = np.where(bits == 1, x, 1.0 - x)
    dfactors = np.where(bits == 1, 1.0, -1.0)
    value = float(np.prod(factors))
    grad = np.array([dfactors[a] * np.prod(np.delete(factors, a)) for a in range(dimension)])
    return value, grad


def _rotated_q1_eval(dimension, local_dof, x):
    # Facet-midpoint nodal basis of span{1, x_a, x_a^2 - x_b^2} on [-1, 1]^d.
    if not 0 <= local_dof < 2 * dimension:
        raise ValueError(f"local_dof {local_dof} invalid for rotated Q1 in {dimension}D")
    axis, side = divmod(local_dof, 2)
    sign = 1.0 if side else -1.0
    xi = 2.0 * x - 1.0
    d = dimension
    others = [b for b in range(d) if b != axis]
    quad = (d - 1) * xi[axis] ** 2 - sum(xi[b] ** 2 for b in others)
    value = 1.0 / (2 * d) + sign * xi[axis] / 2.0 + quad / (2 * d)
    dxi = np.empty(d)
    dxi[axis] = sign / 2.0 + 2.0 * (d - 1) * xi[axis] / (2 * d)
    for b in others:
        dxi[b] = -2.0 * xi[b] / (2 * d)
    return float(value), 2.0 * dxi


def local_basis_eval(family, local_dof, ref_point):
    """Value and gradient of reference shape function ``local_dof`` at a point
    of the unit reference cell [0, 1]^d.

    >>> local_basis_eval(FEFamily.Q1, 0, (0.0, 0.0))[0]
    1.0
    """
    family = FEFamily.parse(family)
    x = np.asarray(ref_point, dtype=float)
    d = x.shape[0]
    if d not in (2, 3):
        raise ValueError("reference point must have 2 or 3 coordinates")
    if family is FEFamily.Q1:
        return _q1_eval(d, int(local_dof), x)
    if family is FEFamily.ROTATED_Q1:
        return _rotated_q1_eval(d, int(local_dof), x)
    if local_dof != 0:
        raise ValueError(f"local_dof {local_dof} invalid for Q0")
    return 1.0, np.zeros(d)
