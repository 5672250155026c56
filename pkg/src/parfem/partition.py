"""Coarse-mesh partitioning and per-rank subdomain construction.

Every rank computes the same partition from the shared coarse mesh, so no
broadcast is required. Ownership is inherited under refinement: the owner of
a level-``l`` cell is the owner of its coarse ancestor, whose gcn is
``gcn // n_children**l``.
"""
from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property

import numpy as np

from .fespace import FEFamily
from .mesh import cell_entity_keys, n_children, refine_uniform

__all__ = ["CellClass", "Strategy", "PartitionMap", "SubdomainMesh", "partition_cells",
           "build_subdomain", "refine_subdomain"]


class CellClass(IntEnum):
    DEPENDENT = 0
    INDEPENDENT = 1
    HALO = 2


class Strategy(Enum):
    GREEDY = "greedy"
    BISECTION = "bisection"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        return {"coordinatebisection": cls.BISECTION, "rcb": cls.BISECTION}.get(key) or cls(key)


@dataclass(frozen=True, eq=False)
class PartitionMap:
    """Owner rank of every coarse cell, indexed by coarse gcn."""

    owner: np.ndarray
    n_ranks: int
    dimension: int

    def owner_of(self, gcn, level):
        return self.owner[np.asarray(gcn) // n_children(self.dimension) ** level]

    def cell_counts(self):
        return np.bincount(self.owner, minlength=self.n_ranks)


def _bisect(centres, cells, ranks, owner):
    k = len(ranks)
    if k == 1:
        owner[cells] = ranks[0]
        return
    k_left = k // 2
    n_left = (len(cells) * k_left) // k
    pts = centres[cells]
    axis = int(np.argmax(pts.max(axis=0) - pts.min(axis=0)))
    # sort on the split axis, ties broken by the remaining axes then gcn
    keys = [cells] + [pts[:, a] for a in reversed(range(pts.shape[1])) if a != axis] + [pts[:, axis]]
    order = np.lexsort(keys)
    _bisect(centres, cells[order[:n_left]], ranks[:k_left], owner)
    _bisect(centres, cells[order[n_left:]], ranks[k_left:], owner)


def _facet_neighbours(mesh):
    keys = cell_entity_keys(mesh, "facet")
    flat = keys.reshape(-1)
    cell_of = np.repeat(np.arange(mesh.n_cells), keys.shape[1])
    order = np.argsort(flat, kind="stable")
    flat, cell_of = flat[order], cell_of[order]
    shared = np.flatnonzero(flat[1:] == flat[:-1])
    nbrs = [[] for _ in range(mesh.n_cells)]
    for i in shared:
        a, b = int(cell_of[i]), int(cell_of[i + 1])
        nbrs[a].append(b)
        nbrs[b].append(a)
    return [sorted(n) for n in nbrs]


def _greedy(mesh, k, owner):
    # breadth-first growth from the lowest unassigned gcn, facet adjacency
    n = mesh.n_cells
    nbrs = _facet_neighbours(mesh)
    by_gcn = np.argsort(mesh.gcn, kind="stable")
    targets = [n // k + (1 if r < n % k else 0) for r in range(k)]
    cursor = 0
    for rank in range(k):
        size = 0
        queue = deque()
        while size < targets[rank]:
            if not queue:
                while owner[by_gcn[cursor]] >= 0:
                    cursor += 1
                seed = int(by_gcn[cursor])
                owner[seed] = rank
                size += 1
                queue.append(seed)
                continue
            cell = queue.popleft()
            for nb in nbrs[cell]:
                if size >= targets[rank]:
                    break
                if owner[nb] < 0:
                    owner[nb] = rank
                    size += 1
                    queue.append(nb)


def partition_cells(coarse, k, strategy=Strategy.BISECTION):
    """Assign every coarse cell to one of ``k`` ranks.

    Recursive coordinate bisection splits along the longest extent of the cell
    centres, giving the lower half of the rank range the cells with smaller
    coordinates; part sizes differ by at most one cell. The greedy strategy
    grows breadth-first regions of near-equal size.
    """
    strategy = Strategy.parse(strategy)
    k = int(k)
    if k < 1:
        raise ValueError(f"number of ranks must be >= 1, got {k}")
    if k > coarse.n_cells:
        raise ValueError(f"cannot split {coarse.n_cells} cells over {k} ranks")
    owner = np.full(coarse.n_cells, -1, dtype=np.int64)
    if strategy is Strategy.BISECTION:
        centres = coarse.corners + 0.5
        _bisect(centres, np.arange(coarse.n_cells), list(range(k)), owner)
    else:
        _greedy(coarse, k, owner)
    by_gcn = np.empty_like(owner)
    by_gcn[coarse.gcn] = owner
    return PartitionMap(by_gcn, k, coarse.dimension)


@dataclass(frozen=True, eq=False)
class SubdomainMesh:
    """Own and halo cells of one rank on one level.

    ``mesh`` holds the local cells; ``cell_class`` and ``owner`` are aligned
    with its cell order.
    """

    rank: int
    mesh: object
    cell_class: np.ndarray
    owner: np.ndarray
    family: FEFamily
    pmap: PartitionMap

    @property
    def level(self):
        return self.mesh.level

    @property
    def n_cells(self):
        return self.mesh.n_cells

    @property
    def own_mask(self):
        return self.cell_class != CellClass.HALO

    @property
    def n_dependent(self):
        return int(np.count_nonzero(self.cell_class == CellClass.DEPENDENT))

    @property
    def n_independent(self):
        return int(np.count_nonzero(self.cell_class == CellClass.INDEPENDENT))

    @property
    def n_halo(self):
        return int(np.count_nonzero(self.cell_class == CellClass.HALO))

    @property
    def n_own(self):
        return self.n_dependent + self.n_independent

    @cached_property
    def neighbor_ranks(self):
        return tuple(int(r) for r in np.unique(self.owner[self.cell_class == CellClass.HALO]))

    def gcn_of(self, cls):
        return self.mesh.gcn[self.cell_class == cls]


def _classify(mesh, owner, rank, family):
    """Own/halo/dependent masks over the cells of ``mesh``."""
    own = owner == rank
    keys = cell_entity_keys(mesh, family.carrier)
    own_keys = np.unique(keys[own])
    other_keys = np.unique(keys[~own])
    halo = ~own & np.isin(keys, own_keys).any(axis=1)
    dependent = own & np.isin(keys, other_keys).any(axis=1)
    return own, halo, dependent


def _make_subdomain(mesh, owner, rank, family, pmap):
    own, halo, dependent = _classify(mesh, owner, rank, family)
    keep = own | halo
    cls = np.full(mesh.n_cells, CellClass.INDEPENDENT, dtype=np.int8)
    cls[dependent] = CellClass.DEPENDENT
    cls[halo] = CellClass.HALO
    return SubdomainMesh(rank, mesh.subset(keep), cls[keep], owner[keep], family, pmap)


def build_subdomain(mesh, pmap, rank, family=FEFamily.Q1):
    """Own cells of ``rank`` plus the halo cells sharing a DOF carrier with them.

    ``mesh`` is a full mesh level (any level of the global hierarchy).
    """
    if not 0 <= rank < pmap.n_ranks:
        raise ValueError(f"rank {rank} out of range for {pmap.n_ranks} ranks")
    family = FEFamily.parse(family)
    owner = pmap.owner_of(mesh.gcn, mesh.level)
    return _make_subdomain(mesh, owner, rank, family, pmap)


def refine_subdomain(sub, family=None):
    """Refine a subdomain locally and prune halo children that no longer touch
    an own cell through a DOF carrier."""
    family = sub.family if family is None else FEFamily.parse(family)
    fine = refine_uniform(sub.mesh)
    owner = sub.owner[fine.parent]
    return _make_subdomain(fine, owner, sub.rank, family, sub.pmap)
