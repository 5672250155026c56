"""Structured box meshes of the unit square/cube with uniform refinement.

Cells are axis-aligned boxes addressed by the integer lattice coordinates of
their lower corner. On level ``l`` of a hierarchy built from an ``n``-per-axis
coarse mesh the lattice has ``n * 2**l`` cells per axis, so every vertex, facet
and cell centre has an exact integer address and no floating-point tolerance
is needed anywhere in the topology.

Each cell carries a global cell number (gcn). Coarse cells are numbered
lexicographically (first axis slowest); a child gets
``n_children * parent_gcn + child_index`` so numbers stay unique on every level
without any communication.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Vertex", "Cell", "MeshLevel", "generate_unit_mesh", "refine_uniform",
           "child_gcn", "ref_vertex_offsets", "child_offsets", "cell_entity_keys",
           "decode_keys", "n_children"]


def n_children(dimension):
    return 2 ** dimension


def ref_vertex_offsets(dimension):
    """Reference vertex order of a cell: counter-clockwise in the first two axes,
    bottom face before top face in 3D."""
    quad = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.int64)
    if dimension == 2:
        return quad
    if dimension == 3:
        return np.vstack([np.hstack([quad, np.zeros((4, 1), np.int64)]),
                          np.hstack([quad, np.ones((4, 1), np.int64)])])
    raise ValueError(f"dimension must be 2 or 3, got {dimension!r}")


def child_offsets(dimension):
    """Child corner offsets, lexicographic in child-centre coordinates
    (first axis slowest); row ``i`` is child index ``i``."""
    if dimension not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {dimension!r}")
    return np.array(list(np.ndindex(*(2,) * dimension)), dtype=np.int64)


def child_gcn(parent_gcn, nc, child_index):
    """Global cell number of child ``child_index`` of a parent with ``nc`` children."""
    if not 0 <= child_index < nc:
        raise ValueError(f"child_index {child_index} out of range for {nc} children")
    return nc * parent_gcn + child_index


@dataclass(frozen=True)
class Vertex:
    id: int
    coords: tuple
    on_boundary: bool


@dataclass(frozen=True)
class Cell:
    local_id: int
    gcn: int
    vertex_ids: tuple
    parent: int | None
    level: int
    children: tuple | None = None


@dataclass(frozen=True, eq=False)
class MeshLevel:
    """One level of a (possibly partial) structured mesh.

    Arrays are owned by the instance and must not be mutated.

    Attributes
    ----------
    dimension : int
    n_coarse : int
        Cells per axis on level 0 of the hierarchy this level belongs to.
    level : int
    corners : ndarray, shape (n_cells, dimension)
        Lattice coordinates of each cell's lower corner.
    gcn : ndarray, shape (n_cells,)
    cell_vertices : ndarray, shape (n_cells, 2**dimension)
        Local vertex ids in reference order (:func:`ref_vertex_offsets`).
    vertex_lattice : ndarray, shape (n_vertices, dimension)
        Lattice coordinates of the local vertices, sorted lexicographically.
    parent : ndarray or None
        Local id of each cell's parent in the coarser level.
    """

    dimension: int
    n_coarse: int
    level: int
    corners: np.ndarray
    gcn: np.ndarray
    cell_vertices: np.ndarray
    vertex_lattice: np.ndarray
    parent: np.ndarray | None = None

    @property
    def resolution(self):
        return self.n_coarse * 2 ** self.level

    @property
    def n_cells(self):
        return self.corners.shape[0]

    @property
    def n_vertices(self):
        return self.vertex_lattice.shape[0]

    @property
    def cell_width(self):
        return 1.0 / self.resolution

    @property
    def cell_volume(self):
        return self.cell_width ** self.dimension

    @cached_property
    def vertex_coords(self):
        return self.vertex_lattice / self.resolution

    @cached_property
    def vertex_on_boundary(self):
        lat = self.vertex_lattice
        return ((lat == 0) | (lat == self.resolution)).any(axis=1)

    def cell_volumes(self):
        return np.full(self.n_cells, self.cell_volume)

    def vertex(self, i):
        return Vertex(int(i), tuple(float(c) for c in self.vertex_coords[i]),
                      bool(self.vertex_on_boundary[i]))

    def cell(self, i):
        parent = None if self.parent is None else int(self.parent[i])
        return Cell(int(i), int(self.gcn[i]), tuple(int(v) for v in self.cell_vertices[i]),
                    parent, self.level)

    def subset(self, cells):
        """Mesh restricted to ``cells`` (mask or index array), order preserved."""
        cells = np.asarray(cells)
        if cells.dtype == bool:
            cells = np.flatnonzero(cells)
        parent = None if self.parent is None else self.parent[cells]
        return _from_cells(self.dimension, self.n_coarse, self.level,
                           self.corners[cells], self.gcn[cells], parent)

    def facet_multiplicity(self):
        """Number of cells sharing each facet of the level (1 on the boundary of
        the covered region, 2 inside)."""
        keys = cell_entity_keys(self, "facet")
        _, counts = np.unique(keys, return_counts=True)
        return counts


def _encode(doubled, resolution):
    base = 2 * resolution + 1
    shape = (base,) * doubled.shape[-1]
    flat = doubled.reshape(-1, doubled.shape[-1])
    return np.ravel_multi_index(tuple(flat.T), shape).reshape(doubled.shape[:-1])


def decode_keys(keys, dimension, resolution):
    """Inverse of the entity key encoding: doubled lattice coordinates."""
    base = 2 * resolution + 1
    return np.stack(np.unravel_index(np.asarray(keys), (base,) * dimension), axis=-1)


def cell_entity_keys(mesh, kind):
    """Rank-independent integer keys of the entities of each cell.

    Entities are addressed by doubled lattice coordinates of their centre
    (vertices: all even; facets: only the normal axis even; cells: all odd),
    encoded lexicographically so that sorting keys sorts by position.

    Returns an array of shape ``(n_cells, m)`` with ``m`` = 2**d vertices in
    reference order, 2*d facets ordered (axis, low/high side), or 1 cell.
    """
    c2 = 2 * mesh.corners
    d = mesh.dimension
    if kind == "vertex":
        doubled = c2[:, None, :] + 2 * ref_vertex_offsets(d)[None, :, :]
    elif kind == "facet":
        centre = c2 + 1
        doubled = np.repeat(centre[:, None, :], 2 * d, axis=1)
        for axis in range(d):
            for side in (0, 1):
                doubled[:, 2 * axis + side, axis] = c2[:, axis] + 2 * side
    elif kind == "cell":
        doubled = (c2 + 1)[:, None, :]
    else:
        raise ValueError(f"unknown entity kind {kind!r}")
    return _encode(doubled, mesh.resolution)


def _from_cells(dimension, n_coarse, level, corners, gcn, parent):
    resolution = n_coarse * 2 ** level
    corners = np.ascontiguousarray(corners, dtype=np.int64)
    lattice = corners[:, None, :] + ref_vertex_offsets(dimension)[None, :, :]
    shape = (resolution + 1,) * dimension
    keys = np.ravel_multi_index(tuple(lattice.reshape(-1, dimension).T), shape)
    uniq, inverse = np.unique(keys, return_inverse=True)
    vertex_lattice = np.stack(np.unravel_index(uniq, shape), axis=1).astype(np.int64)
    cell_vertices = inverse.reshape(corners.shape[0], -1).astype(np.int64)
    return MeshLevel(dimension, n_coarse, level, corners,
                     np.ascontiguousarray(gcn, dtype=np.int64), cell_vertices,
                     vertex_lattice, parent)


def generate_unit_mesh(dimension, n_per_axis):
    """Structured mesh of the unit square (d=2) or cube (d=3).

    >>> m = generate_unit_mesh(2, 2)
    >>> m.n_cells, m.n_vertices
    (4, 9)
    """
    if dimension not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {dimension!r}")
    if int(n_per_axis) < 1:
        raise ValueError(f"n_per_axis must be >= 1, got {n_per_axis!r}")
    n = int(n_per_axis)
    corners = np.stack(np.unravel_index(np.arange(n ** dimension), (n,) * dimension), axis=1)
    return _from_cells(dimension, n, 0, corners, np.arange(n ** dimension), None)


def refine_uniform(coarse):
    """Split every cell into 2**d children; children of cell ``p`` get local ids
    ``p*nc .. p*nc+nc-1`` in child-index order."""
    d = coarse.dimension
    nc = n_children(d)
    offsets = child_offsets(d)
    corners = (2 * coarse.corners[:, None, :] + offsets[None, :, :]).reshape(-1, d)
    gcn = (nc * coarse.gcn[:, None] + np.arange(nc)[None, :]).reshape(-1)
    parent = np.repeat(np.arange(coarse.n_cells, dtype=np.int64), nc)
    return _from_cells(d, coarse.n_coarse, coarse.level + 1, corners, gcn, parent)
