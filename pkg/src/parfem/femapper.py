"""ParFEMapper: DOF classes, cross-rank DOF maps, reordering, global numbering.

Every local DOF of a subdomain FE space gets exactly one class. Underneath
the class each DOF has a structural role:

* owned  -- this rank computes its value (Master, Dependent*, Independent),
* mirror -- an interface DOF computed by another rank (Slave),
* halo   -- lives only on halo cells, value supplied by a neighbour.

Dirichlet DOFs keep their role (it decides who numbers them globally) but
their class is ``DIRICHLET`` and they never travel on the value channels.

Value channels (``master_slave``, ``halo1``, ``halo2``) carry consistency
updates. Two more channels (``dirichlet_ms``, ``dirichlet_halo``) exist only
so that Dirichlet DOFs receive their global number from the owning rank.
"""
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import kernels
from .partition import CellClass

__all__ = ["DofClass", "UnmatchedDof", "ParFEMapper", "VALUE_CHANNELS", "ALL_CHANNELS",
           "classify_dofs", "build_dof_maps", "reorder_dofs", "apply_reordering",
           "assign_global_numbers", "build_mapper", "push_channel", "assign_masters"]


class DofClass(IntEnum):
    """DOF classes; the integer value is the position in the reordered numbering."""

    MASTER = 0
    INDEPENDENT = 1
    DEPENDENT1 = 2
    DEPENDENT2 = 3
    SLAVE = 4
    HALO1 = 5
    HALO2 = 6
    DIRICHLET = 7


ROLE_OWNED, ROLE_MIRROR, ROLE_HALO = 0, 1, 2

VALUE_CHANNELS = ("master_slave", "halo1", "halo2")
ALL_CHANNELS = VALUE_CHANNELS + ("dirichlet_ms", "dirichlet_halo")


class UnmatchedDof(RuntimeError):
    """A mapping request named a (gcn, cell-local index) pair with no valid local
    counterpart. Points at an inconsistent partition or halo pruning."""


@dataclass(eq=False)
class ParFEMapper:
    """Mapping information of one FE space on one rank.

    Attributes
    ----------
    space : FESpace
        The space, renumbered once :func:`apply_reordering` has run.
    dof_class : ndarray of int8
    role : ndarray of int8
        Structural role (owned / mirror / halo), see module docstring.
    master_rank : ndarray
        Master rank of interface DOFs (including Dirichlet ones), -1 elsewhere.
    send_lists, recv_lists : dict
        ``{channel: {rank: local dof indices}}``; the i-th entries of rank r's
        send list to q and q's receive list from r are the same physical DOF.
    global_of : ndarray
        Global DOF number (0-based). Free DOFs come first, Dirichlet DOFs last.
    """

    space: object
    rank: int
    size: int
    tag: object
    dof_class: np.ndarray
    role: np.ndarray
    master_rank: np.ndarray
    send_lists: dict = field(default_factory=dict)
    recv_lists: dict = field(default_factory=dict)
    perm: np.ndarray | None = None
    global_of: np.ndarray | None = None
    n_global_free: int = 0
    n_global: int = 0
    own_dof_counts: tuple = ()

    @property
    def n_dofs(self):
        return self.space.n_dofs

    @property
    def neighbor_ranks(self):
        return self.space.sub.neighbor_ranks

    def count(self, cls):
        return int(np.count_nonzero(self.dof_class == cls))

    def counts(self):
        """Class counts plus the derived totals used in reports."""
        c = {k.name.lower(): self.count(k) for k in DofClass}
        c["dependent"] = c["dependent1"] + c["dependent2"]
        c["interface"] = c["master"] + c["slave"]
        c["halo"] = c["halo1"] + c["halo2"]
        c["own"] = self.n_own_dofs
        c["sent_halo1"] = self.list_total("halo1", send=True)
        c["sent_halo2"] = self.list_total("halo2", send=True)
        return c

    @property
    def owned_free_mask(self):
        return np.isin(self.dof_class, (DofClass.MASTER, DofClass.INDEPENDENT,
                                        DofClass.DEPENDENT1, DofClass.DEPENDENT2))

    @property
    def n_own_dofs(self):
        return int(np.count_nonzero(self.owned_free_mask))

    @property
    def owned_dirichlet_mask(self):
        return (self.dof_class == DofClass.DIRICHLET) & (self.role == ROLE_OWNED)

    @property
    def n_master(self):
        return self.count(DofClass.MASTER)

    @property
    def n_dirichlet(self):
        return self.count(DofClass.DIRICHLET)

    @property
    def is_reordered(self):
        return self.perm is not None

    def list_total(self, channel, send=True):
        lists = (self.send_lists if send else self.recv_lists).get(channel, {})
        return int(sum(len(v) for v in lists.values()))

    def channel_peers(self, channel):
        return sorted(set(self.send_lists.get(channel, {})) | set(self.recv_lists.get(channel, {})))


def _touched(cell_dofs, cell_mask, n):
    t = np.zeros(n, dtype=bool)
    t[cell_dofs[cell_mask].ravel()] = True
    return t


def assign_masters(gathered, size):
    """Deterministic balanced master assignment for interface entities.

    ``gathered`` holds, per rank, ``(keys, cand_offsets, cand_ranks)``. Entities
    are processed in ascending key order; each goes to the candidate with the
    fewest masters so far, ties to the lowest rank. Returns ``(keys, master)``
    with unique sorted keys.
    """
    keys = [g[0] for g in gathered]
    if not keys or sum(k.size for k in keys) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    all_keys = np.concatenate(keys)
    src = np.concatenate([np.full(k.size, r) for r, k in enumerate(keys)])
    pos = np.concatenate([np.arange(k.size) for k in keys])
    uniq, first = np.unique(all_keys, return_index=True)
    offsets = [0]
    cands = []
    for i in first:
        off, cr = gathered[src[i]][1], gathered[src[i]][2]
        c = cr[off[pos[i]]:off[pos[i] + 1]]
        cands.append(c)
        offsets.append(offsets[-1] + c.size)
    offsets = np.asarray(offsets, dtype=np.int64)
    cands = np.concatenate(cands).astype(np.int64)
    master = np.empty(uniq.size, dtype=np.int64)
    kernels.greedy_masters(offsets, cands, size, master)
    return uniq, master


def classify_dofs(space, transport, tag=0):
    """Assign a :class:`DofClass` to every local DOF of ``space``.

    Master ranks of interface DOFs are agreed on through one ``allgather`` of
    the interface entity keys and their candidate ranks.
    """
    sub = space.sub
    cd = space.cell_dofs
    n = space.n_dofs
    rank, size = transport.rank, transport.size
    own_cell = sub.own_mask
    t_own = _touched(cd, own_cell, n)
    t_halo = _touched(cd, ~own_cell, n)
    t_dep = _touched(cd, sub.cell_class == CellClass.DEPENDENT, n)
    interface = t_own & t_halo
    halo = ~t_own
    dependent = t_own & ~interface & t_dep
    dirichlet = space.dirichlet_mask

    # candidate ranks of each interface DOF: owners of all cells around it
    inc_dof = cd.ravel()
    inc_owner = np.repeat(sub.owner, cd.shape[1])
    sel = interface[inc_dof]
    pairs = np.unique(inc_dof[sel] * size + inc_owner[sel])
    pair_dof, pair_rank = np.divmod(pairs, size)

    payload = []
    groups = (interface & ~dirichlet, interface & dirichlet)
    for mask in groups:
        dofs = np.flatnonzero(mask)
        in_group = mask[pair_dof]
        gd, gr = pair_dof[in_group], pair_rank[in_group]
        offsets = np.concatenate([[0], np.cumsum(np.bincount(np.searchsorted(dofs, gd),
                                                             minlength=dofs.size))])
        payload.append((space.dof_keys[dofs], offsets.astype(np.int64), gr.astype(np.int64)))
    gathered = transport.allgather(tuple(payload))

    master_rank = np.full(n, -1, dtype=np.int64)
    for g, mask in enumerate(groups):
        keys, master = assign_masters([p[g] for p in gathered], size)
        dofs = np.flatnonzero(mask)
        if dofs.size:
            master_rank[dofs] = master[np.searchsorted(keys, space.dof_keys[dofs])]

    cls = np.full(n, DofClass.INDEPENDENT, dtype=np.int8)
    cls[dependent] = DofClass.DEPENDENT1
    cls[halo] = DofClass.HALO2
    cls[interface] = np.where(master_rank[interface] == rank, DofClass.MASTER, DofClass.SLAVE)
    cls[dirichlet] = DofClass.DIRICHLET
    near_master = _touched(cd, (cls[cd] == DofClass.MASTER).any(axis=1), n) & ~dirichlet
    cls[halo & near_master] = DofClass.HALO1
    cls[dependent & near_master] = DofClass.DEPENDENT2

    role = np.full(n, ROLE_OWNED, dtype=np.int8)
    role[interface & (master_rank != rank)] = ROLE_MIRROR
    role[halo] = ROLE_HALO
    return ParFEMapper(space, rank, size, tag, cls, role, master_rank)


def _channel_of(mapper):
    cls, role = mapper.dof_class, mapper.role
    dirichlet = cls == DofClass.DIRICHLET
    ch = np.full(cls.shape, -1, dtype=np.int8)
    names = {name: i for i, name in enumerate(ALL_CHANNELS)}
    ch[(role == ROLE_MIRROR) & ~dirichlet] = names["master_slave"]
    ch[(role == ROLE_MIRROR) & dirichlet] = names["dirichlet_ms"]
    ch[cls == DofClass.HALO1] = names["halo1"]
    ch[cls == DofClass.HALO2] = names["halo2"]
    ch[(role == ROLE_HALO) & dirichlet] = names["dirichlet_halo"]
    return ch


def _accepts(mapper, channel, dofs):
    cls, role = mapper.dof_class[dofs], mapper.role[dofs]
    dirichlet = cls == DofClass.DIRICHLET
    if channel == "master_slave":
        return cls == DofClass.MASTER
    if channel == "dirichlet_ms":
        return dirichlet & (role == ROLE_OWNED) & (mapper.master_rank[dofs] == mapper.rank)
    if channel in ("halo1", "halo2"):
        return ~dirichlet & (role != ROLE_HALO)
    return dirichlet & (role != ROLE_HALO)


def build_dof_maps(mapper, transport):
    """Fill the send/receive lists with the (gcn, cell index, DOF index) handshake.

    A rank that needs a value (slave or halo DOF) picks one cell around the
    DOF -- its own cell with the lowest gcn for a slave, the halo cell with the
    lowest gcn for a halo DOF -- and sends ``(gcn, position in cell, local DOF)``
    to the rank that provides the value. The provider finds the same cell by
    gcn, reads its own DOF at that position and replies with it.
    """
    if mapper.is_reordered:
        raise ValueError("build_dof_maps must run before reordering")
    space = mapper.space
    sub = space.sub
    mesh = sub.mesh
    cd = space.cell_dofs
    n_cells, m = cd.shape
    channel = _channel_of(mapper)
    needs = channel >= 0

    inc_cell = np.repeat(np.arange(n_cells), m)
    inc_slot = np.tile(np.arange(m), n_cells)
    inc_dof = cd.ravel()
    eligible = needs[inc_dof] & ((mapper.role[inc_dof] == ROLE_HALO) | sub.own_mask[inc_cell])
    ic, isl, idf = inc_cell[eligible], inc_slot[eligible], inc_dof[eligible]
    order = np.lexsort((mesh.gcn[ic], idf))
    ic, isl, idf = ic[order], isl[order], idf[order]
    first = np.concatenate([[True], idf[1:] != idf[:-1]]) if idf.size else np.zeros(0, bool)
    anchor_dof, anchor_cell, anchor_slot = idf[first], ic[first], isl[first]
    target = np.where(mapper.role[anchor_dof] == ROLE_MIRROR,
                      mapper.master_rank[anchor_dof], sub.owner[anchor_cell])
    anchor_ch = channel[anchor_dof]

    gcn_order = np.argsort(mesh.gcn)
    sorted_gcn = mesh.gcn[gcn_order]
    neighbours = sub.neighbor_ranks
    bad_target = ~np.isin(target, neighbours)
    if bad_target.any():
        raise UnmatchedDof(f"rank {mapper.rank}: DOF value provider is not a neighbour")

    for ci, name in enumerate(ALL_CHANNELS):
        in_ch = anchor_ch == ci
        requests = {}
        for q in neighbours:
            s = in_ch & (target == q)
            requests[q] = np.stack([mesh.gcn[anchor_cell[s]], anchor_slot[s], anchor_dof[s]])
        incoming = transport.exchange(requests, neighbours, (mapper.tag, "map", name))
        replies, sends = {}, {}
        for q, req in incoming.items():
            gcn, slot, _ = req
            pos = np.searchsorted(sorted_gcn, gcn)
            pos = np.minimum(pos, max(sorted_gcn.size - 1, 0))
            if gcn.size and (sorted_gcn.size == 0 or (sorted_gcn[pos] != gcn).any()):
                raise UnmatchedDof(f"rank {mapper.rank}: unknown gcn requested by rank {q}")
            dofs = cd[gcn_order[pos], slot] if gcn.size else np.empty(0, np.int64)
            if not _accepts(mapper, name, dofs).all():
                raise UnmatchedDof(f"rank {mapper.rank}: rank {q} asked for a DOF it "
                                   f"cannot provide on channel {name}")
            replies[q] = dofs
            if dofs.size:
                sends[q] = dofs
        answers = transport.exchange(replies, neighbours, (mapper.tag, "map-reply", name))
        recvs = {}
        for q, ans in answers.items():
            mine = requests[q][2]
            if ans.size != mine.size:
                raise UnmatchedDof(f"rank {mapper.rank}: reply from {q} has wrong length")
            if mine.size:
                recvs[q] = mine
        mapper.send_lists[name] = sends
        mapper.recv_lists[name] = recvs
    return mapper


def reorder_dofs(mapper):
    """Permutation old -> new grouping DOFs by class in :class:`DofClass` order,
    stable within each class."""
    order = np.argsort(mapper.dof_class, kind="stable")
    perm = np.empty_like(order)
    perm[order] = np.arange(order.size)
    return perm


def _permute(values, perm):
    out = np.empty_like(values)
    out[perm] = values
    return out


def apply_reordering(mapper, perm):
    """Renumber the space, arrays and lists of ``mapper`` in place."""
    mapper.space = mapper.space.renumbered(perm)
    mapper.dof_class = _permute(mapper.dof_class, perm)
    mapper.role = _permute(mapper.role, perm)
    mapper.master_rank = _permute(mapper.master_rank, perm)
    for lists in (mapper.send_lists, mapper.recv_lists):
        for name in lists:
            lists[name] = {q: perm[v] for q, v in lists[name].items()}
    mapper.perm = perm
    return mapper


def push_channel(transport, mapper, channel, values, tag):
    """Copy provider values into the receivers' entries along ``channel``."""
    sends = mapper.send_lists.get(channel, {})
    recvs = mapper.recv_lists.get(channel, {})
    incoming = transport.exchange({q: values[idx] for q, idx in sends.items()}, recvs, tag)
    for q, idx in recvs.items():
        values[idx] = incoming[q]
    return values


def assign_global_numbers(mapper, transport):
    """Global DOF numbers from prefix sums of the per-rank own-DOF counts.

    Free own DOFs of rank p get ``sum(own[:p]) + i``; owned Dirichlet DOFs are
    numbered after all free DOFs the same way. Mirror and halo DOFs receive
    their number from the providing rank over the channels.
    """
    owned = np.flatnonzero(mapper.owned_free_mask)
    owned_dir = np.flatnonzero(mapper.owned_dirichlet_mask)
    counts = transport.allgather((owned.size, owned_dir.size))
    own = np.array([c[0] for c in counts], dtype=np.int64)
    own_dir = np.array([c[1] for c in counts], dtype=np.int64)
    r = mapper.rank
    g = np.full(mapper.n_dofs, -1, dtype=np.int64)
    g[owned] = own[:r].sum() + np.arange(owned.size)
    g[owned_dir] = own.sum() + own_dir[:r].sum() + np.arange(owned_dir.size)
    for name in ("master_slave", "dirichlet_ms", "halo1", "halo2", "dirichlet_halo"):
        push_channel(transport, mapper, name, g, (mapper.tag, "global", name))
    if (g < 0).any():
        raise UnmatchedDof(f"rank {r}: {int((g < 0).sum())} DOFs received no global number")
    mapper.global_of = g
    mapper.n_global_free = int(own.sum())
    mapper.n_global = int(own.sum() + own_dir.sum())
    mapper.own_dof_counts = tuple(int(c) for c in own)
    return mapper


def build_mapper(space, transport, tag=0):
    """Classify, map, reorder and number: the full mapper construction."""
    mapper = classify_dofs(space, transport, tag)
    build_dof_maps(mapper, transport)
    apply_reordering(mapper, reorder_dofs(mapper))
    assign_global_numbers(mapper, transport)
    return mapper
