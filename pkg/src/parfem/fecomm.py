"""ParFECommunicator: consistency updates over the channels of a mapper."""
from enum import Enum

import numpy as np

from .femapper import DofClass, push_channel

__all__ = ["UpdateMode", "ParFECommunicator"]


class UpdateMode(Enum):
    SCATTER = "scatter"
    ACCUMULATE = "accumulate"


class ParFECommunicator:
    """Communication routines of one FE space on one rank.

    Vectors are plain ndarrays indexed by the mapper's reordered local DOF
    numbering; every method works in place and only touches the entries it
    targets.
    """

    def __init__(self, mapper, transport):
        if not mapper.is_reordered:
            raise ValueError("mapper must be fully built before creating a communicator")
        self.mapper = mapper
        self.transport = transport
        self.tag = mapper.tag
        self.n_master = mapper.n_master
        self.n_own = mapper.n_own_dofs

    @property
    def rank(self):
        return self.transport.rank

    @property
    def size(self):
        return self.transport.size

    def update_channel(self, channel, v):
        return push_channel(self.transport, self.mapper, channel, v, (self.tag, channel))

    def update_master_slave(self, v, mode=UpdateMode.SCATTER):
        """Make slave copies agree with their master.

        ``ACCUMULATE`` first replaces each master entry by the sum of all
        copies (own and slaves), added in ascending rank order, which turns an
        additively assembled vector consistent.
        """
        mode = UpdateMode(mode)
        if mode is UpdateMode.ACCUMULATE:
            self._accumulate(v)
        return self.update_channel("master_slave", v)

    def _accumulate(self, v):
        sends = self.mapper.send_lists.get("master_slave", {})
        recvs = self.mapper.recv_lists.get("master_slave", {})
        incoming = self.transport.exchange({q: v[idx] for q, idx in recvs.items()}, sends,
                                           (self.tag, "ms-accumulate"))
        masters = slice(0, self.n_master)
        acc = np.zeros_like(v)
        for r in sorted(set(incoming) | {self.rank}):
            if r == self.rank:
                acc[masters] += v[masters]
            else:
                acc[sends[r]] += incoming[r]
        v[masters] = acc[masters]

    def update_halo1(self, v):
        return self.update_channel("halo1", v)

    def update_halo2(self, v):
        return self.update_channel("halo2", v)

    def update_halo(self, v):
        self.update_halo1(v)
        return self.update_halo2(v)

    def make_consistent(self, v):
        """Slaves, then Halo1, then Halo2: every local entry equals its owner's."""
        self.update_master_slave(v)
        return self.update_halo(v)

    def accumulate(self, v):
        """Additive-to-consistent on interface DOFs, then refresh all halos."""
        self.update_master_slave(v, UpdateMode.ACCUMULATE)
        return self.update_halo(v)

    def free_dot(self, a, b):
        """Global inner product over owned non-Dirichlet DOFs."""
        n = self.n_own
        return self.transport.allreduce_sum(float(np.dot(a[:n], b[:n])))

    def owned_keys(self):
        """Carrier keys of owned DOFs (free and Dirichlet), for gathering fields."""
        m = self.mapper
        idx = np.flatnonzero(m.owned_free_mask | m.owned_dirichlet_mask)
        return idx, m.space.dof_keys[idx]

    def halo_update_volume(self):
        """Values sent per Halo1, Halo2 and full-halo update on this rank."""
        h1 = self.mapper.list_total("halo1")
        h2 = self.mapper.list_total("halo2")
        return {"halo1": h1, "halo2": h2, "halo": h1 + h2}

    def class_slice(self, cls):
        idx = np.flatnonzero(self.mapper.dof_class == DofClass(cls))
        return slice(int(idx[0]), int(idx[-1]) + 1) if idx.size else slice(0, 0)
