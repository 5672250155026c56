"""In-process message passing between logical ranks.

Each logical rank runs in its own thread and talks to the others through a
:class:`LocalTransport` endpoint. Messages between a fixed (sender, receiver,
tag) triple are delivered in send order, exactly once, as private copies.
Collectives are built from point-to-point messages with a fixed reduction
order (ascending rank), so results never depend on thread scheduling.
"""
import itertools
import queue
import threading
import time

import numpy as np

__all__ = ["TransportError", "TransportTimeout", "Fabric", "LocalTransport", "run_ranks"]


class TransportError(RuntimeError):
    pass


class TransportTimeout(TransportError):
    """A receive waited longer than the watchdog allows (usually a mismatched
    collective or a missing send)."""


class _Aborted(TransportError):
    pass


def _private(payload):
    if isinstance(payload, np.ndarray):
        return payload.copy()
    if isinstance(payload, (list, tuple)):
        return type(payload)(_private(p) for p in payload)
    if isinstance(payload, dict):
        return {k: _private(v) for k, v in payload.items()}
    return payload


def _volume(payload):
    if isinstance(payload, np.ndarray):
        return payload.size, payload.nbytes
    if isinstance(payload, (list, tuple)):
        sizes = [_volume(p) for p in payload]
        return sum(s[0] for s in sizes), sum(s[1] for s in sizes)
    if isinstance(payload, dict):
        return _volume(list(payload.values()))
    return 1, 8


class Fabric:
    """Shared mailboxes of a group of ``size`` logical ranks."""

    def __init__(self, size, timeout=120.0):
        self.size = int(size)
        self.timeout = timeout
        self.abort = threading.Event()
        self._boxes = {}
        self._lock = threading.Lock()

    def box(self, src, dst, tag):
        key = (src, dst, tag)
        with self._lock:
            q = self._boxes.get(key)
            if q is None:
                q = self._boxes[key] = queue.SimpleQueue()
            return q

    def endpoints(self):
        return [LocalTransport(self, r) for r in range(self.size)]


class LocalTransport:
    """Endpoint of one logical rank.

    ``comm_time`` accumulates wall seconds spent inside transport calls;
    ``values_sent`` and ``bytes_sent`` count outgoing payload volume.
    """

    def __init__(self, fabric, rank):
        self.fabric = fabric
        self.rank = rank
        self.size = fabric.size
        self.comm_time = 0.0
        self.values_sent = 0
        self.bytes_sent = 0
        self.messages_sent = 0
        self._depth = 0
        self._coll = itertools.count()

    # timing wrapper: nested calls are only counted once
    def _enter(self):
        self._depth += 1
        if self._depth == 1:
            self._t0 = time.perf_counter()

    def _leave(self):
        self._depth -= 1
        if self._depth == 0:
            self.comm_time += time.perf_counter() - self._t0

    def reset_counters(self):
        self.comm_time = 0.0
        self.values_sent = self.bytes_sent = self.messages_sent = 0

    def send(self, to, tag, payload):
        if not 0 <= to < self.size:
            raise TransportError(f"rank {self.rank}: invalid destination {to}")
        self._enter()
        try:
            n, nbytes = _volume(payload)
            self.values_sent += n
            self.bytes_sent += nbytes
            self.messages_sent += 1
            self.fabric.box(self.rank, to, tag).put(_private(payload))
        finally:
            self._leave()

    def recv(self, frm, tag):
        if not 0 <= frm < self.size:
            raise TransportError(f"rank {self.rank}: invalid source {frm}")
        self._enter()
        try:
            box = self.fabric.box(frm, self.rank, tag)
            deadline = time.monotonic() + self.fabric.timeout
            while True:
                try:
                    return box.get(timeout=0.05)
                except queue.Empty:
                    if self.fabric.abort.is_set():
                        raise _Aborted(f"rank {self.rank}: aborted while waiting on {frm}")
                    if time.monotonic() > deadline:
                        raise TransportTimeout(
                            f"rank {self.rank}: no message from {frm} with tag {tag!r} "
                            f"after {self.fabric.timeout}s")
        finally:
            self._leave()

    def exchange(self, outgoing, sources, tag):
        """Send ``outgoing[r]`` to every ``r``, then receive one message from
        every rank in ``sources``. Returns ``{source: payload}``."""
        self._enter()
        try:
            for to in sorted(outgoing):
                self.send(to, tag, outgoing[to])
            return {frm: self.recv(frm, tag) for frm in sorted(sources)}
        finally:
            self._leave()

    # collectives -----------------------------------------------------------
    def _ctag(self, name):
        return ("__coll__", name, next(self._coll))

    def gather(self, payload, root=0):
        tag = self._ctag("gather")
        self._enter()
        try:
            if self.rank != root:
                self.send(root, tag, payload)
                return None
            return [payload if r == root else self.recv(r, tag) for r in range(self.size)]
        finally:
            self._leave()

    def broadcast(self, root, payload=None):
        tag = self._ctag("bcast")
        self._enter()
        try:
            if self.rank == root:
                for r in range(self.size):
                    if r != root:
                        self.send(r, tag, payload)
                return _private(payload)
            return self.recv(root, tag)
        finally:
            self._leave()

    def allgather(self, payload):
        self._enter()
        try:
            return self.broadcast(0, self.gather(payload, root=0))
        finally:
            self._leave()

    def allreduce_sum(self, value):
        """Sum over ranks, accumulated in ascending rank order on rank 0."""
        self._enter()
        try:
            parts = self.gather(value, root=0)
            total = None
            if self.rank == 0:
                total = parts[0]
                for p in parts[1:]:
                    total = total + p
            return self.broadcast(0, total)
        finally:
            self._leave()

    def allreduce_max(self, value):
        self._enter()
        try:
            parts = self.gather(value, root=0)
            return self.broadcast(0, None if parts is None else max(parts))
        finally:
            self._leave()

    def barrier(self):
        self.allgather(None)


def run_ranks(size, target, *args, timeout=120.0, **kwargs):
    """Run ``target(transport, *args, **kwargs)`` on ``size`` logical ranks.

    Returns the per-rank results in rank order. If any rank raises, the
    others are aborted at their next receive and the lowest-rank original
    exception is re-raised.
    """
    fabric = Fabric(size, timeout=timeout)
    results = [None] * fabric.size
    errors = [None] * fabric.size

    def body(ep):
        try:
            results[ep.rank] = target(ep, *args, **kwargs)
        except BaseException as exc:  # noqa: BLE001 - re-raised in the caller
            errors[ep.rank] = exc
            fabric.abort.set()

    threads = [threading.Thread(target=body, args=(ep,), name=f"rank-{ep.rank}", daemon=True)
               for ep in fabric.endpoints()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    real = [e for e in errors if e is not None and not isinstance(e, _Aborted)]
    if real:
        raise real[0]
    if any(e is not None for e in errors):
        raise next(e for e in errors if e is not None)
    return results
