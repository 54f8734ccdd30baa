"""Seed-list discovery and peer-table gossip."""
from __future__ import annotations

import functools
import logging
import threading
from dataclasses import dataclass

from ..errors import IdCollision, NoPeersReachable, TransportDown, TransportError
from .codec import Ack, AckStatus, Hello, Kind, Leave, PeerEntry, PeerList, SwarmMessage

log = logging.getLogger(__name__)

EVICT_AFTER = 3


@dataclass
class PeerInfo:
    address: str
    last_seen: float
    failures: int = 0


def _valid_address(addr: str) -> bool:
    host, sep, port = addr.rpartition(":")
    return bool(sep and host and port.isdigit() and 0 <= int(port) <= 65535)


def _locked(fn):
    @functools.wraps(fn)
    def wrapper(self, *args, **kwargs):
        with self._lock:
            return fn(self, *args, **kwargs)
    return wrapper


class PeerTable:
    """node_id -> (address, last_seen). Never holds an entry for the owner.

    Methods lock internally: a TCP server thread may update the table
    while the node thread broadcasts.
    """

    def __init__(self, self_id: int):
        self._lock = threading.RLock()
        self.self_id = int(self_id)
        self.entries: dict[int, PeerInfo] = {}
        # evicted peers; any frame from them restores the entry
        self.suspects: dict[int, PeerInfo] = {}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, node_id):
        return node_id in self.entries

    @_locked
    def ids(self) -> list[int]:
        return sorted(self.entries)

    @_locked
    def address_of(self, node_id: int) -> str | None:
        info = self.entries.get(node_id)
        return info.address if info is not None else None

    @_locked
    def upsert(self, node_id: int, address: str, last_seen: float) -> None:
        if node_id == self.self_id:
            return
        if not _valid_address(address):
            log.warning("ignoring malformed address %r for node %s", address, node_id)
            return
        cur = self.entries.get(node_id)
        if cur is None or last_seen >= cur.last_seen:
            self.entries[node_id] = PeerInfo(address, last_seen, cur.failures if cur else 0)
        self.suspects.pop(node_id, None)

    @_locked
    def merge(self, entries) -> None:
        """Merge gossiped entries; the newest last_seen wins."""
        for e in entries:
            self.upsert(e.node_id, e.address, e.last_seen)

    @_locked
    def remove(self, node_id: int) -> None:
        self.entries.pop(node_id, None)
        self.suspects.pop(node_id, None)

    @_locked
    def record_failure(self, node_id: int) -> bool:
        """Count a failed delivery; returns True if the peer was evicted."""
        info = self.entries.get(node_id)
        if info is None:
            return False
        info.failures += 1
        if info.failures >= EVICT_AFTER:
            self.suspects[node_id] = self.entries.pop(node_id)
            log.info("node %s evicted peer %s after %d failures", self.self_id, node_id, info.failures)
            return True
        return False

    @_locked
    def record_success(self, node_id: int, now: float) -> None:
        info = self.entries.get(node_id)
        if info is not None:
            info.failures = 0
            info.last_seen = max(info.last_seen, now)

    @_locked
    def touch(self, node_id: int, now: float) -> None:
        if node_id in self.suspects:
            info = self.suspects.pop(node_id)
            info.failures = 0
            self.entries[node_id] = info
        info = self.entries.get(node_id)
        if info is not None:
            info.last_seen = max(info.last_seen, now)

    @_locked
    def to_entries(self) -> tuple[PeerEntry, ...]:
        return tuple(PeerEntry(i, self.entries[i].address, self.entries[i].last_seen) for i in self.ids())

    @_locked
    def snapshot(self) -> dict[int, str]:
        return {i: self.entries[i].address for i in self.ids()}


class Membership:
    """Answers HELLO, PEER_LIST and LEAVE frames for one transport."""

    def __init__(self, transport, self_id: int | None = None):
        self.transport = transport
        self.self_id = transport.node_id if self_id is None else int(self_id)
        self.table = PeerTable(self.self_id)
        self.collisions: list[tuple[int, str]] = []
        transport.membership = self
        transport.set_handler(self.handle)

    def touch(self, node_id: int, now: float) -> None:
        self.table.touch(node_id, now)

    def _list_reply(self) -> SwarmMessage:
        return SwarmMessage(self.self_id, PeerList(self.table.to_entries()))

    def handle(self, msg: SwarmMessage) -> SwarmMessage | None:
        now = self.transport.now()
        p = msg.payload
        if isinstance(p, Hello):
            known = self.table.entries.get(msg.sender_id)
            if msg.sender_id == self.self_id or (known is not None and known.address != p.address):
                self.collisions.append((msg.sender_id, p.address))
                log.warning("node %s: id collision for %s from %r", self.self_id, msg.sender_id, p.address)
                return SwarmMessage(self.self_id, Ack(Kind.HELLO, AckStatus.ID_COLLISION))
            reply = self._list_reply()
            self.table.upsert(msg.sender_id, p.address, now)
            return reply
        if isinstance(p, PeerList):
            self.table.merge(p.entries)
            return self._list_reply()
        if isinstance(p, Leave):
            self.table.remove(msg.sender_id)
            return SwarmMessage(self.self_id, Ack(Kind.LEAVE))
        return None


def _membership(transport) -> Membership:
    return transport.membership if transport.membership is not None else Membership(transport)


def join(seed_peers, self_id: int, transport, timeout_ms: float = 5000.0, attempts: int = 3) -> PeerTable:
    """Say HELLO to every seed and merge the peer lists they return.

    Each seed is tried up to ``attempts`` times before it counts as unreachable.
    """
    m = _membership(transport)
    if m.self_id != self_id:
        raise ValueError(f"transport belongs to node {m.self_id}, not {self_id}")
    reached = 0
    for addr in seed_peers:
        if addr == transport.address:
            continue
        reply = None
        for _ in range(max(1, attempts)):
            try:
                reply = transport.request(addr, SwarmMessage(self_id, Hello(transport.address)), timeout_ms)
                break
            except TransportError as exc:
                log.info("node %s: seed %s unreachable: %s", self_id, addr, exc)
        if reply is None:
            continue
        p = reply.payload
        if isinstance(p, Ack) and p.status == AckStatus.ID_COLLISION:
            raise IdCollision(f"node id {self_id} is already registered at {addr}")
        if isinstance(p, PeerList):
            reached += 1
            m.table.merge(p.entries)
            m.table.upsert(reply.sender_id, addr, transport.now())
    if seed_peers and reached == 0:
        raise NoPeersReachable(f"none of {len(seed_peers)} seed peers answered")
    return m.table


def gossip_round(transport, timeout_ms: float = 5000.0) -> int:
    """Exchange tables with every known peer once; returns how many answered."""
    m = _membership(transport)
    answered = 0
    for pid in m.table.ids():
        addr = m.table.address_of(pid)
        if addr is None:
            continue
        msg = SwarmMessage(m.self_id, PeerList(m.table.to_entries() + (
            PeerEntry(m.self_id, transport.address, transport.now()),)))
        try:
            reply = transport.request(addr, msg, timeout_ms)
        except TransportDown:
            raise
        except TransportError:
            m.table.record_failure(pid)
            continue
        if isinstance(reply.payload, PeerList):
            answered += 1
            m.table.merge(reply.payload.entries)
            m.table.record_success(pid, transport.now())
    return answered


def leave(transport, timeout_ms: float = 1000.0) -> None:
    m = _membership(transport)
    for pid in m.table.ids():
        addr = m.table.address_of(pid)
        if addr is None:
            continue
        try:
            transport.request(addr, SwarmMessage(m.self_id, Leave()), timeout_ms)
        except TransportError:
            pass
