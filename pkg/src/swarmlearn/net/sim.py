"""Deterministic in-memory network on a virtual millisecond clock."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ConnRefused, Timeout, TransportDown
from .codec import SwarmMessage, decode, encode
from .transport import BaseTransport


@dataclass(frozen=True)
class SimNetConfig:
    latency_mean: float = 0.0
    latency_jitter: float = 0.0
    drop_prob: float = 0.0
    partitions: tuple[frozenset, ...] = ()
    seed: int = 0
    # per directed link (src, dst) overrides, for fault-injection tests
    link_drop: Mapping[tuple[int, int], float] = field(default_factory=dict)
    link_latency: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.drop_prob < 1.0):
            raise ValueError("drop_prob must lie in [0, 1)")
        if self.latency_mean < 0 or self.latency_jitter < 0:
            raise ValueError("latencies must be nonnegative")
        parts = tuple(frozenset(int(i) for i in p) for p in self.partitions)
        seen: set[int] = set()
        for p in parts:
            if seen & p:
                raise ValueError("partition sets must be disjoint")
            seen |= p
        object.__setattr__(self, "partitions", parts)
        for p in self.link_drop.values():
            if not (0.0 <= p <= 1.0):
                raise ValueError("link drop probability must lie in [0, 1]")


@dataclass(frozen=True)
class TranscriptEntry:
    sent: float
    src: int
    dst: int
    kind: int
    nbytes: int
    fate: str
    arrival: float | None


class SimNetwork:
    """Owns the virtual clock, the seeded fault RNG and every endpoint.

    Requests are resolved synchronously: the forward leg and the reply leg
    each draw a fate (blocked, dropped or a latency), and the target's
    handler runs immediately with the computed arrival time stamped on
    the inbox entry. Identical configs and call sequences produce identical
    transcripts.
    """

    def __init__(self, cfg: SimNetConfig = SimNetConfig()):
        self.cfg = cfg
        self.now = 0.0
        self.rng = np.random.default_rng(cfg.seed)
        self.endpoints: dict[str, SimEndpoint] = {}
        self.transcript: list[TranscriptEntry] = []
        self._group = {i: k for k, part in enumerate(cfg.partitions) for i in part}

    def endpoint(self, node_id: int, address: str | None = None) -> "SimEndpoint":
        address = address or f"sim-{node_id}:{7000 + int(node_id)}"
        if address in self.endpoints:
            raise ValueError(f"address {address} already bound")
        ep = SimEndpoint(self, node_id, address)
        self.endpoints[address] = ep
        return ep

    def advance(self, ms: float) -> None:
        self.now += float(ms)

    def _leg(self, src: int, dst: int, frame: bytes) -> float | None:
        kind = frame[5] if len(frame) > 5 else 0
        if self._group.get(src) != self._group.get(dst):
            self.transcript.append(TranscriptEntry(self.now, src, dst, kind, len(frame), "partitioned", None))
            return None
        p = self.cfg.link_drop.get((src, dst), self.cfg.drop_prob)
        # draw both numbers on every leg so the RNG stream does not depend on outcomes
        u, j = self.rng.random(), self.rng.uniform(-1.0, 1.0)
        if u < p:
            self.transcript.append(TranscriptEntry(self.now, src, dst, kind, len(frame), "dropped", None))
            return None
        mean = self.cfg.link_latency.get((src, dst), self.cfg.latency_mean)
        latency = max(0.0, mean + j * self.cfg.latency_jitter)
        self.transcript.append(TranscriptEntry(self.now, src, dst, kind, len(frame), "delivered",
                                               self.now + latency))
        return latency

    def transcript_lines(self) -> list[str]:
        return [f"{e.sent!r} {e.src}->{e.dst} k{e.kind} {e.nbytes}B {e.fate} {e.arrival!r}"
                for e in self.transcript]


class SimEndpoint(BaseTransport):
    def __init__(self, network: SimNetwork, node_id: int, address: str):
        super().__init__(node_id)
        self.network = network
        self.address = address

    def now(self) -> float:
        return self.network.now

    def request(self, address: str, msg: SwarmMessage, timeout_ms: float = 5000.0) -> SwarmMessage:
        if self.closed:
            raise TransportDown(f"endpoint {self.address} is closed")
        target = self.network.endpoints.get(address)
        if target is None or target.closed:
            raise ConnRefused(f"nothing listening at {address}")
        frame = encode(msg)
        out = self.network._leg(self.node_id, target.node_id, frame)
        if out is None:
            raise Timeout(f"request to {address} lost")
        reply = target._on_frame(frame, self.network.now + out)
        if reply is None:
            raise Timeout(f"{address} sent no reply")
        back = self.network._leg(target.node_id, self.node_id, reply)
        if back is None or out + back > timeout_ms:
            raise Timeout(f"no reply from {address} within {timeout_ms} ms")
        return decode(reply)

    def poll(self, window_ms: float, expect: int | None = None) -> list[SwarmMessage]:
        """Messages that arrive no later than ``window_ms`` after the current virtual time."""
        return self._take_until(self.network.now + window_ms)

    def end_round(self, window_ms: float) -> None:
        # a lone node drives the clock itself; run_swarm advances it for groups
        if len(self.network.endpoints) == 1:
            self.network.advance(window_ms)

    def close(self) -> None:
        self.closed = True
