"""Behaviour shared by the simulated and TCP transports.

A transport moves encoded frames between nodes as request/reply pairs.
WEIGHTS frames are queued in the node's inbox and answered with an ACK;
every other frame goes to the registered handler (membership), whose
return value is the reply.
"""
from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from ..errors import DecodeError
from .codec import Ack, AckStatus, Kind, SwarmMessage, Weights, decode, encode

log = logging.getLogger(__name__)

Handler = Callable[[SwarmMessage], Optional[SwarmMessage]]


@dataclass(frozen=True)
class Envelope:
    arrival: float
    seq: int
    msg: SwarmMessage


class BaseTransport:
    node_id: int
    address: str

    def __init__(self, node_id: int):
        self.node_id = int(node_id)
        self.handler: Handler | None = None
        self.membership = None
        self.inbox: list[Envelope] = []
        # later-round WEIGHTS seen by collect_updates, kept for their round
        self.held: list[SwarmMessage] = []
        self._seq = itertools.count()
        self._lock = threading.Condition()
        self.closed = False

    def set_handler(self, handler: Handler) -> None:
        self.handler = handler

    def now(self) -> float:
        raise NotImplementedError

    def _on_frame(self, frame: bytes, arrival: float) -> bytes | None:
        """Decode an inbound frame and build the reply frame, if any."""
        try:
            msg = decode(frame)
        except DecodeError as exc:
            log.warning("node %s dropped malformed frame: %s", self.node_id, exc)
            return None
        if self.membership is not None:
            self.membership.touch(msg.sender_id, arrival)
        if isinstance(msg.payload, Weights):
            with self._lock:
                self.inbox.append(Envelope(arrival, next(self._seq), msg))
                self._lock.notify_all()
            return encode(SwarmMessage(self.node_id, Ack(Kind.WEIGHTS, AckStatus.OK, msg.payload.round)))
        reply = self.handler(msg) if self.handler is not None else None
        return encode(reply) if reply is not None else None

    def _take_until(self, deadline: float) -> list[SwarmMessage]:
        with self._lock:
            ready = sorted((e for e in self.inbox if e.arrival <= deadline), key=lambda e: (e.arrival, e.seq))
            self.inbox = [e for e in self.inbox if e.arrival > deadline]
        return [e.msg for e in ready]

    def pending_count(self) -> int:
        with self._lock:
            return len(self.inbox)

    def end_round(self, window_ms: float) -> None:
        """Hook called by a node after each collect window."""
