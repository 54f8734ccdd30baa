"""Pushing weight updates to peers and collecting theirs for a round."""
from __future__ import annotations

import logging

from ..aggregation import ModelUpdate
from ..errors import ConnRefused, Timeout, TransportDown, TransportError
from ..params import ShapeSpec, WeightVector
from .codec import Ack, AckStatus, SwarmMessage, Weights

log = logging.getLogger(__name__)

DEFAULT_ACK_TIMEOUT_MS = 5000.0


def update_message(update: ModelUpdate) -> SwarmMessage:
    return SwarmMessage(update.node_id, Weights(update.round, update.epoch, update.sample_count,
                                                update.weights.values))


def update_from_message(msg: SwarmMessage, shape: ShapeSpec | None = None) -> ModelUpdate:
    """Rebuild a ModelUpdate; a length that does not fit ``shape`` keeps a flat shape."""
    p: Weights = msg.payload
    if shape is None or shape.total_len != p.values.size:
        shape = ShapeSpec.flat(p.values.size) if p.values.size else None
    if shape is None:
        raise ValueError("empty weight vector")
    return ModelUpdate(WeightVector(p.values, shape), p.sample_count, msg.sender_id, p.round, p.epoch)


def broadcast_weights(update: ModelUpdate, table, transport,
                      timeout_ms: float = DEFAULT_ACK_TIMEOUT_MS) -> dict[int, str]:
    """Send one WEIGHTS frame per live peer; returns node_id -> 'ack' | 'timeout' | 'refused' | 'rejected'."""
    report: dict[int, str] = {}
    msg = update_message(update)
    for pid in table.ids():
        addr = table.address_of(pid)
        if addr is None:
            continue
        try:
            reply = transport.request(addr, msg, timeout_ms)
        except Timeout:
            report[pid] = "timeout"
        except ConnRefused:
            report[pid] = "refused"
        except TransportDown:
            raise
        except TransportError:
            report[pid] = "refused"
        else:
            ok = isinstance(reply.payload, Ack) and reply.payload.status == AckStatus.OK
            report[pid] = "ack" if ok else "rejected"
        if report[pid] == "ack":
            table.record_success(pid, transport.now())
        else:
            table.record_failure(pid)
    return report


def collect_updates(round: int, window: float, transport, shape: ShapeSpec | None = None,
                    expect: int | None = None) -> list[ModelUpdate]:
    """WEIGHTS for ``round`` that arrive within ``window`` ms.

    Later rounds are held back for their own collect; earlier rounds are
    dropped as stale.
    """
    held, transport.held = transport.held, []
    current, later = [], []
    for msg in held:
        (current if msg.payload.round == round else later).append(msg)
    need = None if expect is None else max(0, expect - len(current))
    for msg in transport.poll(window, need):
        r = msg.payload.round
        if r == round:
            current.append(msg)
        elif r > round:
            later.append(msg)
        else:
            log.debug("node %s: stale round-%d update from %s", transport.node_id, r, msg.sender_id)
    transport.held = later
    buffered = transport.pending_count() + len(later)
    if buffered:
        log.info("node %s: %d update(s) buffered after round %d window", transport.node_id, buffered, round)
    out = []
    for msg in current:
        try:
            out.append(update_from_message(msg, shape))
        except ValueError as exc:
            log.warning("node %s: bad update from %s: %s", transport.node_id, msg.sender_id, exc)
    return out
