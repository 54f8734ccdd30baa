"""Length-prefixed binary frames exchanged between swarm nodes.

Every integer is little-endian. Header (14 bytes)::

    magic "SWRM" (4) | version u8 = 1 | kind u8 | sender_id u32 | payload_len u32

Payloads by kind::

    HELLO      listen address, UTF-8 (may be empty)
    PEER_LIST  count u32, then per entry: node_id u32 | last_seen f64 | addr_len u16 | addr
    WEIGHTS    round u32 | epoch u32 | sample_count u64 | param_count u64 | param_count x f64
    ACK        acked_kind u8 | status u8 | round u32
    LEAVE      empty

Example: HELLO from node 7 with no address is
``53 57 52 4D 01 01 07 00 00 00 00 00 00 00``.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import (BadMagic, BadPayload, BadVersion, DecodeError, LengthMismatch, OversizePayload,
                      TruncatedFrame, UnknownKind)

MAGIC = b"SWRM"
VERSION = 1
HEADER = struct.Struct("<4sBBII")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 2**31 - 1
MAX_U32 = 2**32 - 1
MAX_U64 = 2**64 - 1

_WEIGHTS_HEAD = struct.Struct("<IIQQ")
_ENTRY_HEAD = struct.Struct("<IdH")
_ACK = struct.Struct("<BBI")


class Kind(enum.IntEnum):
    HELLO = 0x01
    PEER_LIST = 0x02
    WEIGHTS = 0x03
    ACK = 0x04
    LEAVE = 0x05


class AckStatus(enum.IntEnum):
    OK = 0
    ID_COLLISION = 1
    REJECTED = 2


@dataclass(frozen=True)
class Hello:
    address: str = ""


@dataclass(frozen=True)
class PeerEntry:
    node_id: int
    address: str
    last_seen: float


@dataclass(frozen=True)
class PeerList:
    entries: tuple[PeerEntry, ...] = ()


@dataclass(frozen=True, eq=False)
class Weights:
    round: int
    epoch: int
    sample_count: int
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype="<f8").reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __eq__(self, other):
        if not isinstance(other, Weights):
            return NotImplemented
        return ((self.round, self.epoch, self.sample_count) == (other.round, other.epoch, other.sample_count)
                and self.values.tobytes() == other.values.tobytes())

    def __hash__(self):
        return hash((self.round, self.epoch, self.sample_count, self.values.tobytes()))


@dataclass(frozen=True)
class Ack:
    acked_kind: int
    status: int = AckStatus.OK
    round: int = 0


@dataclass(frozen=True)
class Leave:
    pass


Payload = Union[Hello, PeerList, Weights, Ack, Leave]
_KIND_OF = {Hello: Kind.HELLO, PeerList: Kind.PEER_LIST, Weights: Kind.WEIGHTS, Ack: Kind.ACK, Leave: Kind.LEAVE}


@dataclass(frozen=True)
class SwarmMessage:
    sender_id: int
    payload: Payload

    @property
    def kind(self) -> Kind:
        return _KIND_OF[type(self.payload)]


def _u32(name, x):
    if not (0 <= int(x) <= MAX_U32):
        raise ValueError(f"{name}={x} does not fit in u32")
    return int(x)


def _encode_payload(p: Payload) -> bytes:
    if isinstance(p, Hello):
        return p.address.encode("utf-8")
    if isinstance(p, PeerList):
        out = [struct.pack("<I", len(p.entries))]
        for e in p.entries:
            addr = e.address.encode("utf-8")
            if len(addr) > 0xFFFF:
                raise ValueError("address too long")
            out.append(_ENTRY_HEAD.pack(_u32("node_id", e.node_id), float(e.last_seen), len(addr)))
            out.append(addr)
        return b"".join(out)
    if isinstance(p, Weights):
        if not (0 <= p.sample_count <= MAX_U64):
            raise ValueError("sample_count does not fit in u64")
        head = _WEIGHTS_HEAD.pack(_u32("round", p.round), _u32("epoch", p.epoch), int(p.sample_count),
                                  p.values.size)
        return head + p.values.tobytes()
    if isinstance(p, Ack):
        return _ACK.pack(int(p.acked_kind), int(p.status), _u32("round", p.round))
    if isinstance(p, Leave):
        return b""
    raise TypeError(f"not a payload: {p!r}")


def encode(msg: SwarmMessage) -> bytes:
    body = _encode_payload(msg.payload)
    if len(body) > MAX_PAYLOAD:
        raise OversizePayload(f"payload of {len(body)} bytes exceeds {MAX_PAYLOAD}")
    return HEADER.pack(MAGIC, VERSION, msg.kind, _u32("sender_id", msg.sender_id), len(body)) + body


def weights_payload_size(param_count: int) -> int:
    return _WEIGHTS_HEAD.size + 8 * param_count


def parse_header(buf: bytes) -> tuple[Kind, int, int]:
    """Validate the fixed header; returns (kind, sender_id, payload_len)."""
    n = len(buf)
    if n < 4:
        if MAGIC[:n] != bytes(buf[:n]):
            raise BadMagic("bad magic", 0)
        raise TruncatedFrame(f"frame of {n} bytes ends inside the magic", n)
    if bytes(buf[:4]) != MAGIC:
        raise BadMagic(f"bad magic {bytes(buf[:4])!r}", 0)
    if n < 5:
        raise TruncatedFrame("frame ends before the version byte", n)
    if buf[4] != VERSION:
        raise BadVersion(f"unsupported version {buf[4]}", 4)
    if n < 6:
        raise TruncatedFrame("frame ends before the kind byte", n)
    try:
        kind = Kind(buf[5])
    except ValueError:
        raise UnknownKind(f"unknown kind 0x{buf[5]:02x}", 5) from None
    if n < HEADER_SIZE:
        raise TruncatedFrame(f"header needs {HEADER_SIZE} bytes, got {n}", n)
    _, _, _, sender, length = HEADER.unpack_from(buf, 0)
    if length > MAX_PAYLOAD:
        raise LengthMismatch(f"payload_len {length} exceeds {MAX_PAYLOAD}", 10)
    return kind, sender, length


def _decode_payload(kind: Kind, body: bytes) -> Payload:
    if kind == Kind.HELLO:
        try:
            return Hello(body.decode("utf-8"))
        except UnicodeDecodeError:
            raise BadPayload("HELLO address is not UTF-8", HEADER_SIZE) from None
    if kind == Kind.LEAVE:
        if body:
            raise LengthMismatch("LEAVE carries no payload", HEADER_SIZE)
        return Leave()
    if kind == Kind.ACK:
        if len(body) != _ACK.size:
            raise LengthMismatch(f"ACK payload must be {_ACK.size} bytes, got {len(body)}", HEADER_SIZE)
        acked, status, rnd = _ACK.unpack(body)
        return Ack(acked, status, rnd)
    if kind == Kind.WEIGHTS:
        if len(body) < _WEIGHTS_HEAD.size:
            raise LengthMismatch("WEIGHTS payload shorter than its fixed fields", HEADER_SIZE)
        rnd, epoch, count, n_params = _WEIGHTS_HEAD.unpack_from(body, 0)
        if len(body) != weights_payload_size(n_params):
            raise LengthMismatch(f"param_count {n_params} disagrees with payload size {len(body)}",
                                 HEADER_SIZE + 16)
        values = np.frombuffer(body, dtype="<f8", offset=_WEIGHTS_HEAD.size)
        if not np.isfinite(values).all():
            raise BadPayload("WEIGHTS carries a non-finite value", HEADER_SIZE + _WEIGHTS_HEAD.size)
        return Weights(rnd, epoch, count, values)
    # PEER_LIST
    if len(body) < 4:
        raise LengthMismatch("PEER_LIST payload shorter than its count", HEADER_SIZE)
    (count,) = struct.unpack_from("<I", body, 0)
    off, entries = 4, []
    for _ in range(count):
        if off + _ENTRY_HEAD.size > len(body):
            raise LengthMismatch("PEER_LIST entry runs past the payload", HEADER_SIZE + off)
        node_id, seen, alen = _ENTRY_HEAD.unpack_from(body, off)
        off += _ENTRY_HEAD.size
        if off + alen > len(body):
            raise LengthMismatch("PEER_LIST address runs past the payload", HEADER_SIZE + off)
        if not math.isfinite(seen):
            raise BadPayload("PEER_LIST last_seen is not finite", HEADER_SIZE + off)
        try:
            addr = body[off:off + alen].decode("utf-8")
        except UnicodeDecodeError:
            raise BadPayload("PEER_LIST address is not UTF-8", HEADER_SIZE + off) from None
        off += alen
        entries.append(PeerEntry(node_id, addr, seen))
    if off != len(body):
        raise LengthMismatch(f"{len(body) - off} trailing bytes after PEER_LIST", HEADER_SIZE + off)
    return PeerList(tuple(entries))


def decode(buf: bytes) -> SwarmMessage:
    """Parse exactly one frame. Raises a :class:`DecodeError` subclass on bad input."""
    try:
        buf = bytes(buf)
        kind, sender, length = parse_header(buf)
        available = len(buf) - HEADER_SIZE
        if available < length:
            raise TruncatedFrame(f"payload_len {length} but only {available} bytes follow", len(buf))
        if available > length:
            raise LengthMismatch(f"{available - length} bytes beyond payload_len {length}",
                                 HEADER_SIZE + length)
        return SwarmMessage(sender, _decode_payload(kind, buf[HEADER_SIZE:]))
    except DecodeError:
        raise
    except Exception as exc:  # keep decode total: anything unexpected is still a named error
        raise BadPayload(f"undecodable frame: {exc}") from exc
