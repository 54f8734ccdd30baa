"""Wire codec, membership and transports."""
from .codec import (Ack, AckStatus, Hello, Kind, Leave, PeerEntry, PeerList, SwarmMessage, Weights, decode,
                    encode)
from .exchange import broadcast_weights, collect_updates
from .membership import Membership, PeerTable, gossip_round, join, leave
from .sim import SimEndpoint, SimNetConfig, SimNetwork
from .tcp import TcpTransport, TlsConfig


def sim_transport(cfg: SimNetConfig) -> SimNetwork:
    """A fresh simulated network; call ``.endpoint(node_id)`` per node."""
    return SimNetwork(cfg)


__all__ = [
    "Ack", "AckStatus", "Hello", "Kind", "Leave", "PeerEntry", "PeerList", "SwarmMessage", "Weights",
    "decode", "encode", "broadcast_weights", "collect_updates", "Membership", "PeerTable", "gossip_round",
    "join", "leave", "SimEndpoint", "SimNetConfig", "SimNetwork", "TcpTransport", "TlsConfig",
    "sim_transport",
]
