import logging
import pytest

from swarmlearn.aggregation import ModelUpdate
from swarmlearn.errors import ConnRefused, IdCollision, NoPeersReachable, Timeout
from swarmlearn.net import (Membership, SimNetConfig, SimNetwork, broadcast_weights, collect_updates, gossip_round,
                            join, leave, sim_transport)
from swarmlearn.net.codec import Hello, SwarmMessage
from swarmlearn.net.exchange import update_message
from swarmlearn.net.membership import EVICT_AFTER, PeerTable
from swarmlearn.params import WeightVector


def update(node, rnd=0, values=(1.0, 2.0), n=10):
    return ModelUpdate(WeightVector(list(values)), n, node, rnd, 0)


def swarm_of(n, **cfg):
    net = SimNetwork(SimNetConfig(**cfg))
    eps = [net.endpoint(i) for i in range(n)]
    join([], 0, eps[0])
    for ep in eps[1:]:
        join([eps[0].address], ep.node_id, ep, attempts=10)
    for ep in eps:
        gossip_round(ep)
    return net, eps


def test_sim_transport_factory():
    assert isinstance(sim_transport(SimNetConfig()), SimNetwork)


def test_first_node_joins_alone():
    ep = SimNetwork().endpoint(0)
    table = join([], 0, ep)
    assert len(table) == 0


def test_sequential_join_converges():
    _, eps = swarm_of(3)
    for ep in eps:
        assert set(ep.membership.table.ids()) == {0, 1, 2} - {ep.node_id}


def test_duplicate_id_is_rejected_at_responder():
    net = SimNetwork()
    a, b = net.endpoint(0), net.endpoint(1)
    join([], 0, a)
    join([a.address], 1, b)
    impostor = net.endpoint(1, "sim-other:9999")
    with pytest.raises(IdCollision):
        join([a.address], 1, impostor)
    assert a.membership.collisions == [(1, "sim-other:9999")]
    assert a.membership.table.address_of(1) == b.address


def test_unreachable_seeds():
    ep = SimNetwork().endpoint(3)
    with pytest.raises(NoPeersReachable):
        join(["sim-9:7009"], 3, ep)


def test_leave_removes_entry():
    _, eps = swarm_of(3)
    leave(eps[2])
    assert 2 not in eps[0].membership.table and 2 not in eps[1].membership.table


def test_broadcast_empty_table():
    ep = SimNetwork().endpoint(0)
    Membership(ep)
    assert broadcast_weights(update(0), ep.membership.table, ep) == {}


def test_forced_drop_times_out():
    net, eps = swarm_of(2)
    net.cfg = SimNetConfig(link_drop={(0, 1): 1.0})
    assert broadcast_weights(update(0), eps[0].membership.table, eps[0]) == {1: "timeout"}


def test_four_nodes_three_acks():
    _, eps = swarm_of(4)
    for ep in eps:
        report = broadcast_weights(update(ep.node_id), ep.membership.table, ep)
        assert sorted(report.values()) == ["ack"] * 3


def test_eviction_and_reinstatement():
    net, eps = swarm_of(2)
    table = eps[0].membership.table
    eps[1].close()
    for _ in range(EVICT_AFTER):
        broadcast_weights(update(0), table, eps[0])
    assert 1 not in table and 1 in table.suspects
    eps[1].closed = False
    eps[1].request(eps[0].address, update_message(update(1)))
    assert 1 in table and table.entries[1].failures == 0


def test_no_traffic_collects_nothing():
    ep = SimNetwork().endpoint(0)
    assert collect_updates(0, 1000.0, ep) == []


def test_stale_round_is_dropped():
    _, eps = swarm_of(4)
    for ep, rnd in zip(eps[1:], (3, 3, 2)):
        ep.request(eps[0].address, update_message(update(ep.node_id, rnd)))
    got = collect_updates(3, 1000.0, eps[0])
    assert sorted(u.node_id for u in got) == [1, 2]


def test_future_round_is_held_for_later():
    _, eps = swarm_of(2)
    eps[1].request(eps[0].address, update_message(update(1, 4)))
    assert collect_updates(3, 1000.0, eps[0]) == []
    assert [u.node_id for u in collect_updates(4, 1000.0, eps[0])] == [1]


def test_slow_link_is_buffered_and_logged(caplog):
    net, eps = swarm_of(3, link_latency={(2, 0): 1500.0})
    for ep in eps[1:]:
        ep.request(eps[0].address, update_message(update(ep.node_id, 0)))
    with caplog.at_level(logging.INFO, logger="swarmlearn.net.exchange"):
        got = collect_updates(0, 1000.0, eps[0])
    assert [u.node_id for u in got] == [1]
    assert eps[0].pending_count() == 1
    assert "1 update(s) buffered" in caplog.text


def test_exact_latency_without_jitter():
    net, eps = swarm_of(3, latency_mean=25.0)
    delivered = [e for e in net.transcript if e.fate == "delivered"]
    assert delivered and all(e.arrival - e.sent == 25.0 for e in delivered)


def test_partitions_block_cross_group_traffic():
    net = SimNetwork(SimNetConfig(partitions=({0, 1}, {2, 3})))
    eps = [net.endpoint(i) for i in range(4)]
    for ep in eps:
        Membership(ep)
    with pytest.raises(Timeout):
        eps[0].request(eps[2].address, SwarmMessage(0, Hello(eps[0].address)))
    eps[0].request(eps[1].address, SwarmMessage(0, Hello(eps[0].address)))
    for e in net.transcript:
        crossed = (e.src in (0, 1)) != (e.dst in (0, 1))
        assert (e.fate == "partitioned") == crossed


def _workload(seed):
    net, eps = swarm_of(4, latency_mean=20.0, latency_jitter=5.0, drop_prob=0.2, seed=seed)
    for rnd in range(3):
        for ep in eps:
            broadcast_weights(update(ep.node_id, rnd), ep.membership.table, ep)
        net.advance(1000.0)
    return net.transcript_lines()


def test_same_seed_same_transcript():
    a, b = _workload(5), _workload(5)
    assert a == b and len(a) > 20
    assert a != _workload(6)


def test_peer_table_merge_newest_wins():
    t = PeerTable(0)
    t.upsert(1, "h:1", 5.0)
    t.upsert(1, "h:2", 3.0)
    assert t.address_of(1) == "h:1"
    t.upsert(1, "h:3", 9.0)
    t.upsert(0, "h:4", 1.0)
    t.upsert(2, "not-an-address", 1.0)
    assert t.snapshot() == {1: "h:3"}


def test_connection_refused_counts_as_failure():
    net, eps = swarm_of(2)
    eps[1].close()
    assert broadcast_weights(update(0), eps[0].membership.table, eps[0]) == {1: "refused"}
    with pytest.raises(ConnRefused):
        eps[0].request(eps[1].address, SwarmMessage(0, Hello()))
