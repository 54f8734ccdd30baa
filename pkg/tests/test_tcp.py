import datetime
import threading

import pytest

from swarmlearn.aggregation import ModelUpdate
from swarmlearn.errors import ConnRefused
from swarmlearn.net import (TcpTransport, TlsConfig, broadcast_weights, collect_updates, gossip_round, join)
from swarmlearn.net.codec import Hello, SwarmMessage
from swarmlearn.node import LockstepSwarm, run_node
from swarmlearn.net import SimNetwork, SimNetConfig
from swarmlearn.params import WeightVector


@pytest.fixture
def transports():
    made = []

    def make(node_id, tls=None):
        t = TcpTransport(node_id, tls=tls)
        made.append(t)
        return t
    yield make
    for t in made:
        t.close()


def test_join_broadcast_collect_over_tcp(transports):
    a, b, c = transports(0), transports(1), transports(2)
    join([], 0, a)
    join([a.address], 1, b)
    join([a.address], 2, c)
    for t in (a, b, c):
        gossip_round(t)
    assert set(c.membership.table.ids()) == {0, 1}
    upd = ModelUpdate(WeightVector([0.5, -1.5]), 42, 1, 0, 3)
    assert broadcast_weights(upd, b.membership.table, b) == {0: "ack", 2: "ack"}
    got = collect_updates(0, 2000.0, a, expect=1)
    assert len(got) == 1 and got[0].weights == upd.weights and got[0].sample_count == 42


def test_tcp_refused_after_close(transports):
    a, b = transports(0), transports(1)
    addr = b.address
    b.close()
    with pytest.raises(ConnRefused):
        a.request(addr, SwarmMessage(0, Hello(a.address)), 1000.0)


def test_tcp_swarm_matches_simulator(node_cfg):
    configs = [node_cfg(i, collect_window=20000.0, max_epochs=6,
                        train=node_cfg(i).train.__class__(epochs=6, seed=100 + i)) for i in range(3)]
    sim = LockstepSwarm(configs, SimNetwork(SimNetConfig())).run()
    ts = [TcpTransport(c.node_id) for c in configs]
    try:
        join([], 0, ts[0])
        for t in ts[1:]:
            join([ts[0].address], t.node_id, t)
        for t in ts:
            gossip_round(t)
        out = {}
        threads = [threading.Thread(target=lambda c=c, t=t: out.__setitem__(c.node_id, run_node(c, t)))
                   for c, t in zip(configs, ts)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    finally:
        for t in ts:
            t.close()
    for c in configs:
        w_sim, reps_sim, _ = sim[c.node_id].result()
        w_tcp, reps_tcp, _ = out[c.node_id]
        assert w_sim.values.tobytes() == w_tcp.values.tobytes()
        assert [r.peers_heard for r in reps_sim] == [r.peers_heard for r in reps_tcp]


def _pki(tmp_path):
    x509 = pytest.importorskip("cryptography.x509")
    from cryptography.hazmat.primitives import hashes, serialization
    from cryptography.hazmat.primitives.asymmetric import ec
    from cryptography.x509.oid import NameOID

    now = datetime.datetime.now(datetime.timezone.utc)

    def name(cn):
        return x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, cn)])

    def write_key(key, path):
        path.write_bytes(key.private_bytes(serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
                                           serialization.NoEncryption()))

    def cert(subject, key, issuer, issuer_key, ca):
        b = (x509.CertificateBuilder().subject_name(name(subject)).issuer_name(name(issuer))
             .public_key(key.public_key()).serial_number(x509.random_serial_number())
             .not_valid_before(now - datetime.timedelta(minutes=5))
             .not_valid_after(now + datetime.timedelta(days=1))
             .add_extension(x509.BasicConstraints(ca=ca, path_length=None), critical=True))
        return b.sign(issuer_key, hashes.SHA256())

    def issue(cn, ca_key, ca_cn):
        key = ec.generate_private_key(ec.SECP256R1())
        c = cert(cn, key, ca_cn, ca_key, False)
        (tmp_path / f"{cn}.pem").write_bytes(c.public_bytes(serialization.Encoding.PEM))
        write_key(key, tmp_path / f"{cn}.key")
        return TlsConfig(str(tmp_path / f"{cn}.pem"), str(tmp_path / f"{cn}.key"), str(tmp_path / "ca.pem"))

    ca_key = ec.generate_private_key(ec.SECP256R1())
    ca = cert("swarm-ca", ca_key, "swarm-ca", ca_key, True)
    (tmp_path / "ca.pem").write_bytes(ca.public_bytes(serialization.Encoding.PEM))
    rogue_key = ec.generate_private_key(ec.SECP256R1())
    rogue_ca = cert("rogue-ca", rogue_key, "rogue-ca", rogue_key, True)
    (tmp_path / "rogue.pem").write_bytes(rogue_ca.public_bytes(serialization.Encoding.PEM))
    good = [issue(f"node{i}", ca_key, "swarm-ca") for i in range(2)]
    bad = issue("intruder", rogue_key, "rogue-ca")
    bad = TlsConfig(bad.certfile, bad.keyfile, str(tmp_path / "ca.pem"))
    return good, bad


def test_mutual_tls(transports, tmp_path):
    (tls0, tls1), rogue = _pki(tmp_path)
    a, b = transports(0, tls0), transports(1, tls1)
    join([], 0, a)
    join([a.address], 1, b)
    assert a.membership.table.ids() == [1]
    plain = transports(2)
    with pytest.raises(ConnRefused):
        plain.request(a.address, SwarmMessage(2, Hello(plain.address)), 2000.0)
    intruder = transports(3, rogue)
    with pytest.raises(ConnRefused):
        intruder.request(a.address, SwarmMessage(3, Hello(intruder.address)), 2000.0)
    assert a.membership.table.ids() == [1]
