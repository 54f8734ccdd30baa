"""Per-node round loop: train K epochs, push weights, collect, gated merge."""
from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .aggregation import GatePolicy, ModelUpdate, merge_round
from .data import NodeShard, union_shards
from .errors import AlreadyStopped, TransportDown
from .net.exchange import DEFAULT_ACK_TIMEOUT_MS, broadcast_weights, collect_updates
from .net.membership import Membership, gossip_round, join, leave
from .params import WeightVector, l2_distance
from .trainer import EpochHistory, EpochRecord, LocalTrainer, ModelSpec, TrainConfig, init_model

log = logging.getLogger("swarmlearn.node")

STOP_REASONS = ("max_epochs", "early_stop", "manual")


@dataclass(frozen=True)
class NodeConfig:
    node_id: int
    shard: NodeShard
    model: ModelSpec
    train: TrainConfig = TrainConfig()
    exchange_interval: int = 3
    gate: GatePolicy = GatePolicy()
    scheme: str = "fedavg"
    max_epochs: int = 20
    collect_window: float = 1000.0
    ack_timeout: float = DEFAULT_ACK_TIMEOUT_MS
    # shared initial weights across the swarm come from this seed
    init_seed: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.exchange_interval < 1:
            raise ValueError("exchange_interval must be >= 1")
        if self.max_epochs < self.exchange_interval:
            raise ValueError("max_epochs must be >= exchange_interval")

    @property
    def train_config(self) -> TrainConfig:
        # the cosine schedule spans the whole run
        return replace(self.train, epochs=self.max_epochs)


@dataclass
class RoundReport:
    round: int
    epochs_run: int
    local_val_auc: float
    candidate_val_auc: float
    gate_accepted: bool
    peers_heard: int
    weights_l2_delta: float
    acks: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class StopSignal:
    reason: str

    def __post_init__(self):
        if self.reason not in STOP_REASONS:
            raise ValueError(f"unknown stop reason {self.reason!r}")


@dataclass
class RunHandle:
    """Lets another thread request a manual stop; observed between epochs."""

    _stop: threading.Event = field(default_factory=threading.Event)
    done: bool = False

    @property
    def stop_requested(self) -> bool:
        return self._stop.is_set()


def signal_stop(handle: RunHandle) -> bool:
    if handle.done or handle.stop_requested:
        raise AlreadyStopped("run already stopped")
    handle._stop.set()
    return True


def _log_line(**fields) -> None:
    if log.isEnabledFor(logging.INFO):
        log.info(json.dumps(fields, sort_keys=False))


class SwarmNode:
    """One node's training state plus its view of the swarm.

    The round loop is split into phases so a driver can interleave several
    nodes on a shared simulated clock; :func:`run_node` just calls the
    phases in order for a single node.
    """

    def __init__(self, cfg: NodeConfig, transport=None, handle: RunHandle | None = None,
                 weights: WeightVector | None = None,
                 on_epoch: Callable[["SwarmNode", EpochRecord], None] | None = None):
        self.cfg = cfg
        self.transport = transport
        self.handle = handle or RunHandle()
        self.on_epoch = on_epoch
        w0 = weights if weights is not None else init_model(cfg.model, cfg.init_seed)
        self.trainer = LocalTrainer(cfg.shard, w0, cfg.train_config)
        self.round = 0
        self.reports: list[RoundReport] = []
        self.stop: StopSignal | None = None
        self.membership = None
        if transport is not None:
            self.membership = transport.membership or Membership(transport)
        self._round_epochs = 0
        self._acks = 0

    @property
    def table(self):
        return self.membership.table if self.membership else None

    @property
    def finished(self) -> bool:
        return self.stop is not None

    def _now(self):
        return self.transport.now() if self.transport is not None else time.time()

    # phases ------------------------------------------------------------

    def train_phase(self) -> int:
        t = self.trainer
        k = self.cfg.exchange_interval
        target = min((t.epoch // k + 1) * k, self.cfg.max_epochs)
        run = 0
        while t.epoch < target and not t.stopped_early:
            rec = t.run_epoch()
            run += 1
            _log_line(ts=self._now(), node=self.cfg.node_id, epoch=rec.epoch, round=self.round,
                      train_auc=rec.train_auc, val_auc=rec.val_auc, gate=None, peers=None)
            if self.on_epoch is not None:
                self.on_epoch(self, rec)
            if self.handle.stop_requested:
                break
        self._round_epochs = run
        return run

    def _local_update(self) -> ModelUpdate:
        return ModelUpdate(self.trainer.weights, self.cfg.shard.sample_count, self.cfg.node_id, self.round,
                           self.trainer.epoch)

    def broadcast_phase(self) -> dict[int, str]:
        if self.transport is None or self.handle.stop_requested or not self.table:
            self._acks = 0
            return {}
        report = broadcast_weights(self._local_update(), self.table, self.transport, self.cfg.ack_timeout)
        self._acks = sum(1 for v in report.values() if v == "ack")
        return report

    def collect_phase(self) -> list[ModelUpdate]:
        if self.transport is None or self.handle.stop_requested:
            return []
        expect = len(self.table) if self.table is not None else None
        return collect_updates(self.round, self.cfg.collect_window, self.transport,
                               self.trainer.shape, expect=expect)

    def merge_phase(self, peers: Sequence[ModelUpdate]) -> RoundReport:
        t = self.trainer
        local = self._local_update()
        new, accepted, rep = merge_round(local, peers, self.cfg.shard.validation, self.cfg.gate,
                                         self.cfg.scheme)
        delta = 0.0
        if accepted and new is not local.weights:
            delta = l2_distance(local.weights, new)
            if not t.stopped_early:
                t.adopt(new)
            else:
                t.w = np.array(new.values)
        report = RoundReport(self.round, self._round_epochs, rep.local_val_auc, rep.candidate_val_auc, accepted,
                             rep.peers_used, delta, self._acks)
        self.reports.append(report)
        _log_line(ts=self._now(), node=self.cfg.node_id, epoch=t.epoch, round=self.round, train_auc=None,
                  val_auc=rep.candidate_val_auc if accepted else rep.local_val_auc, gate=accepted,
                  peers=rep.peers_used)
        self.round += 1
        self._update_stop()
        if self.cfg.checkpoint_dir:
            save_checkpoint(self, self.cfg.checkpoint_dir)
        return report

    def _update_stop(self) -> None:
        if self.handle.stop_requested:
            self.stop = StopSignal("manual")
        elif self.trainer.stopped_early:
            self.stop = StopSignal("early_stop")
        elif self.trainer.epoch >= self.cfg.max_epochs:
            self.stop = StopSignal("max_epochs")
        if self.stop is not None:
            self.handle.done = True

    def run_round(self) -> RoundReport:
        self.train_phase()
        self.broadcast_phase()
        return self.merge_phase(self.collect_phase())

    def result(self) -> tuple[WeightVector, list[RoundReport], StopSignal]:
        return self.trainer.best_weights, self.reports, self.stop


def run_node(cfg: NodeConfig, transport=None, handle: RunHandle | None = None, *,
             seed_peers: Sequence[str] = (), resume_from: str | None = None,
             on_epoch=None) -> tuple[WeightVector, list[RoundReport], StopSignal]:
    """Run one node to completion over ``transport`` (or alone when None)."""
    node = SwarmNode(cfg, transport, handle, on_epoch=on_epoch)
    if resume_from is not None:
        load_checkpoint(node, resume_from)
    if transport is not None and seed_peers:
        join(seed_peers, cfg.node_id, transport)
    try:
        while not node.finished:
            node.run_round()
            if transport is not None:
                transport.end_round(cfg.collect_window)
    except TransportDown as exc:
        raise TransportDown(str(exc), node.reports) from exc
    if transport is not None:
        leave(transport)
    return node.result()


def run_standalone(cfg: NodeConfig) -> tuple[WeightVector, EpochHistory]:
    """Train on the node's own shard only, for ``max_epochs`` with early stopping."""
    t = LocalTrainer(cfg.shard, init_model(cfg.model, cfg.init_seed), cfg.train_config)
    while not t.exhausted:
        t.run_epoch()
    return t.best_weights, t.history


def run_centralized(shards: Sequence[NodeShard], cfg: NodeConfig) -> tuple[WeightVector, EpochHistory]:
    """Standalone training on the union of every shard."""
    return run_standalone(replace(cfg, node_id=-1, shard=union_shards(shards)))


class LockstepSwarm:
    """Several nodes stepping through rounds together on one simulated network.

    Node 0 in ``configs`` bootstraps; the rest join through it and gossip
    spreads the full membership. In each round every active node trains,
    then all broadcast, then all collect within the window, then the
    virtual clock moves past the window. ``before_collect`` callbacks run
    between broadcast and collect (fault injection in tests).
    """

    def __init__(self, configs: Sequence[NodeConfig], network, *, handles: dict[int, RunHandle] | None = None,
                 join_attempts: int = 5, gossip_rounds: int = 1):
        handles = handles or {}
        self.network = network
        self.nodes = [SwarmNode(c, network.endpoint(c.node_id), handles.get(c.node_id)) for c in configs]
        self.window = max(c.collect_window for c in configs)
        self.before_collect: list[Callable[[int], None]] = []
        self.rounds = 0
        first = self.nodes[0].transport
        join([], configs[0].node_id, first)
        for n in self.nodes[1:]:
            join([first.address], n.cfg.node_id, n.transport, attempts=join_attempts)
        for _ in range(gossip_rounds):
            for n in self.nodes:
                gossip_round(n.transport)

    def step(self) -> bool:
        """Run one round; returns False once every node has stopped."""
        active = [n for n in self.nodes if not n.finished]
        if not active:
            return False
        for n in active:
            n.train_phase()
        for n in active:
            n.broadcast_phase()
        for hook in self.before_collect:
            hook(self.rounds)
        for n in active:
            n.merge_phase(n.collect_phase())
        self.network.advance(self.window)
        for n in active:
            if n.finished:
                leave(n.transport)
        self.rounds += 1
        return True

    def run(self) -> dict[int, SwarmNode]:
        while self.step():
            pass
        return {n.cfg.node_id: n for n in self.nodes}


def run_swarm(configs: Sequence[NodeConfig], network, **kwargs) -> dict[int, SwarmNode]:
    """Run ``configs`` as one simulated swarm until every node stops."""
    return LockstepSwarm(configs, network, **kwargs).run()


# checkpoints -----------------------------------------------------------

def _ckpt_paths(directory, node_id: int) -> tuple[Path, Path]:
    d = Path(directory)
    return d / f"node{node_id}.npz", d / f"node{node_id}.json"


def save_checkpoint(node: SwarmNode, directory) -> Path:
    """Weights, optimizer moments and RNG state after a completed round."""
    Path(directory).mkdir(parents=True, exist_ok=True)
    npz, meta_path = _ckpt_paths(directory, node.cfg.node_id)
    state = node.trainer.state_dict()
    meta = state.pop("meta")
    meta.update(schema_version=1, node_id=node.cfg.node_id, round=node.round,
                reports=[r.to_dict() for r in node.reports],
                stop=node.stop.reason if node.stop else None)
    tmp = npz.with_suffix(".tmp.npz")
    np.savez(tmp, **state)
    tmp.replace(npz)
    meta_path.write_text(json.dumps(meta, indent=1, sort_keys=True))
    return meta_path


def load_checkpoint(node: SwarmNode, directory) -> None:
    npz, meta_path = _ckpt_paths(directory, node.cfg.node_id)
    meta = json.loads(meta_path.read_text())
    with np.load(npz) as arrays:
        state = {k: arrays[k] for k in arrays.files}
    state["meta"] = meta
    node.trainer.load_state_dict(state)
    node.round = int(meta["round"])
    node.reports = [RoundReport(**r) for r in meta["reports"]]
