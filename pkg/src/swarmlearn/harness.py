"""Scenario runner: centralized, standalone and swarm arms scored on one test set."""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import statistics
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .aggregation import GatePolicy
from .data import Dataset, NodeShard, PartitionPlan, partition, split, synth_dataset, union_shards
from .errors import CoincidentCentroids, DegenerateClusters, MissingCells, SwarmError, TransportDown
from .metrics import classification_report, davies_bouldin
from .net.membership import gossip_round, join
from .net.sim import SimNetConfig, SimNetwork
from .net.tcp import TcpTransport
from .node import NodeConfig, run_centralized, run_node, run_standalone, run_swarm
from .params import WeightVector
from .trainer import ModelSpec, TrainConfig, forward, hidden_features, safe_auc

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ARMS = ("centralized", "standalone", "swarm")
CSV_COLUMNS = ("scenario", "seed", "node", "arm", "auc", "sens", "spec", "f1", "gap")
CANONICAL = ("unbalanced_10_30_30_30", "downsample_n2_25", "downsample_n3_05")

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "name": "scenario",
    "dataset": {"n": 10000, "d": 64, "class_sep": 0.25, "positive_frac": 0.5},
    "split": {"train": 0.7, "val": 0.1},
    "fractions": [0.10, 0.30, 0.30, 0.30],
    "class_bias": None,
    "downsample": {},
    "seeds": [1, 2, 3, 4, 5],
    "node": {
        "hidden_dim": 32,
        "epochs": 20,
        "batch_size": 32,
        "lr_initial": 1e-2,
        "lr_min": 0.0,
        "weight_decay": 1e-4,
        "patience": 5,
        "exchange_interval": 3,
        "gate": {"mode": "relative", "theta": 0.8},
        "scheme": "fedavg",
        "collect_window_ms": 1000.0,
        "ack_timeout_ms": 5000.0,
    },
    "network": {"latency_mean_ms": 20.0, "latency_jitter_ms": 5.0, "drop_prob": 0.0, "partitions": []},
    "arms": {"centralized": True, "standalone": True, "swarm": True},
}


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "downsample":
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ScenarioSpec:
    """A scenario file, defaults filled in. ``raw`` is the merged JSON object."""

    raw: dict

    def __post_init__(self):
        r = self.raw
        if r.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema_version {r.get('schema_version')!r}")
        if not r["seeds"]:
            raise ValueError("scenario needs at least one seed")
        self.plan_fractions()  # validates fractions and overrides
        unknown = set(r["arms"]) - set(ARMS)
        if unknown:
            raise ValueError(f"unknown arms {sorted(unknown)}")

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioSpec":
        return cls(_deep_merge(DEFAULTS, obj))

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def canonical(cls, name: str) -> "ScenarioSpec":
        text = resources.files("swarmlearn.scenarios").joinpath(f"{name}.json").read_text()
        return cls.from_dict(json.loads(text))

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def seeds(self) -> list[int]:
        return [int(s) for s in self.raw["seeds"]]

    def plan_fractions(self) -> list[float]:
        fr = [float(f) for f in self.raw["fractions"]]
        for node, scale in self.raw.get("downsample", {}).items():
            k = int(node)
            if not (0 <= k < len(fr)) or not (0 < float(scale) <= 1):
                raise ValueError(f"bad downsample override {node}: {scale}")
            fr[k] *= float(scale)
        PartitionPlan(tuple(fr), self.raw.get("class_bias"))
        return fr

    def with_overrides(self, **changes) -> "ScenarioSpec":
        return ScenarioSpec(_deep_merge(self.raw, changes))


def _seed_streams(seed: int) -> dict[str, int]:
    names = ("data", "split", "partition", "init", "train", "net")
    vals = np.random.SeedSequence(seed).generate_state(len(names))
    return {n: int(v) for n, v in zip(names, vals)}


def prepare(spec: ScenarioSpec, seed: int) -> tuple[list[NodeShard], Dataset, dict[str, int]]:
    r = spec.raw
    s = _seed_streams(seed)
    ds_cfg = r["dataset"]
    ds = synth_dataset(int(ds_cfg["n"]), int(ds_cfg["d"]), float(ds_cfg["class_sep"]),
                       float(ds_cfg["positive_frac"]), s["data"])
    train, val, test = split(ds, float(r["split"]["train"]), float(r["split"]["val"]), s["split"])
    pool = Dataset.concat([train, val])
    tv = float(r["split"]["train"]) + float(r["split"]["val"])
    plan = PartitionPlan(tuple(spec.plan_fractions()), r.get("class_bias"), s["partition"],
                         val_frac=float(r["split"]["val"]) / tv)
    return partition(pool, plan), test, s


def node_configs(spec: ScenarioSpec, shards: list[NodeShard], streams: dict[str, int]) -> list[NodeConfig]:
    n = spec.raw["node"]
    d = shards[0].train.dim
    out = []
    for sh in shards:
        tcfg = TrainConfig(epochs=int(n["epochs"]), batch_size=int(n["batch_size"]),
                           lr_initial=float(n["lr_initial"]), lr_min=float(n["lr_min"]),
                           patience=int(n["patience"]), seed=streams["train"] + sh.node_id,
                           weight_decay=float(n["weight_decay"]))
        out.append(NodeConfig(
            node_id=sh.node_id, shard=sh, model=ModelSpec(d, int(n["hidden_dim"])), train=tcfg,
            exchange_interval=int(n["exchange_interval"]), gate=GatePolicy(**n["gate"]),
            scheme=n["scheme"], max_epochs=int(n["epochs"]), collect_window=float(n["collect_window_ms"]),
            ack_timeout=float(n["ack_timeout_ms"]), init_seed=streams["init"]))
    return out


def sim_config(spec: ScenarioSpec, streams: dict[str, int]) -> SimNetConfig:
    net = spec.raw["network"]
    return SimNetConfig(float(net["latency_mean_ms"]), float(net["latency_jitter_ms"]), float(net["drop_prob"]),
                        tuple(frozenset(p) for p in net.get("partitions", [])), streams["net"])


def score(weights: WeightVector, shard: NodeShard, test: Dataset) -> dict:
    """Test-set metrics plus the train-minus-validation AUC gap on the node's own data."""
    train_auc = safe_auc(weights, shard.train)
    val_auc = safe_auc(weights, shard.validation)
    rep = classification_report(forward(weights, test.features), test.labels, 0.5, train_auc - val_auc)
    feats, hidden = hidden_features(weights, test.features)
    try:
        dbi = davies_bouldin(feats, test.labels)
    except (DegenerateClusters, CoincidentCentroids):
        dbi = None
    return {"metrics": rep.to_dict(), "train_auc": train_auc, "val_auc": val_auc, "dbi": dbi,
            "dbi_space": "hidden" if hidden else "raw"}


def sim_swarm(configs, spec: ScenarioSpec, streams: dict[str, int]) -> tuple[dict, dict]:
    """Swarm arm on the deterministic simulator."""
    net = SimNetwork(sim_config(spec, streams))
    nodes = run_swarm(configs, net)
    digest = hashlib.sha256("\n".join(net.transcript_lines()).encode()).hexdigest()
    return {k: n.result() for k, n in nodes.items()}, {"transport": "sim", "transcript_sha256": digest}


def tcp_swarm(configs, spec: ScenarioSpec, streams: dict[str, int], tls=None) -> tuple[dict, dict]:
    """Swarm arm with one TCP node per thread on localhost (not bit-reproducible)."""
    transports = [TcpTransport(c.node_id, tls=tls) for c in configs]
    try:
        join([], configs[0].node_id, transports[0])
        for c, t in zip(configs[1:], transports[1:]):
            join([transports[0].address], c.node_id, t)
        for t in transports:
            gossip_round(t)
        results: dict = {}
        errors: list = []

        def work(c, t):
            try:
                results[c.node_id] = run_node(c, t)
            except Exception as exc:  # surfaced below as a failed cell
                errors.append((c.node_id, exc))

        threads = [threading.Thread(target=work, args=(c, t), name=f"node-{c.node_id}")
                   for c, t in zip(configs, transports)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        if errors:
            node_id, exc = errors[0]
            raise TransportDown(f"node {node_id} failed: {exc}")
        return results, {"transport": "tcp"}
    finally:
        for t in transports:
            t.close()


def run_seed(spec: ScenarioSpec, seed: int, swarm_runner=sim_swarm) -> dict:
    """Every enabled arm for one seed, as a JSON-ready RunResult object."""
    shards, test, streams = prepare(spec, seed)
    configs = node_configs(spec, shards, streams)
    arms = spec.raw["arms"]
    cells, rounds, extra = [], {}, {}

    def cell(node, arm, fn):
        try:
            body = fn()
            cells.append({"node": node, "arm": arm, "status": "ok", **body})
        except SwarmError as exc:
            log.exception("arm %s node %s failed", arm, node)
            cells.append({"node": node, "arm": arm, "status": "failed", "error": f"{type(exc).__name__}: {exc}"})

    def central():
        w, hist = run_centralized(shards, configs[0])
        return {**score(w, union_shards(shards), test), "epochs": len(hist)}

    if arms.get("centralized"):
        cell("all", "centralized", central)
    if arms.get("standalone"):
        for c in configs:
            def standalone(c=c):
                w, hist = run_standalone(c)
                return {**score(w, c.shard, test), "epochs": len(hist)}
            cell(c.node_id, "standalone", standalone)
    if arms.get("swarm"):
        try:
            outcome, extra = swarm_runner(configs, spec, streams)
        except SwarmError as exc:
            for c in configs:
                cells.append({"node": c.node_id, "arm": "swarm", "status": "failed",
                              "error": f"{type(exc).__name__}: {exc}"})
        else:
            for c in configs:
                w, reps, stop = outcome[c.node_id]
                cell(c.node_id, "swarm", lambda w=w, c=c, reps=reps, stop=stop: {
                    **score(w, c.shard, test), "epochs": sum(r.epochs_run for r in reps), "stop": stop.reason})
                rounds[str(c.node_id)] = [r.to_dict() for r in reps]

    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": spec.name,
        "seed": seed,
        "test_hash": test.digest(),
        "shard_sizes": {str(s.node_id): [len(s.train), len(s.validation)] for s in shards},
        "cells": cells,
        "rounds": rounds,
        "swarm": extra,
    }


def dump_result(result: dict) -> str:
    return json.dumps(result, indent=1, sort_keys=True) + "\n"


def run_scenario(spec: ScenarioSpec, out_dir=None, swarm_runner=sim_swarm) -> list[dict]:
    """Run every seed; with ``out_dir`` write ``seed_<s>.json`` per seed plus ``timing.json``."""
    results, timing = [], {}
    for seed in spec.seeds:
        t0 = time.perf_counter()
        res = run_seed(spec, seed, swarm_runner)
        timing[str(seed)] = time.perf_counter() - t0
        results.append(res)
        if out_dir is not None:
            d = Path(out_dir)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"seed_{seed}.json").write_text(dump_result(res))
    if out_dir is not None:
        # wall time lives outside the result files so those stay byte-reproducible
        (Path(out_dir) / "timing.json").write_text(json.dumps(timing, indent=1, sort_keys=True) + "\n")
    return results


def load_results(in_dir) -> list[dict]:
    paths = sorted(Path(in_dir).rglob("seed_*.json"))
    return [json.loads(p.read_text()) for p in paths]


# reporting ---------------------------------------------------------------

def result_rows(results: list[dict]) -> list[dict]:
    rows = []
    for res in results:
        for c in res["cells"]:
            if c["status"] != "ok":
                continue
            m = c["metrics"]
            rows.append({"scenario": res["scenario"], "seed": res["seed"], "node": c["node"], "arm": c["arm"],
                         "auc": m["auc"], "sens": m["sensitivity"], "spec": m["specificity"], "f1": m["f1"],
                         "gap": m["gap"]})
    return rows


def rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _mean_std(xs: list[float]) -> tuple[float, float]:
    if len(xs) == 1:
        return xs[0], 0.0
    return statistics.fmean(xs), statistics.stdev(xs)


@dataclass
class Summary:
    groups: dict = field(default_factory=dict)    # (scenario, node, arm) -> stats
    uplift: dict = field(default_factory=dict)    # (scenario, node) -> swarm minus standalone AUC
    arm_gap: dict = field(default_factory=dict)   # (scenario, arm) -> mean gap
    missing: list = field(default_factory=list)
    caveats: list = field(default_factory=list)


def compare_report(results: list[dict]) -> Summary:
    """Mean and sample std over seeds per (node, arm), swarm uplift per node, mean gap per arm."""
    if not results:
        raise ValueError("no results to summarize")
    s = Summary()
    by_group: dict = {}
    expected: dict = {}
    for res in results:
        sc = res["scenario"]
        for c in res["cells"]:
            key = (sc, str(c["node"]), c["arm"])
            expected.setdefault(key, set()).add(res["seed"])
            if c["status"] != "ok":
                s.missing.append((sc, res["seed"], str(c["node"]), c["arm"]))
                continue
            by_group.setdefault(key, []).append(c["metrics"])
    seeds_by_sc: dict = {}
    for res in results:
        seeds_by_sc.setdefault(res["scenario"], set()).add(res["seed"])
    for key, seeds in expected.items():
        for seed in sorted(seeds_by_sc[key[0]] - seeds):
            s.missing.append((key[0], seed, key[1], key[2]))
    for key, ms in sorted(by_group.items()):
        stats = {}
        for metric in ("auc", "sensitivity", "specificity", "f1", "gap"):
            stats[metric] = _mean_std([m[metric] for m in ms])
        stats["n"] = len(ms)
        s.groups[key] = stats
        if len(ms) == 1:
            s.caveats.append(f"{key}: single seed, std reported as 0")
    for (sc, node, arm), st in s.groups.items():
        if arm == "swarm" and (sc, node, "standalone") in s.groups:
            s.uplift[(sc, node)] = st["auc"][0] - s.groups[(sc, node, "standalone")]["auc"][0]
    gaps: dict = {}
    for (sc, node, arm), ms in by_group.items():
        gaps.setdefault((sc, arm), []).extend(m["gap"] for m in ms)
    s.arm_gap = {k: statistics.fmean(v) for k, v in sorted(gaps.items())}
    return s


def render_text(summary: Summary) -> str:
    lines = [f"{'scenario':<24} {'node':>5} {'arm':<12} {'n':>2} {'auc (mean ± sd)':>20} "
             f"{'sens':>7} {'spec':>7} {'f1':>7} {'gap':>8}"]
    for (sc, node, arm), st in summary.groups.items():
        auc_m, auc_s = st["auc"]
        lines.append(f"{sc:<24} {node:>5} {arm:<12} {st['n']:>2} {auc_m:>11.4f} ± {auc_s:<6.4f} "
                     f"{st['sensitivity'][0]:>7.4f} {st['specificity'][0]:>7.4f} {st['f1'][0]:>7.4f} "
                     f"{st['gap'][0]:>8.4f}")
    if summary.uplift:
        lines.append("")
        lines.append("swarm - standalone mean AUC")
        for (sc, node), u in summary.uplift.items():
            lines.append(f"  {sc:<24} node {node:>3}: {u:+.4f}")
    if summary.arm_gap:
        lines.append("")
        lines.append("mean generalization gap (train - val AUC)")
        for (sc, arm), g in summary.arm_gap.items():
            lines.append(f"  {sc:<24} {arm:<12} {g:+.4f}")
    lines.append("")
    lines.append("± is the sample standard deviation over seeds")
    for c in summary.caveats:
        lines.append(f"note: {c}")
    if summary.missing:
        lines.append(f"missing cells: {len(summary.missing)}")
        for m in summary.missing:
            lines.append(f"  {m}")
    return "\n".join(lines) + "\n"


def summary_csv(summary: Summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "node", "arm", "n", "auc_mean", "auc_sd", "sens_mean", "spec_mean", "f1_mean",
                "gap_mean", "uplift"])
    for (sc, node, arm), st in summary.groups.items():
        up = summary.uplift.get((sc, node)) if arm == "swarm" else None
        w.writerow([sc, node, arm, st["n"], repr(st["auc"][0]), repr(st["auc"][1]), repr(st["sensitivity"][0]),
                    repr(st["specificity"][0]), repr(st["f1"][0]), repr(st["gap"][0]),
                    "" if up is None else repr(up)])
    return buf.getvalue()


def require_complete(summary: Summary) -> None:
    if summary.missing:
        raise MissingCells(summary.missing)
