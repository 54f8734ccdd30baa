"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Set
``SWARMLEARN_LOG`` to a logging level name (default WARNING) for
per-epoch and per-round JSON log lines.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
from pathlib import Path

from . import harness
from .aggregation import GatePolicy
from .data import NodeShard, PartitionPlan, load_csv, partition, synth_dataset, write_csv
from .errors import SwarmError
from .net.tcp import TcpTransport, TlsConfig
from .node import NodeConfig, RunHandle, run_node, signal_stop
from .trainer import ModelSpec, TrainConfig

log = logging.getLogger("swarmlearn.cli")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swarmlearn", description="Peer-to-peer swarm learning runtime and experiment harness.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="write a synthetic Gaussian-mixture dataset as CSV")
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--d", type=int, default=64)
    s.add_argument("--class-sep", type=float, default=0.25)
    s.add_argument("--positive-frac", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("partition", help="cut a CSV into per-node train/validation CSVs")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--fractions", type=_floats, required=True)
    s.add_argument("--class-bias", type=_floats)
    s.add_argument("--val-frac", type=float, default=0.125)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("run-node", help="run one TCP node from a JSON config")
    s.add_argument("--config", required=True)

    s = sub.add_parser("run-sim", help="run an N-node simulated swarm")
    s.add_argument("--nodes", type=int, default=4)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--spec", help="scenario file or canonical name supplying dataset and node settings")
    s.add_argument("--drop-prob", type=float)
    s.add_argument("--out", default="results/run-sim")

    s = sub.add_parser("scenario", help="run a scenario across its seeds")
    s.add_argument("--spec", required=True, help="scenario JSON file or canonical name")
    s.add_argument("--out", required=True)
    s.add_argument("--seeds", type=_ints, help="override the scenario's seed list")
    s.add_argument("--real", action="store_true", help="run the swarm arm over localhost TCP")

    s = sub.add_parser("report", help="summarize stored results")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--format", choices=("text", "csv"), default="text")
    s.add_argument("--summary", action="store_true", help="with --format csv, emit per-group statistics")
    return p


def _load_spec(ref: str) -> harness.ScenarioSpec:
    path = Path(ref)
    if path.exists():
        return harness.ScenarioSpec.load(path)
    if ref in harness.CANONICAL:
        return harness.ScenarioSpec.canonical(ref)
    raise UsageError(f"--spec: no such file or canonical scenario: {ref}")


def cmd_synth(a) -> int:
    ds = synth_dataset(a.n, a.d, a.class_sep, a.positive_frac, a.seed)
    write_csv(ds, a.out)
    print(f"wrote {len(ds)} rows x {ds.dim} features to {a.out}")
    return 0


def cmd_partition(a) -> int:
    ds = load_csv(a.input)
    plan = PartitionPlan(tuple(a.fractions), tuple(a.class_bias) if a.class_bias else None, a.seed, a.val_frac)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for sh in partition(ds, plan):
        write_csv(sh.train, out / f"node{sh.node_id}_train.csv")
        write_csv(sh.validation, out / f"node{sh.node_id}_val.csv")
        print(f"node {sh.node_id}: {len(sh.train)} train, {len(sh.validation)} validation")
    return 0


def node_config_from_json(obj: dict, base: Path) -> tuple[NodeConfig, dict]:
    """Build a NodeConfig from a run-node config object; paths resolve against ``base``."""
    if obj.get("schema_version", 1) != 1:
        raise UsageError("unsupported node config schema_version")

    def path(key):
        return str((base / obj[key]).resolve())

    train = load_csv(path("train_csv"))
    val = load_csv(path("val_csv"))
    node_id = int(obj["node_id"])
    t = obj.get("train", {})
    max_epochs = int(obj.get("max_epochs", 20))
    cfg = NodeConfig(
        node_id=node_id,
        shard=NodeShard(train, val, node_id),
        model=ModelSpec(train.dim, int(obj.get("model", {}).get("hidden_dim", 32))),
        train=TrainConfig(epochs=max_epochs, batch_size=int(t.get("batch_size", 32)),
                          lr_initial=float(t.get("lr_initial", 1e-2)), lr_min=float(t.get("lr_min", 0.0)),
                          patience=int(t.get("patience", 5)), seed=int(t.get("seed", node_id)),
                          weight_decay=float(t.get("weight_decay", 1e-4))),
        exchange_interval=int(obj.get("exchange_interval", 3)),
        gate=GatePolicy(**obj.get("gate", {})),
        scheme=obj.get("scheme", "fedavg"),
        max_epochs=max_epochs,
        collect_window=float(obj.get("collect_window_ms", 5000.0)),
        ack_timeout=float(obj.get("ack_timeout_ms", 5000.0)),
        init_seed=int(obj.get("init_seed", 0)),
        checkpoint_dir=path("checkpoint_dir") if obj.get("checkpoint_dir") else None,
    )
    return cfg, obj


def cmd_run_node(a) -> int:
    cfg_path = Path(a.config)
    if not cfg_path.exists():
        raise UsageError(f"--config: no such file: {a.config}")
    obj = json.loads(cfg_path.read_text())
    cfg, obj = node_config_from_json(obj, cfg_path.parent)
    host, _, port = obj.get("listen", "127.0.0.1:0").rpartition(":")
    tls = None
    if obj.get("tls"):
        t = obj["tls"]
        tls = TlsConfig(str(cfg_path.parent / t["cert"]), str(cfg_path.parent / t["key"]),
                        str(cfg_path.parent / t["ca"]))
    transport = TcpTransport(cfg.node_id, host or "127.0.0.1", int(port or 0), tls=tls)
    handle = RunHandle()

    def on_signal(signum, frame):
        try:
            signal_stop(handle)
            log.warning("stop requested; finishing the current epoch")
        except SwarmError:
            pass

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    resume = None
    if obj.get("resume") and cfg.checkpoint_dir and (Path(cfg.checkpoint_dir) / f"node{cfg.node_id}.json").exists():
        resume = cfg.checkpoint_dir
    print(f"node {cfg.node_id} listening on {transport.address}", flush=True)
    try:
        weights, reports, stop = run_node(cfg, transport, handle, seed_peers=obj.get("seeds", []),
                                          resume_from=resume)
    finally:
        transport.close()
    out = {"node_id": cfg.node_id, "stop": stop.reason, "rounds": [r.to_dict() for r in reports],
           "weights": weights.tolist(), "dims": weights.shape.to_json()}
    if obj.get("out"):
        Path(cfg_path.parent / obj["out"]).write_text(json.dumps(out, indent=1) + "\n")
    print(f"node {cfg.node_id} stopped ({stop.reason}) after {len(reports)} rounds")
    return 0


def cmd_run_sim(a) -> int:
    if a.nodes < 1:
        raise UsageError("--nodes must be >= 1")
    spec = _load_spec(a.spec) if a.spec else harness.ScenarioSpec.from_dict({})
    changes = {"name": f"run-sim-{a.nodes}", "fractions": [1.0 / a.nodes] * a.nodes, "downsample": {},
               "class_bias": None, "seeds": [a.seed],
               "arms": {"centralized": False, "standalone": False, "swarm": True}}
    if a.drop_prob is not None:
        changes["network"] = {"drop_prob": a.drop_prob}
    spec = spec.with_overrides(**changes)
    harness.run_scenario(spec, a.out)
    print(f"wrote {Path(a.out) / f'seed_{a.seed}.json'}")
    return 0


def cmd_scenario(a) -> int:
    spec = _load_spec(a.spec)
    if a.seeds:
        spec = spec.with_overrides(seeds=a.seeds)
    runner = harness.tcp_swarm if a.real else harness.sim_swarm
    results = harness.run_scenario(spec, a.out, runner)
    sys.stdout.write(harness.render_text(harness.compare_report(results)))
    return 0


def cmd_report(a) -> int:
    if not Path(a.input).is_dir():
        raise UsageError(f"--in: not a directory: {a.input}")
    results = harness.load_results(a.input)
    if not results:
        raise UsageError(f"--in: no seed_*.json result files under {a.input}")
    if a.format == "csv" and not a.summary:
        sys.stdout.write(harness.rows_csv(harness.result_rows(results)))
        return 0
    summary = harness.compare_report(results)
    sys.stdout.write(harness.summary_csv(summary) if a.format == "csv" else harness.render_text(summary))
    return 0


COMMANDS = {"synth": cmd_synth, "partition": cmd_partition, "run-node": cmd_run_node, "run-sim": cmd_run_sim,
            "scenario": cmd_scenario, "report": cmd_report}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SWARMLEARN_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SwarmError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
