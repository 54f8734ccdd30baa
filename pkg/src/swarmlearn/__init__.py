"""Peer-to-peer swarm learning on desk-scale synthetic data."""
from .aggregation import GatePolicy, ModelUpdate, fedavg, gate_decision, merge_round, uniform_average
from .data import (Dataset, NodeShard, PartitionPlan, load_csv, partition, split, synth_dataset, union_shards,
                   write_csv)
from .metrics import (ConfusionCounts, MetricsReport, classification_report, confusion_at_threshold,
                      davies_bouldin, roc_auc)
from .node import (NodeConfig, RoundReport, RunHandle, StopSignal, run_centralized, run_node, run_standalone,
                   run_swarm, signal_stop)
from .params import ShapeSpec, WeightVector, l2_distance, linear_combine
from .trainer import (EpochHistory, ModelSpec, OptimizerState, TrainConfig, adamw_step, cosine_lr, forward,
                      init_model, loss_and_gradient, train_epochs)

__version__ = "0.1.0"

__all__ = [
    "GatePolicy", "ModelUpdate", "fedavg", "gate_decision", "merge_round", "uniform_average", "Dataset",
    "NodeShard", "PartitionPlan", "load_csv", "partition", "split", "synth_dataset", "union_shards", "write_csv",
    "ConfusionCounts", "MetricsReport", "classification_report", "confusion_at_threshold", "davies_bouldin",
    "roc_auc", "NodeConfig", "RoundReport", "RunHandle", "StopSignal", "run_centralized", "run_node",
    "run_standalone", "run_swarm", "signal_stop", "ShapeSpec", "WeightVector", "l2_distance", "linear_combine",
    "EpochHistory", "ModelSpec", "OptimizerState", "TrainConfig", "adamw_step", "cosine_lr", "forward",
    "init_model", "loss_and_gradient", "train_epochs",
]
