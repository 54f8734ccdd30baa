"""Merge policies and the validation gate applied before adopting a merge."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .data import Dataset
from .errors import EmptyInput
from .params import WeightVector, linear_combine
from .trainer import safe_auc

log = logging.getLogger(__name__)

GATE_MODES = ("relative", "absolute", "off")
SCHEMES = ("fedavg", "uniform")


@dataclass(frozen=True)
class ModelUpdate:
    weights: WeightVector
    sample_count: int
    node_id: int
    round: int = 0
    epoch: int = 0

    def __post_init__(self):
        if int(self.sample_count) < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")


@dataclass(frozen=True)
class GatePolicy:
    mode: str = "relative"
    theta: float = 0.8

    def __post_init__(self):
        if self.mode not in GATE_MODES:
            raise ValueError(f"gate mode must be one of {GATE_MODES}")
        if not (0.0 < self.theta <= 1.0):
            raise ValueError("theta must lie in (0, 1]")


@dataclass
class MergeReport:
    peers_offered: int
    peers_used: int
    local_val_auc: float
    candidate_val_auc: float
    accepted: bool
    discarded: list = field(default_factory=list)


def fedavg(updates: Sequence[ModelUpdate]) -> WeightVector:
    """Sample-count weighted mean of the update weights."""
    if not updates:
        raise EmptyInput("no updates to average")
    return linear_combine([u.weights for u in updates], [u.sample_count for u in updates])


def uniform_average(updates: Sequence[ModelUpdate]) -> WeightVector:
    if not updates:
        raise EmptyInput("no updates to average")
    return linear_combine([u.weights for u in updates], [1.0] * len(updates))


def gate_decision(candidate_val_auc: float, incumbent_val_auc: float, policy: GatePolicy) -> bool:
    """True means accept the candidate."""
    if policy.mode == "off":
        return True
    if policy.mode == "absolute":
        return candidate_val_auc >= policy.theta
    return candidate_val_auc >= policy.theta * incumbent_val_auc


def merge_round(local: ModelUpdate, peers: Sequence[ModelUpdate], shard_val: Dataset, policy: GatePolicy,
                scheme: str = "fedavg") -> tuple[WeightVector, bool, MergeReport]:
    """Average ``local`` with compatible peers and gate the result on validation AUC.

    Peers whose shape differs from the local model are dropped with a log
    line. The returned weights are exactly the candidate or exactly the
    local weights.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    usable, discarded = [local], []
    for p in peers:
        if p.weights.shape != local.weights.shape:
            log.warning("discarding update from node %s: shape %s != %s", p.node_id,
                        p.weights.shape.layer_dims, local.weights.shape.layer_dims)
            discarded.append(p.node_id)
            continue
        usable.append(p)

    local_auc = safe_auc(local.weights, shard_val)
    if len(usable) == 1:
        return local.weights, True, MergeReport(len(peers), 0, local_auc, local_auc, True, discarded)

    combine = fedavg if scheme == "fedavg" else uniform_average
    candidate = combine(usable)
    cand_auc = safe_auc(candidate, shard_val)
    accepted = gate_decision(cand_auc, local_auc, policy)
    report = MergeReport(len(peers), len(usable) - 1, local_auc, cand_auc, accepted, discarded)
    return (candidate if accepted else local.weights), accepted, report
