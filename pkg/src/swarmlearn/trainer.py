"""Local training: a small sigmoid classifier, AdamW, cosine annealing and early stopping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .data import NodeShard
from .errors import DegenerateLabels, NonFinite, RangeError, ShapeMismatch
from .metrics import roc_auc
from .params import ShapeSpec, WeightVector

IMPROVEMENT_EPS = 1e-4


@dataclass(frozen=True)
class ModelSpec:
    """``hidden_dim == 0`` is plain logistic regression; otherwise one ReLU layer."""

    input_dim: int
    hidden_dim: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 0:
            raise ValueError(f"invalid model spec {self}")

    @property
    def shape(self) -> ShapeSpec:
        d, h = self.input_dim, self.hidden_dim
        if h == 0:
            return ShapeSpec(((d,), (1,)))
        return ShapeSpec(((h, d), (h,), (h,), (1,)))

    @classmethod
    def from_shape(cls, shape: ShapeSpec) -> "ModelSpec":
        dims = shape.layer_dims
        if len(dims) == 2 and len(dims[0]) == 1 and dims[1] == (1,):
            return cls(dims[0][0], 0)
        if len(dims) == 4 and len(dims[0]) == 2:
            h, d = dims[0]
            if dims[1:] == ((h,), (h,), (1,)):
                return cls(d, h)
        raise ShapeMismatch(f"dims {dims} do not describe a supported model")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr_initial: float = 1e-2
    lr_min: float = 0.0
    patience: int = 5
    seed: int = 0
    weight_decay: float = 1e-4

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size and patience must be >= 1")
        if not (self.lr_initial > self.lr_min >= 0):
            raise ValueError("need lr_initial > lr_min >= 0")


@dataclass
class OptimizerState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, shape: ShapeSpec, weight_decay: float = 1e-4) -> "OptimizerState":
        return cls(np.zeros(shape.total_len), np.zeros(shape.total_len), 0, weight_decay)

    def copy(self) -> "OptimizerState":
        return replace(self, first_moment=self.first_moment.copy(), second_moment=self.second_moment.copy())


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_auc: float
    val_auc: float
    train_loss: float
    lr_used: float


@dataclass
class EpochHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def append(self, rec: EpochRecord):
        self.records.append(rec)


def init_model(spec: ModelSpec, seed: int) -> WeightVector:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    d, h = spec.input_dim, spec.hidden_dim
    if h == 0:
        bound = 1.0 / math.sqrt(d)
        parts = [rng.uniform(-bound, bound, d), np.zeros(1)]
    else:
        b1, b2 = 1.0 / math.sqrt(d), 1.0 / math.sqrt(h)
        parts = [rng.uniform(-b1, b1, h * d), np.zeros(h), rng.uniform(-b2, b2, h), np.zeros(1)]
    return WeightVector(np.concatenate(parts), spec.shape)


def _check_width(spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != spec.input_dim:
        raise ShapeMismatch(f"features have width {x.shape[1]}, model expects {spec.input_dim}")
    return x


def forward(weights: WeightVector, features) -> np.ndarray:
    spec = ModelSpec.from_shape(weights.shape)
    x = _check_width(spec, features)
    return kernels.forward_np(weights.values, x, spec.input_dim, spec.hidden_dim)[0]


def hidden_features(weights: WeightVector, features) -> tuple[np.ndarray, bool]:
    """Penultimate activations, or the raw features (flag False) for logistic models."""
    spec = ModelSpec.from_shape(weights.shape)
    x = _check_width(spec, features)
    if spec.hidden_dim == 0:
        return x, False
    return kernels.forward_np(weights.values, x, spec.input_dim, spec.hidden_dim)[1], True


def loss_and_gradient(weights: WeightVector, batch) -> tuple[float, WeightVector]:
    features, labels = batch
    spec = ModelSpec.from_shape(weights.shape)
    x = _check_width(spec, features)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if y.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"{x.shape[0]} rows but {y.shape[0]} labels")
    loss, grad = kernels.loss_grad_np(weights.values, x, y, spec.input_dim, spec.hidden_dim)
    return float(loss), WeightVector(grad, weights.shape)


def adamw_step(weights: WeightVector, grad: WeightVector, state: OptimizerState,
               lr: float) -> tuple[WeightVector, OptimizerState]:
    if grad.shape != weights.shape or state.first_moment.shape != weights.values.shape:
        raise ShapeMismatch("weights, gradient and optimizer state disagree in shape")
    if lr <= 0:
        raise ValueError("lr must be positive")
    new = state.copy()
    w = weights.values.copy()
    new.step_count = kernels.adamw_np(w, grad.values, new.first_moment, new.second_moment, state.step_count,
                                      lr, state.weight_decay, state.beta1, state.beta2, state.epsilon)
    if not np.isfinite(w).all():
        raise NonFinite("AdamW produced a non-finite weight")
    return WeightVector(w, weights.shape), new


def cosine_lr(t: float, T: int, lr0: float, lr_min: float) -> float:
    if T < 1:
        raise RangeError("T must be >= 1")
    if t < 0 or t > T:
        raise RangeError(f"epoch {t} outside [0, {T}]")
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * t / T))


def safe_auc(weights: WeightVector, ds) -> float:
    """AUC of the model on ``ds``; 0.5 when the set holds a single class."""
    try:
        return roc_auc(forward(weights, ds.features), ds.labels)
    except DegenerateLabels:
        return 0.5


class LocalTrainer:
    """Stateful epoch loop for one node.

    Keeps the live weights, AdamW state, the shuffling RNG and the
    early-stopping bookkeeping, so training can be interleaved with merges
    and checkpointed between epochs. ``epoch`` is global and drives the
    cosine schedule over ``cfg.epochs``.
    """

    def __init__(self, shard: NodeShard, weights: WeightVector, cfg: TrainConfig):
        if len(shard.train) == 0:
            raise ValueError("empty training shard")
        self.shard = shard
        self.cfg = cfg
        self.spec = ModelSpec.from_shape(weights.shape)
        _check_width(self.spec, shard.train.features[:1])
        self.shape = weights.shape
        self.w = np.array(weights.values)
        self.opt = OptimizerState.zeros(self.shape, cfg.weight_decay)
        self.rng = np.random.default_rng(cfg.seed)
        self.epoch = 0
        self.history = EpochHistory()
        self.best_weights = weights
        self.best_val_auc = -math.inf
        self._patience_ref = -math.inf
        self._bad_epochs = 0
        self.stopped_early = False
        self._x = np.ascontiguousarray(shard.train.features)
        self._y = shard.train.labels.astype(np.float64)

    @property
    def weights(self) -> WeightVector:
        return WeightVector(self.w, self.shape)

    @property
    def exhausted(self) -> bool:
        return self.stopped_early or self.epoch >= self.cfg.epochs

    def observe(self, weights: WeightVector, val_auc: float) -> None:
        """Feed one validation measurement to best-tracking and patience."""
        if val_auc > self.best_val_auc:
            self.best_val_auc = val_auc
            self.best_weights = weights
        if val_auc > self._patience_ref + IMPROVEMENT_EPS:
            self._patience_ref = val_auc
            self._bad_epochs = 0
        else:
            self._bad_epochs += 1
            if self._bad_epochs >= self.cfg.patience:
                self.stopped_early = True

    def run_epoch(self) -> EpochRecord:
        cfg = self.cfg
        lr = cosine_lr(self.epoch, cfg.epochs, cfg.lr_initial, cfg.lr_min)
        perm = self.rng.permutation(self._y.shape[0])
        o = self.opt
        o.step_count, loss = kernels.run_epoch(
            self._x, self._y, perm, self.w, o.first_moment, o.second_moment, o.step_count, lr,
            o.weight_decay, o.beta1, o.beta2, o.epsilon, cfg.batch_size, self.spec.input_dim,
            self.spec.hidden_dim)
        if not np.isfinite(self.w).all():
            raise NonFinite(f"training diverged at epoch {self.epoch}")
        current = self.weights
        rec = EpochRecord(self.epoch, safe_auc(current, self.shard.train),
                          safe_auc(current, self.shard.validation), loss, lr)
        self.history.append(rec)
        self.epoch += 1
        self.observe(current, rec.val_auc)
        return rec

    def adopt(self, weights: WeightVector) -> float:
        """Replace the live weights (after an accepted merge) and score them."""
        if weights.shape != self.shape:
            raise ShapeMismatch("adopted weights have a different shape")
        self.w = np.array(weights.values)
        val = safe_auc(weights, self.shard.validation)
        self.observe(weights, val)
        return val

    # checkpoint support
    def state_dict(self) -> dict:
        return {
            "weights": self.w.copy(),
            "first_moment": self.opt.first_moment.copy(),
            "second_moment": self.opt.second_moment.copy(),
            "best_weights": self.best_weights.values.copy(),
            "meta": {
                "step_count": self.opt.step_count,
                "epoch": self.epoch,
                "best_val_auc": self.best_val_auc,
                "patience_ref": self._patience_ref,
                "bad_epochs": self._bad_epochs,
                "stopped_early": self.stopped_early,
                "rng_state": self.rng.bit_generator.state,
                "history": [vars(r) for r in self.history],
                "dims": self.shape.to_json(),
            },
        }

    def load_state_dict(self, state: dict) -> None:
        meta = state["meta"]
        if ShapeSpec.from_json(meta["dims"]) != self.shape:
            raise ShapeMismatch("checkpoint is for a different model shape")
        self.w = np.array(state["weights"], dtype=np.float64)
        self.opt.first_moment = np.array(state["first_moment"], dtype=np.float64)
        self.opt.second_moment = np.array(state["second_moment"], dtype=np.float64)
        self.opt.step_count = int(meta["step_count"])
        self.best_weights = WeightVector(state["best_weights"], self.shape)
        self.epoch = int(meta["epoch"])
        self.best_val_auc = float(meta["best_val_auc"])
        self._patience_ref = float(meta["patience_ref"])
        self._bad_epochs = int(meta["bad_epochs"])
        self.stopped_early = bool(meta["stopped_early"])
        self.rng.bit_generator.state = meta["rng_state"]
        self.history = EpochHistory([EpochRecord(**r) for r in meta["history"]])


def train_epochs(shard: NodeShard, weights: WeightVector, cfg: TrainConfig,
                 epoch_budget: int) -> tuple[WeightVector, EpochHistory, bool]:
    """Train up to ``epoch_budget`` epochs; return the best-validation weights."""
    if epoch_budget < 1:
        raise ValueError("epoch_budget must be >= 1")
    trainer = LocalTrainer(shard, weights, cfg)
    for _ in range(epoch_budget):
        if trainer.exhausted:
            break
        trainer.run_epoch()
    return trainer.best_weights, trainer.history, trainer.stopped_early
