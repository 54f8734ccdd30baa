"""Synthetic datasets, stratified splits and per-node partitioning."""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InsufficientData, InvalidFraction, LabelError, ParseError


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    seed: int | None = None
    # row ids in the dataset this one was cut from; used to prove disjointness
    indices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels).astype(np.int8)
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError(f"features must be N x D with D >= 1, got {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.isfinite(x).all():
            raise ValueError("features contain NaN or Inf")
        if y.size and not np.isin(y, (0, 1)).all():
            raise LabelError("labels must be 0 or 1")
        idx = np.arange(x.shape[0]) if self.indices is None else np.asarray(self.indices, dtype=np.int64)
        for arr in (x, y, idx):
            arr.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.features, other.features) and np.array_equal(self.labels, other.labels)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.seed, self.indices[rows])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()

    @staticmethod
    def concat(parts: Sequence["Dataset"]) -> "Dataset":
        return Dataset(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            parts[0].seed,
            np.concatenate([p.indices for p in parts]),
        )


@dataclass(frozen=True)
class PartitionPlan:
    fractions: tuple[float, ...]
    class_bias: tuple[float, ...] | None = None
    seed: int = 0
    val_frac: float = 0.125

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if not fr:
            raise InvalidFraction("no node fractions")
        if any(not (0.0 < f <= 1.0) for f in fr):
            raise InvalidFraction(f"node fractions must lie in (0, 1]: {fr}")
        if sum(fr) > 1.0 + 1e-9:
            raise InvalidFraction(f"node fractions sum to {sum(fr):.6f} > 1")
        object.__setattr__(self, "fractions", fr)
        if self.class_bias is not None:
            cb = tuple(float(b) for b in self.class_bias)
            if len(cb) != len(fr) or any(not (0.0 <= b <= 1.0) for b in cb):
                raise InvalidFraction("class_bias needs one value in [0, 1] per node")
            object.__setattr__(self, "class_bias", cb)
        if not (0.0 < self.val_frac < 1.0):
            raise InvalidFraction("val_frac must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class NodeShard:
    train: Dataset
    validation: Dataset
    node_id: int

    @property
    def sample_count(self) -> int:
        return len(self.train)


def synth_dataset(n: int, d: int, class_sep: float, positive_frac: float, seed: int) -> Dataset:
    """Two-class Gaussian mixture with class means at +-class_sep/2 on every axis."""
    if not (0.0 < positive_frac < 1.0):
        raise InvalidFraction(f"positive_frac must lie in (0, 1), got {positive_frac}")
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    n_pos = round_half_up(n * positive_frac)
    labels = np.zeros(n, dtype=np.int8)
    labels[:n_pos] = 1
    rng.shuffle(labels)
    signs = np.where(labels == 1, 0.5, -0.5)[:, None]
    features = rng.standard_normal((n, d)) + signs * class_sep
    return Dataset(features, labels, seed)


def _stratified_counts(sizes: Sequence[int], n_pos: int, n_total: int) -> list[int]:
    """Allocate positives to groups proportionally, by largest remainder."""
    quotas = [s * n_pos / n_total for s in sizes]
    counts = [min(int(math.floor(q)), s) for q, s in zip(quotas, sizes)]
    remaining = min(n_pos, sum(sizes)) - sum(counts)
    order = sorted(range(len(sizes)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order:
        if remaining <= 0:
            break
        if counts[k] < sizes[k]:
            counts[k] += 1
            remaining -= 1
    return counts


def _stratified_cut(ds: Dataset, sizes: Sequence[int], rng) -> list[np.ndarray]:
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == 0)
    rng.shuffle(pos)
    rng.shuffle(neg)
    pos_counts = _stratified_counts(sizes, pos.size, len(ds))
    out, p0, n0 = [], 0, 0
    for size, npos in zip(sizes, pos_counts):
        nneg = size - npos
        rows = np.concatenate([pos[p0:p0 + npos], neg[n0:n0 + nneg]])
        rows.sort()
        out.append(rows)
        p0 += npos
        n0 += nneg
    return out


def split(ds: Dataset, train_frac: float, val_frac: float, seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified train/validation/test split; the remainder is the test set."""
    if not (0.0 < train_frac < 1.0) or not (0.0 <= val_frac < 1.0) or train_frac + val_frac >= 1.0:
        raise InvalidFraction(f"bad split fractions train={train_frac} val={val_frac}")
    n = len(ds)
    n_train = round_half_up(n * train_frac)
    n_val = round_half_up(n * val_frac)
    n_test = n - n_train - n_val
    if n_train < 1 or n_test < 1:
        raise InvalidFraction("split leaves an empty train or test set")
    rng = np.random.default_rng(seed)
    parts = _stratified_cut(ds, [n_train, n_val, n_test], rng)
    return tuple(ds.take(rows) for rows in parts)


def partition(ds: Dataset, plan: PartitionPlan) -> list[NodeShard]:
    """Cut disjoint per-node shards, each split into train and validation.

    Without ``class_bias`` each node gets the global positive rate; with it,
    node k's positive count is ``round(bias_k * count_k)``. Leftover rows are
    dropped, never reused.
    """
    n = len(ds)
    counts = [round_half_up(f * n) for f in plan.fractions]
    for k, c in enumerate(counts):
        if c < 2:
            raise InsufficientData(f"node {k} would receive {c} samples")
    if sum(counts) > n:
        raise InsufficientData(f"plan needs {sum(counts)} rows, dataset has {n}")

    rng = np.random.default_rng(plan.seed)
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == 0)
    rng.shuffle(pos)
    rng.shuffle(neg)
    if plan.class_bias is None:
        pos_counts = _stratified_counts(counts, pos.size, n)
    else:
        pos_counts = [round_half_up(b * c) for b, c in zip(plan.class_bias, counts)]

    shards, p0, n0 = [], 0, 0
    for k, (count, npos) in enumerate(zip(counts, pos_counts)):
        nneg = count - npos
        if p0 + npos > pos.size or n0 + nneg > neg.size:
            raise InsufficientData(f"class pools exhausted at node {k}")
        rows = np.sort(np.concatenate([pos[p0:p0 + npos], neg[n0:n0 + nneg]]))
        p0 += npos
        n0 += nneg
        node_ds = ds.take(rows)
        n_val = max(1, round_half_up(count * plan.val_frac))
        if count - n_val < 1:
            raise InsufficientData(f"node {k} has no training rows")
        train_rows, val_rows = _stratified_cut(node_ds, [count - n_val, n_val], rng)
        shards.append(NodeShard(node_ds.take(train_rows), node_ds.take(val_rows), k))
    return shards


def union_shards(shards: Sequence[NodeShard]) -> NodeShard:
    """Pool every shard into one, for the centralized baseline."""
    return NodeShard(
        Dataset.concat([s.train for s in shards]),
        Dataset.concat([s.validation for s in shards]),
        -1,
    )


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path) -> Dataset:
    """Read a CSV whose last column is a 0/1 label. A non-numeric first row is a header."""
    rows_x, rows_y = [], []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not all(_is_number(c) for c in row):
                continue
            if len(row) < 2:
                raise ParseError("need at least one feature column and a label", lineno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"expected {width} columns, found {len(row)}", lineno)
            try:
                vals = [float(c) for c in row[:-1]]
            except ValueError as exc:
                raise ParseError(f"non-numeric feature ({exc})", lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite feature value", lineno)
            label = row[-1].strip()
            try:
                y = float(label)
            except ValueError:
                raise LabelError(f"label {label!r} is not 0 or 1", lineno) from None
            if y not in (0.0, 1.0):
                raise LabelError(f"label {label!r} is not 0 or 1", lineno)
            rows_x.append(vals)
            rows_y.append(int(y))
    if not rows_x:
        raise ParseError(f"{path}: no data rows", None)
    return Dataset(np.array(rows_x, dtype=np.float64), np.array(rows_y, dtype=np.int8))


def write_csv(ds: Dataset, path, header: bool = True) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"x{i}" for i in range(ds.dim)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([f"{v:.17g}" for v in x] + [int(y)])
