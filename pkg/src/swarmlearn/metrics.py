"""Binary classification metrics and the Davies-Bouldin cluster index."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import CoincidentCentroids, DegenerateClusters, DegenerateLabels


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    sensitivity: float
    specificity: float
    precision: float
    recall: float
    f1: float
    gap: float = 0.0

    def to_dict(self):
        return asdict(self)


def _ratio(num, den) -> float:
    return num / den if den > 0 else 0.0


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC from average ranks; tied scores count one half."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores for {y.size} labels")
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("AUC needs at least one positive and one negative label")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # average 1-based rank for each run of tied scores
    boundaries = np.flatnonzero(np.diff(sorted_s)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [s.size]))
    avg_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(s.size)
    ranks[order] = np.repeat(avg_rank, ends - starts)
    rank_sum = ranks[y == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion_at_threshold(scores, labels, tau: float = 0.5) -> ConfusionCounts:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores for {y.size} labels")
    pred = s >= tau
    truth = y == 1
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred & truth)),
        fp=int(np.count_nonzero(pred & ~truth)),
        tn=int(np.count_nonzero(~pred & ~truth)),
        fn=int(np.count_nonzero(~pred & truth)),
    )


def report_from_counts(c: ConfusionCounts, auc: float, gap: float = 0.0) -> MetricsReport:
    sens = _ratio(c.tp, c.tp + c.fn)
    spec = _ratio(c.tn, c.tn + c.fp)
    prec = _ratio(c.tp, c.tp + c.fp)
    f1 = _ratio(2 * prec * sens, prec + sens)
    return MetricsReport(auc, sens, spec, prec, sens, f1, gap)


def classification_report(scores, labels, tau: float = 0.5, gap: float = 0.0) -> MetricsReport:
    """Threshold metrics at ``tau`` plus AUC. Any 0/0 ratio is reported as 0."""
    return report_from_counts(confusion_at_threshold(scores, labels, tau), roc_auc(scores, labels), gap)


def davies_bouldin(points, labels) -> float:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    lab = np.asarray(labels).reshape(-1)
    clusters = np.unique(lab)
    if clusters.size < 2:
        raise DegenerateClusters(f"need at least 2 clusters, got {clusters.size}")
    centroids = np.array([x[lab == c].mean(axis=0) for c in clusters])
    scatter = np.array([
        np.linalg.norm(x[lab == c] - centroids[i], axis=1).mean() for i, c in enumerate(clusters)
    ])
    dist = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    if (dist == 0).any():
        raise CoincidentCentroids("two clusters share a centroid")
    ratios = (scatter[:, None] + scatter[None, :]) / dist
    return float(ratios.max(axis=1).mean())
