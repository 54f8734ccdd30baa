import numpy as np
import pytest

from oracles import loop_confusion, pair_count_auc
from swarmlearn.errors import CoincidentCentroids, DegenerateClusters, DegenerateLabels
from swarmlearn.metrics import (ConfusionCounts, classification_report, confusion_at_threshold, davies_bouldin,
                                report_from_counts, roc_auc)


def test_auc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0


def test_auc_matches_pair_counting(rng):
    s = rng.integers(0, 10, 50) / 10.0
    y = rng.integers(0, 2, 50)
    assert abs(roc_auc(s, y) - pair_count_auc(s, y)) < 1e-12


def test_auc_invariant_under_monotone_transform(rng):
    s, y = rng.normal(size=80), rng.integers(0, 2, 80)
    assert roc_auc(np.exp(3 * s) + 7, y) == roc_auc(s, y)


def test_label_flip_complements(rng):
    s, y = rng.normal(size=60), rng.integers(0, 2, 60)
    assert abs(roc_auc(s, 1 - y) - (1 - roc_auc(s, y))) < 1e-12


def test_auc_needs_both_classes():
    with pytest.raises(DegenerateLabels):
        roc_auc([0.1, 0.2], [1, 1])


def test_confusion_examples():
    assert confusion_at_threshold([0.6, 0.4], [1, 0], 0.5) == ConfusionCounts(1, 0, 1, 0)
    c = confusion_at_threshold([0.1, 0.0, 0.9], [0, 1, 1], 0.0)
    assert c.tp + c.fp == 3


def test_confusion_matches_loop(rng):
    s, y = rng.random(20), rng.integers(0, 2, 20)
    c = confusion_at_threshold(s, y, 0.45)
    assert (c.tp, c.fp, c.tn, c.fn) == loop_confusion(s, y, 0.45)


def test_report_perfect():
    r = classification_report([0.9, 0.8, 0.1], [1, 1, 0])
    assert (r.auc, r.sensitivity, r.specificity, r.precision, r.recall, r.f1) == (1.0,) * 6


def test_report_hand_arithmetic():
    r = report_from_counts(ConfusionCounts(tp=3, fp=1, tn=4, fn=2), auc=0.7)
    assert r.sensitivity == pytest.approx(0.6, abs=1e-15)
    assert r.specificity == pytest.approx(0.8, abs=1e-15)
    assert r.precision == pytest.approx(0.75, abs=1e-15)
    assert r.f1 == pytest.approx(2 / 3, abs=1e-15)


def test_zero_over_zero_is_zero():
    r = classification_report([0.1, 0.2, 0.3], [1, 0, 1], tau=0.9)
    assert r.precision == 0.0 and r.f1 == 0.0 and r.sensitivity == 0.0


def test_davies_bouldin_examples():
    assert davies_bouldin([[0, 0], [100, 100]], [0, 1]) == 0.0
    pts = [[0, 0], [0, 2], [10, 0], [10, 2]]
    assert davies_bouldin(pts, [0, 0, 1, 1]) == pytest.approx(0.2, abs=1e-15)


def test_davies_bouldin_translation_invariant(rng):
    pts, lab = rng.normal(size=(30, 3)), np.repeat([0, 1, 2], 10)
    pts[lab == 1] += 5
    pts[lab == 2] -= 5
    assert davies_bouldin(pts + 123.0, lab) == pytest.approx(davies_bouldin(pts, lab), rel=1e-9)


def test_davies_bouldin_errors():
    with pytest.raises(DegenerateClusters):
        davies_bouldin([[0, 0], [1, 1]], [0, 0])
    with pytest.raises(CoincidentCentroids):
        davies_bouldin([[0, 0], [2, 2], [1, 1], [1, 1]], [0, 0, 1, 1])
