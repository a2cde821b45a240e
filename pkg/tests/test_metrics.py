"""Classification metrics against hand counts and a pairwise AUC oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segfuse.metrics import auc, compute_metrics

from .reference import pair_count_auc


def test_auc_worked_example():
    assert auc([0.9, 0.2, 0.8, 0.1], [1, 1, 0, 0]) == pytest.approx(0.75)


def test_auc_degenerate_scores():
    labels = [0, 1, 0, 1, 1]
    assert auc([0.4] * 5, labels) == pytest.approx(0.5)
    assert auc([0.1, 0.9, 0.2, 0.8, 0.7], labels) == pytest.approx(1.0)
    assert auc([0.9, 0.1, 0.8, 0.2, 0.3], labels) == pytest.approx(0.0)


def test_auc_single_class_is_undefined():
    with pytest.raises(ValueError, match="single class"):
        auc([0.1, 0.9], [1, 1])
    with pytest.raises(ValueError):
        auc([0.1, 0.9], [0, 0])


def test_auc_matches_pair_count_oracle_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(2, 60))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        # quantized scores force ties
        scores = np.round(rng.random(n), 1)
        assert auc(scores, labels) == pytest.approx(
            pair_count_auc(scores, labels), abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 5)),
                min_size=2, max_size=40))
@settings(max_examples=60, deadline=None)
def test_auc_rank_vs_pairs_property(pairs):
    labels = [p[0] for p in pairs]
    scores = [p[1] / 5.0 for p in pairs]
    if min(labels) == max(labels):
        labels[0] = 1 - labels[0]
    assert auc(scores, labels) == pytest.approx(pair_count_auc(scores, labels),
                                                abs=1e-12)


def test_report_confusion_counts():
    r = compute_metrics([0.9, 0.2, 0.8], [1, 1, 1])
    assert (r.tp, r.fp, r.tn, r.fn) == (2, 0, 0, 1)
    assert r.accuracy == pytest.approx(2 / 3)
    assert r.precision == pytest.approx(1.0)
    assert r.recall == pytest.approx(2 / 3)
    assert r.specificity is None  # no negatives present
    assert r.auc is None  # single class
    assert r.f1 == pytest.approx(2 * 1.0 * (2 / 3) / (1.0 + 2 / 3))


def test_report_balanced_case():
    probs = [0.9, 0.8, 0.3, 0.6, 0.2, 0.1]
    labels = [1, 1, 1, 0, 0, 0]
    r = compute_metrics(probs, labels)
    assert (r.tp, r.fp, r.tn, r.fn) == (2, 1, 2, 1)
    assert r.accuracy == pytest.approx(4 / 6)
    assert r.precision == pytest.approx(2 / 3)
    assert r.recall == pytest.approx(2 / 3)
    assert r.specificity == pytest.approx(2 / 3)
    assert r.auc == pytest.approx(pair_count_auc(probs, labels))


def test_report_none_propagation():
    # no positive predictions: precision undefined, f1 undefined
    r = compute_metrics([0.1, 0.2], [1, 0])
    assert r.precision is None
    assert r.f1 is None
    assert r.recall == 0.0


def test_threshold_is_half_inclusive():
    r = compute_metrics([0.5], [1])
    assert r.tp == 1


def test_to_dict_key_order_and_values():
    r = compute_metrics([0.9, 0.1], [1, 0])
    d = r.to_dict()
    assert list(d) == ["accuracy", "precision", "recall", "f1", "auc",
                       "specificity", "tp", "fp", "tn", "fn"]
    assert d["accuracy"] == 1.0 and d["tp"] == 1 and d["tn"] == 1


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        compute_metrics([0.5, 0.5], [1])
    with pytest.raises(ValueError):
        auc([0.5], [1, 0])
