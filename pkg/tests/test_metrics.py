import math

import numpy as np
import pytest

from fallwatch.errors import DegenerateInputError, InvalidInputError
from fallwatch.metrics import (
    ConfusionMatrix,
    auc,
    confusion,
    percent,
    report,
    roc,
)

PAPER_CM = ConfusionMatrix(tn=1083, fp=48, fn=35, tp=732)


def pairwise_auc(labels, scores):
    """O(n^2) oracle: P(score_pos > score_neg) + 0.5 * P(equal)."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = ties = 0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1
            elif p == n:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def vector_for_counts(cm, seed=0):
    labels = np.array([0] * (cm.tn + cm.fp) + [1] * (cm.fn + cm.tp))
    preds = np.array([0] * cm.tn + [1] * cm.fp + [0] * cm.fn + [1] * cm.tp)
    order = np.random.default_rng(seed).permutation(labels.size)
    return labels[order], preds[order]


class TestConfusion:
    def test_perfect_predictions(self):
        cm = confusion([0, 1, 0, 1], [0, 1, 0, 1])
        assert (cm.tn, cm.fp, cm.fn, cm.tp) == (2, 0, 0, 2)

    def test_all_false_positive(self):
        cm = confusion([0, 0], [1, 1])
        assert (cm.tn, cm.fp, cm.fn, cm.tp) == (0, 2, 0, 0)

    def test_reconstructs_published_counts(self):
        labels, preds = vector_for_counts(PAPER_CM, seed=42)
        cm = confusion(labels, preds)
        assert cm == PAPER_CM

    def test_counts_sum_to_length(self, rng):
        labels = rng.integers(0, 2, 500)
        preds = rng.integers(0, 2, 500)
        assert confusion(labels, preds).total == 500

    def test_order_invariant(self, rng):
        labels, preds = vector_for_counts(ConfusionMatrix(10, 5, 3, 7), seed=1)
        base = report(confusion(labels, preds))
        perm = rng.permutation(labels.size)
        again = report(confusion(labels[perm], preds[perm]))
        assert base == again

    def test_mismatched_or_non_binary_rejected(self):
        with pytest.raises(InvalidInputError):
            confusion([0, 1], [0])
        with pytest.raises(InvalidInputError):
            confusion([0, 2], [0, 1])
        with pytest.raises(InvalidInputError):
            confusion([], [])


class TestReport:
    def test_reproduces_published_report(self):
        rep = report(PAPER_CM)
        assert rep.class0.precision == pytest.approx(0.9687, abs=5e-5)
        assert rep.class0.recall == pytest.approx(0.9576, abs=5e-5)
        assert rep.class0.f1 == pytest.approx(0.9631, abs=5e-5)
        assert rep.class1.precision == pytest.approx(0.9385, abs=5e-5)
        assert rep.class1.recall == pytest.approx(0.9544, abs=5e-5)
        assert rep.class1.f1 == pytest.approx(0.9464, abs=5e-5)
        assert (percent(rep.class0.precision), percent(rep.class0.recall), percent(rep.class0.f1)) == (97, 96, 96)
        assert (percent(rep.class1.precision), percent(rep.class1.recall), percent(rep.class1.f1)) == (94, 95, 95)
        assert percent(rep.specificity) == 96
        assert abs(rep.accuracy * 100 - 95.63) <= 0.01

    def test_all_correct(self):
        rep = report(ConfusionMatrix(10, 0, 0, 10))
        assert rep.class0.precision == rep.class1.recall == rep.accuracy == 1.0
        assert rep.class0.f1 == rep.class1.f1 == 1.0

    def test_degenerate_positive_class(self):
        rep = report(ConfusionMatrix(10, 0, 10, 0))
        assert rep.class1.precision == 0.0
        assert rep.class1.recall == 0.0
        assert rep.class1.degenerate
        assert not rep.class0.degenerate

    def test_f1_is_harmonic_mean(self):
        rep = report(ConfusionMatrix(50, 10, 5, 35))
        for cls in (rep.class0, rep.class1):
            expected = 2 * cls.precision * cls.recall / (cls.precision + cls.recall)
            assert cls.f1 == pytest.approx(expected, abs=1e-12)

    def test_specificity_is_class0_recall_and_sensitivity_class1(self):
        rep = report(ConfusionMatrix(50, 10, 5, 35))
        assert rep.specificity == rep.class0.recall
        assert rep.sensitivity == rep.class1.recall

    def test_table_and_dict_render(self):
        rep = report(PAPER_CM)
        table = rep.format_table()
        assert "94%" in table and "97%" in table
        d = rep.to_dict()
        assert d["confusion"] == {"tn": 1083, "fp": 48, "fn": 35, "tp": 732}

    def test_empty_matrix_rejected(self):
        with pytest.raises(InvalidInputError):
            report(ConfusionMatrix(0, 0, 0, 0))


class TestPercentRounding:
    def test_half_rounds_up(self):
        assert percent(0.955) == 96
        assert percent(0.9549) == 95
        assert percent(0.945) == 95
        assert percent(1.0) == 100


class TestRoc:
    def test_hand_enumerated_points(self):
        points = roc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
        coords = [(p.fpr, p.tpr) for p in points]
        assert coords == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        assert points[0].threshold == math.inf

    def test_perfect_separation_passes_through_corner(self):
        points = roc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])
        assert (0.0, 1.0) in [(p.fpr, p.tpr) for p in points]
        assert auc(points) == 1.0

    def test_all_equal_scores_is_the_diagonal(self):
        points = roc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5])
        assert [(p.fpr, p.tpr) for p in points] == [(0.0, 0.0), (1.0, 1.0)]
        assert auc(points) == 0.5

    def test_monotone_and_bounded(self, rng):
        labels = rng.integers(0, 2, 300)
        labels[:5] = [0, 1, 0, 1, 0]  # both classes guaranteed
        scores = rng.random(300).round(2)  # force ties
        points = roc(labels, scores)
        fprs = [p.fpr for p in points]
        tprs = [p.tpr for p in points]
        assert fprs == sorted(fprs)
        assert tprs == sorted(tprs)
        assert points[-1].fpr == 1.0 and points[-1].tpr == 1.0
        assert 0.0 <= auc(points) <= 1.0

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateInputError):
            roc([1, 1, 1], [0.1, 0.2, 0.3])

    def test_non_finite_scores_rejected(self):
        with pytest.raises(InvalidInputError):
            roc([0, 1], [0.1, float("nan")])


class TestAuc:
    def test_matches_pairwise_statistic_on_seeded_sets(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(10, 200))
            labels = rng.integers(0, 2, n)
            labels[0], labels[1] = 0, 1
            scores = rng.random(n).round(1)  # heavy ties
            trapezoid = auc(roc(labels, scores))
            assert trapezoid == pytest.approx(pairwise_auc(labels, scores), abs=1e-9)

    def test_invariant_under_increasing_transform(self, rng):
        labels = rng.integers(0, 2, 150)
        labels[0], labels[1] = 0, 1
        scores = rng.normal(size=150)
        base = auc(roc(labels, scores))
        assert auc(roc(labels, np.exp(scores))) == pytest.approx(base, abs=1e-12)
        assert auc(roc(labels, 3.0 * scores + 11.0)) == pytest.approx(base, abs=1e-12)
