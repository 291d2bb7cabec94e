"""Metric computation against brute-force recounts."""

import numpy as np
import pytest

from waveseg.errors import ContractError
from waveseg.metrics import (
    confusion_matrix,
    csv_header,
    metrics_from_confusion,
    score_pairs,
)


def brute_force_metrics(pred, truth, n_classes):
    """Independent per-pixel recount used as the oracle."""
    confusion = [[0] * n_classes for _ in range(n_classes)]
    for t_val, p_val in zip(truth.reshape(-1).tolist(), pred.reshape(-1).tolist()):
        confusion[t_val][p_val] += 1
    total = pred.size
    correct = sum(confusion[c][c] for c in range(n_classes))
    oa = correct / total
    ious = []
    for c in range(n_classes):
        truth_count = sum(confusion[c])
        if truth_count == 0:
            continue  # absent from ground truth: excluded from the mean
        tp = confusion[c][c]
        fp = sum(confusion[r][c] for r in range(n_classes)) - tp
        fn = truth_count - tp
        ious.append(tp / (tp + fp + fn))
    return oa, (sum(ious) / len(ious) if ious else 0.0)


class TestHandExample:
    def test_two_class_four_pixel(self):
        truth = np.array([[0, 0, 1, 1]])
        pred = np.array([[0, 1, 1, 1]])
        report = metrics_from_confusion(confusion_matrix(pred, truth, 2))
        assert report.oa == pytest.approx(0.75)
        assert report.per_class_iou[0] == pytest.approx(1 / 2)
        assert report.per_class_iou[1] == pytest.approx(2 / 3)
        assert report.miou == pytest.approx(7 / 12)

    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        truth = rng.integers(0, 4, size=(8, 8))
        report = metrics_from_confusion(confusion_matrix(truth, truth, 4))
        assert report.oa == 1.0
        assert report.miou == 1.0

    def test_absent_class_excluded_without_nan(self):
        truth = np.zeros((4, 4), dtype=int)
        pred = np.zeros((4, 4), dtype=int)
        report = metrics_from_confusion(confusion_matrix(pred, truth, 3))
        assert report.miou == 1.0
        assert np.isnan(report.per_class_iou[1])
        assert np.isnan(report.per_class_iou[2])
        assert np.isfinite(report.miou)


class TestAgainstBruteForce:
    @pytest.mark.parametrize("trial", range(10))
    def test_random_pairs(self, trial):
        rng = np.random.default_rng(100 + trial)
        n_classes = int(rng.integers(2, 7))
        h = int(rng.integers(1, 65))
        w = int(rng.integers(1, 65))
        # Bias the label distribution so some classes go missing.
        truth = rng.integers(0, n_classes, size=(h, w))
        pred = np.where(
            rng.uniform(size=(h, w)) < 0.6, truth, rng.integers(0, n_classes, (h, w))
        )
        report = metrics_from_confusion(confusion_matrix(pred, truth, n_classes))
        oa, miou = brute_force_metrics(pred, truth, n_classes)
        assert report.oa == pytest.approx(oa, abs=1e-12)
        assert report.miou == pytest.approx(miou, abs=1e-12)

    def test_confusion_row_sums_are_class_counts(self):
        rng = np.random.default_rng(200)
        truth = rng.integers(0, 5, size=(16, 16))
        pred = rng.integers(0, 5, size=(16, 16))
        confusion = confusion_matrix(pred, truth, 5)
        np.testing.assert_array_equal(
            confusion.sum(axis=1), np.bincount(truth.ravel(), minlength=5)
        )
        np.testing.assert_array_equal(
            confusion.sum(axis=0), np.bincount(pred.ravel(), minlength=5)
        )


class TestPlumbing:
    def test_extent_mismatch(self):
        with pytest.raises(ContractError):
            confusion_matrix(np.zeros((2, 2), int), np.zeros((3, 2), int), 2)

    def test_pooled_pairs(self):
        rng = np.random.default_rng(300)
        pairs = [
            (rng.integers(0, 3, (4, 4)), rng.integers(0, 3, (4, 4)))
            for _ in range(3)
        ]
        report = score_pairs(pairs, 3)
        total = sum(confusion_matrix(p, t, 3) for p, t in pairs)
        np.testing.assert_array_equal(report.confusion, total)

    def test_csv_shapes(self):
        header = csv_header(3)
        assert header == "split,oa,miou,iou_0,iou_1,iou_2"
        truth = np.array([[0, 1]])
        report = metrics_from_confusion(confusion_matrix(truth, truth, 3))
        row = report.csv_row("test")
        assert row.startswith("test,1.000000,1.000000,")
        assert row.endswith("nan")
