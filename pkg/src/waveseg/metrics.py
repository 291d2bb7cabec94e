"""Segmentation metrics: overall accuracy and mean intersection-over-union.

The mIoU mean runs over classes present in the ground truth; classes absent
from the ground truth (including those absent from both prediction and truth)
are excluded and reported as NaN in the per-class list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .raster import LabelMap


@dataclass
class MetricsReport:
    oa: float
    per_class_iou: list
    miou: float
    confusion: np.ndarray

    def csv_row(self, split):
        cells = [split, f"{self.oa:.6f}", f"{self.miou:.6f}"]
        cells += [f"{iou:.6f}" if np.isfinite(iou) else "nan" for iou in self.per_class_iou]
        return ",".join(cells)


def csv_header(n_classes):
    return ",".join(["split", "oa", "miou"] + [f"iou_{c}" for c in range(n_classes)])


def confusion_matrix(predicted, truth, n_classes) -> np.ndarray:
    """Counts[i, j] = pixels with truth i predicted as j."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ContractError(
            f"prediction extents {predicted.shape} do not match truth {truth.shape}"
        )
    flat = truth.reshape(-1) * n_classes + predicted.reshape(-1)
    counts = np.bincount(flat, minlength=n_classes * n_classes)
    return counts.reshape(n_classes, n_classes)


def metrics_from_confusion(confusion: np.ndarray) -> MetricsReport:
    n_classes = confusion.shape[0]
    total = confusion.sum()
    oa = float(np.trace(confusion)) / float(total) if total else 0.0
    ious = []
    included = []
    for c in range(n_classes):
        tp = confusion[c, c]
        fn = confusion[c, :].sum() - tp
        fp = confusion[:, c].sum() - tp
        present_in_truth = confusion[c, :].sum() > 0
        if not present_in_truth:
            ious.append(float("nan"))
            continue
        iou = float(tp) / float(tp + fp + fn)
        ious.append(iou)
        included.append(iou)
    miou = float(np.mean(included)) if included else 0.0
    return MetricsReport(oa=oa, per_class_iou=ious, miou=miou, confusion=confusion)


def score_pairs(pairs, n_classes) -> MetricsReport:
    """Pooled metrics over (prediction, truth) LabelMap or array pairs."""
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for pred, truth in pairs:
        pred = pred.labels if isinstance(pred, LabelMap) else pred
        truth = truth.labels if isinstance(truth, LabelMap) else truth
        confusion += confusion_matrix(pred, truth, n_classes)
    return metrics_from_confusion(confusion)


def evaluate(model, data) -> MetricsReport:
    """Run the model over (raster, labels) pairs and pool the confusion."""
    if not data:
        raise ContractError("evaluate needs a non-empty dataset")
    pairs = [(model.predict(raster), labels) for raster, labels in data]
    return score_pairs(pairs, model.config.n_classes)
