"""Accuracy assessment: confusion matrix, OA, AA and Cohen's kappa."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .core import GroundTruth, TrainingSet
from .errors import DataError

__all__ = ["MetricsReport", "confusion_matrix", "compute_metrics", "metrics_from_confusion"]


@dataclass(frozen=True)
class MetricsReport:
    oa: float
    aa: float
    kappa: float
    per_class_accuracy: tuple[float, ...]
    n_eval: int
    n_unclassified: int = 0
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_class_accuracy"] = [None if np.isnan(v) else v for v in self.per_class_accuracy]
        d["flags"] = list(self.flags)
        return d


def confusion_matrix(true: np.ndarray, pred: np.ndarray, num_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class (both 1-based).

    Predictions outside 1..num_classes (e.g. unclassified 0) are not counted
    in any column.
    """
    true = np.asarray(true).ravel()
    pred = np.asarray(pred).ravel()
    ok = (pred >= 1) & (pred <= num_classes)
    M = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(M, (true[ok] - 1, pred[ok] - 1), 1)
    return M


def metrics_from_confusion(M: np.ndarray, n_total: int | None = None) -> MetricsReport:
    """OA, AA and kappa from a confusion matrix.

    ``n_total`` may exceed ``M.sum()`` when some evaluated pixels received no
    class; those count as errors.
    """
    M = np.asarray(M, dtype=np.int64)
    n = int(M.sum()) if n_total is None else int(n_total)
    if n <= 0:
        raise DataError("no pixels to evaluate")
    rows = M.sum(1)
    cols = M.sum(0)
    diag = np.diag(M)
    oa = float(diag.sum() / n)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(rows > 0, diag / np.maximum(rows, 1), np.nan)
    aa = float(np.nanmean(per_class)) if (rows > 0).any() else float("nan")
    pe = float((rows.astype(float) * cols).sum() / (float(n) * n))
    flags = []
    if np.isclose(pe, 1.0, rtol=0, atol=1e-15):
        kappa = 1.0 if oa == 1.0 else 0.0
        flags.append("kappa-degenerate")
        warnings.warn("chance agreement is 1; kappa defined by convention", RuntimeWarning)
    else:
        kappa = (oa - pe) / (1.0 - pe)
    return MetricsReport(oa, aa, float(kappa), tuple(float(v) for v in per_class), n,
                         n - int(M.sum()), tuple(flags))


def compute_metrics(pred: np.ndarray, gt: GroundTruth, train: TrainingSet | None = None,
                    include_train: bool = False) -> MetricsReport:
    """Evaluate a per-pixel class map over labeled, non-training pixels."""
    pred = np.asarray(pred)
    if pred.shape != gt.labels.shape:
        raise DataError(f"prediction shape {pred.shape} does not match ground truth {gt.labels.shape}")
    mask = gt.labels > 0
    if train is not None and not include_train:
        mask &= ~train.mask()
    true = gt.labels[mask]
    p = pred[mask]
    M = confusion_matrix(true, p, gt.num_classes)
    return metrics_from_confusion(M, n_total=int(mask.sum()))
