"""Evaluation metrics and aggregation rules.

All functions are pure. Batch losses are averaged, not summed, so reported
values do not depend on batch size. Argmax ties always go to the lowest
class index.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = [
    "CCE_WEIGHT",
    "REG_WEIGHT",
    "PROB_EPS",
    "validate_probs",
    "accuracy",
    "mae",
    "multitask_loss",
    "macro_f1",
    "confusion_matrix",
    "confidence_aggregate",
    "write_metrics_json",
    "write_confusion_csv",
]

CCE_WEIGHT = 10.0
REG_WEIGHT = 0.1
PROB_EPS = 1e-12
_PROB_SUM_TOL = 1e-6


def validate_probs(probs) -> np.ndarray:
    """Checks a (C,) or (N, C) probability array: C >= 2, non-negative,
    rows summing to 1 within 1e-6. Returns it as float64."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim not in (1, 2) or p.shape[-1] < 2:
        raise ValueError("probabilities must be (C,) or (N, C) with C >= 2")
    if not np.isfinite(p).all() or (p < 0.0).any():
        raise ValueError("probabilities must be finite and non-negative")
    if np.abs(p.sum(axis=-1) - 1.0).max() > _PROB_SUM_TOL:
        raise ValueError("probability rows must sum to 1 within 1e-6")
    return p


def _paired(preds, targets, dtype):
    a = np.asarray(preds, dtype=dtype)
    b = np.asarray(targets, dtype=dtype)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("preds and targets must be 1-D of equal length")
    if a.size == 0:
        raise ValueError("empty input")
    return a, b


def accuracy(preds, labels) -> float:
    """Fraction of exact matches."""
    a, b = _paired(preds, labels, np.int64)
    return float((a == b).mean())


def mae(preds, targets) -> float:
    """Mean absolute error."""
    a, b = _paired(preds, targets, np.float64)
    return float(np.abs(a - b).mean())


def multitask_loss(type_probs, type_labels, reg_preds, reg_targets) -> float:
    """Weighted classification + regression loss.

    Per sample: 10 * (-ln p[label]) + 0.1 * sum of the three absolute
    regression errors (f_b in cents, extent in cents, mod rate in Hz);
    p[label] is clamped at 1e-12 before the log. A batch (2-D probs,
    matching leading dimension everywhere) yields the mean.
    """
    p = validate_probs(type_probs)
    labels = np.atleast_1d(np.asarray(type_labels, dtype=np.int64))
    preds = np.atleast_2d(np.asarray(reg_preds, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(reg_targets, dtype=np.float64))
    p = np.atleast_2d(p)
    n = p.shape[0]
    if labels.shape != (n,) or preds.shape != (n, 3) or targets.shape != (n, 3):
        raise ValueError("batch shapes must be (N, C), (N,), (N, 3), (N, 3)")
    if (labels < 0).any() or (labels >= p.shape[1]).any():
        raise ValueError("type label out of range")
    cce = -np.log(np.maximum(p[np.arange(n), labels], PROB_EPS))
    reg = np.abs(preds - targets).sum(axis=1)
    return float((CCE_WEIGHT * cce + REG_WEIGHT * reg).mean())


def confusion_matrix(preds, labels, num_classes: int) -> np.ndarray:
    """Counts with rows = labels, columns = predictions."""
    a, b = _paired(preds, labels, np.int64)
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    for arr in (a, b):
        if (arr < 0).any() or (arr >= num_classes).any():
            raise ValueError("class index out of range")
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(out, (b, a), 1)
    return out


def macro_f1(preds, labels, num_classes: int) -> float:
    """Mean one-vs-all F1 over classes present in the labels.

    Classes with zero label support are excluded from the mean entirely;
    a supported class never predicted correctly contributes 0.
    """
    counts = confusion_matrix(preds, labels, num_classes)
    support = counts.sum(axis=1)
    keep = support > 0
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = support - tp
    denom = 2.0 * tp + fp + fn
    f1 = np.divide(2.0 * tp, denom, out=np.zeros(num_classes), where=denom > 0)
    return float(f1[keep].mean())


def confidence_aggregate(patch_probs):
    """Confidence-weighted class vote over patch probabilities.

    Each patch k gets weight alpha_k = top-1 minus top-2 probability; the
    pseudo-probability of class c is beta_c = mean over patches of
    alpha_k * p_c^(k). Returns (argmax class, beta). Uniform patches get
    zero weight, so they never change the argmax.
    """
    p = validate_probs(patch_probs)
    p = np.atleast_2d(p)
    top2 = -np.partition(-p, 1, axis=1)[:, :2]
    alpha = top2[:, 0] - top2[:, 1]
    beta = (alpha[:, None] * p).mean(axis=0)
    return int(np.argmax(beta)), beta


def write_metrics_json(path, metrics: dict):
    """Metric report as {name: value} JSON."""
    doc = {}
    for key, value in metrics.items():
        if isinstance(value, (np.floating, np.integer)):
            value = value.item()
        doc[str(key)] = value
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_confusion_csv(path, counts: np.ndarray, class_names):
    """Confusion matrix as CSV; first column is the label name, remaining
    columns are prediction counts."""
    counts = np.asarray(counts)
    names = list(class_names)
    if counts.shape != (len(names), len(names)):
        raise ValueError("counts shape must match class_names")
    lines = ["label," + ",".join(names)]
    for name, row in zip(names, counts):
        lines.append(name + "," + ",".join(str(int(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
