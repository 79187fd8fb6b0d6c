"""Loss and aggregation rules shared with the evaluation toolkit.

These re-implementations must agree with the reference implementation on
the shared vectors file (``conformance/evalkit_vectors.json`` at the
repository root): the multi-task loss to 1e-6 and the patch-confidence
aggregation to 1e-9. The torch loss below is the one the training loop
optimizes, so the conformance check covers the production code path.
"""

from __future__ import annotations

import json

import numpy as np
import torch

__all__ = [
    "CCE_WEIGHT",
    "REG_WEIGHT",
    "PROB_EPS",
    "multitask_loss",
    "multitask_loss_torch",
    "confidence_aggregate",
    "accuracy",
    "mae",
    "macro_f1",
    "load_conformance_vectors",
]

CCE_WEIGHT = 10.0
REG_WEIGHT = 0.1
PROB_EPS = 1e-12
_PROB_SUM_TOL = 1e-6


def _checked_probs(probs) -> np.ndarray:
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if p.ndim != 2 or p.shape[1] < 2:
        raise ValueError("probabilities must be (C,) or (N, C) with C >= 2")
    if not np.isfinite(p).all() or (p < 0.0).any():
        raise ValueError("probabilities must be finite and non-negative")
    if np.abs(p.sum(axis=1) - 1.0).max() > _PROB_SUM_TOL:
        raise ValueError("probability rows must sum to 1 within 1e-6")
    return p


def multitask_loss(type_probs, type_labels, reg_preds, reg_targets) -> float:
    """Weighted classification + regression loss, batch mean.

    Per sample: 10 * (-ln p[label]) + 0.1 * sum of the three absolute
    regression errors, with p[label] clamped at 1e-12.
    """
    p = _checked_probs(type_probs)
    labels = np.atleast_1d(np.asarray(type_labels, dtype=np.int64))
    preds = np.atleast_2d(np.asarray(reg_preds, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(reg_targets, dtype=np.float64))
    n = p.shape[0]
    if labels.shape != (n,) or preds.shape != (n, 3) or targets.shape != (n, 3):
        raise ValueError("batch shapes must be (N, C), (N,), (N, 3), (N, 3)")
    if (labels < 0).any() or (labels >= p.shape[1]).any():
        raise ValueError("type label out of range")
    cce = -np.log(np.maximum(p[np.arange(n), labels], PROB_EPS))
    reg = np.abs(preds - targets).sum(axis=1)
    return float((CCE_WEIGHT * cce + REG_WEIGHT * reg).mean())


def multitask_loss_torch(type_probs, type_labels, reg_preds, reg_targets):
    """The multi-task loss on torch tensors; used directly in training.

    Same formula as ``multitask_loss``; differentiable through both the
    probabilities and the regression outputs.
    """
    probs = type_probs.gather(1, type_labels.view(-1, 1)).squeeze(1)
    cce = -torch.log(probs.clamp_min(PROB_EPS))
    reg = (reg_preds - reg_targets).abs().sum(dim=1)
    return (CCE_WEIGHT * cce + REG_WEIGHT * reg).mean()


def confidence_aggregate(patch_probs):
    """Confidence-weighted class vote over patch probabilities.

    Patch weights are top-1 minus top-2 probability; the aggregate
    pseudo-probability is the patch mean of weight * p. Returns
    (argmax class, beta); ties go to the lowest class index.
    """
    p = _checked_probs(patch_probs)
    top2 = -np.partition(-p, 1, axis=1)[:, :2]
    alpha = top2[:, 0] - top2[:, 1]
    beta = (alpha[:, None] * p).mean(axis=0)
    return int(np.argmax(beta)), beta


def accuracy(preds, labels) -> float:
    """Fraction of exact matches."""
    a = np.asarray(preds, dtype=np.int64)
    b = np.asarray(labels, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("preds and labels must be 1-D of equal length")
    return float((a == b).mean())


def mae(preds, targets) -> float:
    """Mean absolute error."""
    a = np.asarray(preds, dtype=np.float64)
    b = np.asarray(targets, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("preds and targets must be 1-D of equal length")
    return float(np.abs(a - b).mean())


def macro_f1(preds, labels, num_classes: int) -> float:
    """Mean one-vs-all F1 over classes with nonzero label support."""
    a = np.asarray(preds, dtype=np.int64)
    b = np.asarray(labels, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("preds and labels must be 1-D of equal length")
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    if min(a.min(), b.min()) < 0 or max(a.max(), b.max()) >= num_classes:
        raise ValueError("class index out of range")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (b, a), 1)
    support = counts.sum(axis=1)
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = support - tp
    denom = 2.0 * tp + fp + fn
    f1 = np.divide(2.0 * tp, denom, out=np.zeros(num_classes),
                   where=denom > 0)
    return float(f1[support > 0].mean())


def load_conformance_vectors(path) -> dict:
    """Load the shared vectors file and check its format tag."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != "1":
        raise ValueError(f"unsupported vectors file: {path}")
    return doc
