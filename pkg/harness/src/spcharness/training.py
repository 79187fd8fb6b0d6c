"""Multi-task pre-training and single-task fine-tuning loops.

Both entry points consume exported files only (manifest JSON plus F0
CSVs for the 1-D front-end, PFT1 model-input tensors for the 2-D one)
and write a checkpoint directory holding ``checkpoint.pt`` and a
``metrics.json`` shaped like the evaluation runners' summaries: split,
clip count, and a table/metric block, plus the training history, seed,
and schedule.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from spcharness.conformance import accuracy, confidence_aggregate, multitask_loss_torch, macro_f1, mae
from spcharness.data import (class_names_from_records, read_export_index,
                             read_export_json, read_f0_csv, read_manifest,
                             read_pft1, regression_targets)
from spcharness.models import (ModelSpec, MultiHeadNet, build_finetune,
                               build_model, build_vi2d_frontend)

__all__ = [
    "TrainSchedule",
    "PRETRAIN_SCHEDULE",
    "FINETUNE_PT1D_SCHEDULE",
    "FINETUNE_VI2D_SCHEDULE",
    "TABLE_COLUMNS",
    "prepare_out_dir",
    "pretrain_multitask",
    "finetune_single_task",
    "load_checkpoint",
]

TABLE_COLUMNS = ("input", "A", "MAE_fb_cent", "MAE_delta_f", "MAE_fm")
_OPTIMIZERS = ("adam", "sgd")
_EVAL_BATCH = 64
_STD_FLOOR = 1e-8


@dataclass(frozen=True)
class TrainSchedule:
    """Epoch count, learning rate, batch size, optimizer, loss mode."""

    epochs: int
    lr: float
    batch_size: int
    optimizer: str = "adam"
    loss: str = "multi"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not self.lr > 0.0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if self.optimizer not in _OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {_OPTIMIZERS}")
        if self.loss not in ("multi", "single"):
            raise ValueError("loss must be 'multi' or 'single'")


PRETRAIN_SCHEDULE = TrainSchedule(epochs=700, lr=5e-4, batch_size=32)
FINETUNE_PT1D_SCHEDULE = TrainSchedule(epochs=500, lr=1e-5, batch_size=32,
                                       loss="single")
FINETUNE_VI2D_SCHEDULE = TrainSchedule(epochs=250, lr=1e-5, batch_size=32,
                                       loss="single")


def prepare_out_dir(path, force: bool):
    """Create an output directory, refusing a non-empty one without force."""
    if path is None:
        return None
    path = os.fspath(path)
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise ValueError(f"output dir {path!r} is not empty (use force)")
    os.makedirs(path, exist_ok=True)
    return path


def _make_optimizer(schedule: TrainSchedule, params):
    if schedule.optimizer == "adam":
        return torch.optim.Adam(params, lr=schedule.lr)
    return torch.optim.SGD(params, lr=schedule.lr)


def _pad_stack(sequences):
    """Stack 1-D float32 arrays into (N, 1, L), edge-padding short ones."""
    length = max(len(s) for s in sequences)
    out = np.empty((len(sequences), 1, length), dtype=np.float32)
    for i, seq in enumerate(sequences):
        if len(seq) < length:
            seq = np.pad(seq, (0, length - len(seq)), mode="edge")
        out[i, 0] = seq
    return out


def _load_f0_inputs(records, base_dir):
    return _pad_stack([read_f0_csv(os.path.join(base_dir, r.f0_path))[0]
                       for r in records])


def _load_image_inputs(records, tensors_by_id):
    images = []
    for r in records:
        if r.entry_id not in tensors_by_id:
            raise ValueError(f"no exported tensor for entry {r.entry_id!r}")
        arr = read_pft1(tensors_by_id[r.entry_id])
        if arr.shape != (224, 224, 3):
            raise ValueError(
                f"expected model-input tensors of shape (224, 224, 3), "
                f"got {arr.shape} for {r.entry_id!r}; re-export with "
                "model inputs enabled")
        images.append(arr.transpose(2, 0, 1))
    return np.stack(images).astype(np.float32)


def _scalar_stats(values):
    mean = float(np.mean(values))
    std = float(np.std(values))
    return mean, max(std, _STD_FLOOR)


def _column_stats(matrix):
    mean = matrix.mean(axis=0)
    std = np.maximum(matrix.std(axis=0), _STD_FLOOR)
    return mean, std


def _check_finite(loss, epoch, step):
    if not torch.isfinite(loss):
        raise RuntimeError(
            f"training diverged: loss {float(loss.detach())!r} at epoch {epoch}, "
            f"step {step}; lower the learning rate or check the inputs")


def _train_epochs(model, x, y_type, y_reg, schedule, seed, loss_fn):
    """Shuffled mini-batch training; returns per-epoch average losses."""
    rng = np.random.default_rng(seed)
    opt = _make_optimizer(schedule, model.parameters())
    n = x.shape[0]
    history = []
    for epoch in range(schedule.epochs):
        model.train()
        perm = rng.permutation(n)
        total = 0.0
        for step, start in enumerate(range(0, n, schedule.batch_size)):
            idx = perm[start:start + schedule.batch_size]
            loss = loss_fn(model, x[idx], y_type[idx],
                           None if y_reg is None else y_reg[idx])
            _check_finite(loss, epoch, step)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        history.append(total / n)
    return history


def _batched_forward(model, x, fn):
    outs = []
    model.eval()
    with torch.no_grad():
        for start in range(0, x.shape[0], _EVAL_BATCH):
            outs.append(fn(model(x[start:start + _EVAL_BATCH])))
    return [torch.cat(parts) for parts in zip(*outs)] if outs else []


def _write_metrics(out_dir, summary):
    with open(os.path.join(out_dir, "metrics.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def pretrain_multitask(spec: ModelSpec, data_dir, schedule: TrainSchedule,
                       out_dir=None, seed: int = 0, force: bool = False,
                       manifest=None, weights_path=None):
    """Train the four-head network on an exported dataset.

    ``data_dir`` is the dataset directory for F0 input kinds, or a tensor
    export directory (with ``export.json``) for image kinds; in the
    latter case the manifest is found through the export's
    ``source_manifest`` pointer unless ``manifest`` overrides it. Returns
    a summary dict; when ``out_dir`` is given, also writes
    ``checkpoint.pt`` and ``metrics.json`` there.
    """
    if schedule.loss != "multi":
        raise ValueError("pre-training uses the 'multi' loss")
    tensors_by_id = None
    if spec.wants_images:
        export = read_export_json(data_dir)
        if not export.get("model_input"):
            raise ValueError("image pre-training needs a model-input export")
        tensors_by_id = {e["id"]: e["tensor"] for e in export["entries"]}
        records, _ = read_manifest(manifest if manifest is not None
                                   else export["source_manifest"])
        records = [r for r in records if r.entry_id in tensors_by_id]
    else:
        records, _ = read_manifest(manifest if manifest is not None
                                   else data_dir)
    train = [r for r in records if r.split == "train"]
    test = [r for r in records if r.split == "test"]
    if not train or not test:
        raise ValueError("dataset must have non-empty train and test splits")
    class_names = class_names_from_records(records)
    if len(class_names) != spec.num_types:
        raise ValueError(
            f"manifest has {len(class_names)} contour types, spec expects "
            f"{spec.num_types}")
    out_dir = prepare_out_dir(out_dir, force)
    torch.manual_seed(seed)
    model = build_model(spec, weights_path)

    class_index = {name: i for i, name in enumerate(class_names)}
    input_stats = (0.0, 1.0)
    if spec.wants_images:
        x_train = _load_image_inputs(train, tensors_by_id)
        x_test = _load_image_inputs(test, tensors_by_id)
    else:
        x_train = _load_f0_inputs(train, os.fspath(data_dir))
        x_test = _load_f0_inputs(test, os.fspath(data_dir))
        input_stats = _scalar_stats(x_train)
        x_train = (x_train - input_stats[0]) / input_stats[1]
        x_test = (x_test - input_stats[0]) / input_stats[1]
    t_train = np.stack([regression_targets(r) for r in train])
    t_test = np.stack([regression_targets(r) for r in test])
    target_mean, target_std = _column_stats(t_train)

    x_train = torch.from_numpy(x_train)
    x_test = torch.from_numpy(np.ascontiguousarray(x_test))
    y_type_train = torch.tensor([class_index[r.kind] for r in train])
    y_reg_train = torch.from_numpy(
        ((t_train - target_mean) / target_std).astype(np.float32))

    def loss_fn(net, xb, yt, yr):
        out = net(xb)
        probs = torch.softmax(out["type_logits"], dim=1)
        return multitask_loss_torch(probs, yt, out["reg"], yr)

    history = _train_epochs(model, x_train, y_type_train, y_reg_train,
                            schedule, seed, loss_fn)

    logits, reg_norm = _batched_forward(
        model, x_test, lambda out: (out["type_logits"], out["reg"]))
    labels = [class_index[r.kind] for r in test]
    test_loss = float(multitask_loss_torch(
        torch.softmax(logits.double(), dim=1), torch.tensor(labels),
        reg_norm.double(),
        torch.from_numpy((t_test - target_mean) / target_std)))
    reg_pred = reg_norm.numpy().astype(np.float64) * target_std + target_mean
    row = {"input": spec.input_kind,
           "A": accuracy(logits.argmax(dim=1).numpy(), labels),
           "MAE_fb_cent": mae(reg_pred[:, 0], t_test[:, 0]),
           "MAE_delta_f": mae(reg_pred[:, 1], t_test[:, 1]),
           "MAE_fm": mae(reg_pred[:, 2], t_test[:, 2])}
    summary = {"split": "test", "clips": len(test), "table": [row],
               "test_loss": test_loss, "history": history, "seed": seed,
               "schedule": asdict(schedule), "classes": list(class_names)}

    if out_dir is not None:
        torch.save({"format_version": 1, "spec": asdict(spec),
                    "class_names": list(class_names),
                    "input_mean": input_stats[0],
                    "input_std": input_stats[1],
                    "target_mean": target_mean.tolist(),
                    "target_std": target_std.tolist(),
                    "seed": seed, "schedule": asdict(schedule),
                    "state_dict": model.state_dict()},
                   os.path.join(out_dir, "checkpoint.pt"))
        _write_metrics(out_dir, summary)
    return summary


def load_checkpoint(path):
    """Rebuild a pre-trained model; returns (model, checkpoint dict).

    The stored state dict carries the real weights, so image variants are
    instantiated without touching the ImageNet checkpoint file.
    """
    doc = torch.load(os.fspath(path), map_location="cpu",
                     weights_only=False)
    if doc.get("format_version") != 1:
        raise ValueError(f"unsupported checkpoint: {path}")
    spec = ModelSpec(**doc["spec"])
    if spec.variant == "PT1D":
        model = build_model(spec)
    else:
        model = MultiHeadNet(spec, build_vi2d_frontend("random"))
    model.load_state_dict(doc["state_dict"])
    return model, doc


def _patch_input(record, spec: ModelSpec, input_stats):
    if spec.wants_images:
        arr = read_pft1(record.path)
        if arr.shape != (224, 224, 3):
            raise ValueError(
                f"expected model-input tensors of shape (224, 224, 3), "
                f"got {arr.shape} for {record.path!r}")
        return arr.transpose(2, 0, 1).astype(np.float32)
    f0, _ = read_f0_csv(record.path)
    return (f0 - input_stats[0]) / input_stats[1]


def finetune_single_task(checkpoint, export_index, schedule: TrainSchedule,
                         out_dir=None, seed: int = 0, force: bool = False):
    """Fine-tune a pre-trained checkpoint on a labeled patch export.

    A fresh softmax layer over the concatenated head embeddings is
    trained together with all pre-trained parameters under the
    single-task cross entropy. Test patches are aggregated per clip with
    the confidence rule before scoring. Returns a summary dict; when
    ``out_dir`` is given, writes ``checkpoint.pt`` and ``metrics.json``.
    """
    if schedule.loss != "single":
        raise ValueError("fine-tuning uses the 'single' loss")
    base, doc = load_checkpoint(checkpoint)
    spec = ModelSpec(**doc["spec"])
    input_stats = (doc["input_mean"], doc["input_std"])
    patches = read_export_index(export_index)
    train = [p for p in patches if p.split == "train"]
    test = [p for p in patches if p.split == "test"]
    if not train or not test:
        raise ValueError("patch index must have non-empty train and test "
                         "splits")
    class_names = tuple(sorted({p.label for p in train}))
    missing = sorted({p.label for p in test} - set(class_names))
    if missing:
        raise ValueError(f"test labels missing from train: {missing}")
    if len(class_names) < 2:
        raise ValueError("need at least two classes to fine-tune")
    out_dir = prepare_out_dir(out_dir, force)
    torch.manual_seed(seed)
    model = build_finetune(base, len(class_names))

    class_index = {name: i for i, name in enumerate(class_names)}
    if spec.wants_images:
        x_train = np.stack([_patch_input(p, spec, input_stats)
                            for p in train])
        x_test = np.stack([_patch_input(p, spec, input_stats) for p in test])
    else:
        x_train = _pad_stack([_patch_input(p, spec, input_stats)
                              for p in train])
        x_test = _pad_stack([_patch_input(p, spec, input_stats)
                             for p in test])
    x_train = torch.from_numpy(x_train)
    x_test = torch.from_numpy(x_test)
    y_train = torch.tensor([class_index[p.label] for p in train])

    def loss_fn(net, xb, yt, _unused):
        return nn.functional.cross_entropy(net(xb), yt)

    history = _train_epochs(model, x_train, y_train, None, schedule, seed,
                            loss_fn)

    (probs,) = _batched_forward(
        model, x_test, lambda logits: (torch.softmax(logits, dim=1),))
    probs = probs.numpy().astype(np.float64)
    by_clip = {}
    for i, patch in enumerate(test):
        by_clip.setdefault(patch.clip, []).append(i)
    clip_preds, clip_labels = [], []
    for clip, idx in sorted(by_clip.items()):
        labels = {test[i].label for i in idx}
        if len(labels) != 1:
            raise ValueError(f"clip {clip!r} has conflicting labels")
        winner, _ = confidence_aggregate(probs[idx])
        clip_preds.append(winner)
        clip_labels.append(class_index[labels.pop()])
    summary = {"split": "test", "clips": len(clip_preds),
               "accuracy": accuracy(clip_preds, clip_labels),
               "macro_f1": macro_f1(clip_preds, clip_labels,
                                    len(class_names)),
               "classes": list(class_names), "history": history,
               "seed": seed, "schedule": asdict(schedule)}

    if out_dir is not None:
        torch.save({"format_version": 1, "spec": asdict(spec),
                    "task_classes": list(class_names),
                    "input_mean": input_stats[0],
                    "input_std": input_stats[1],
                    "seed": seed, "schedule": asdict(schedule),
                    "state_dict": model.state_dict()},
                   os.path.join(out_dir, "checkpoint.pt"))
        _write_metrics(out_dir, summary)
    return summary
