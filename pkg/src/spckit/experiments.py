"""Desk-scale experiment drivers: tracker accuracy curves, fitter
classification/regression tables, and confidence-weighted clip
classification over labeled audio.

All three runners are deterministic given their inputs and never overwrite
a non-empty output directory unless forced. Report schemas:

- tracker_eval: rpa_curve.csv (f_b_hz, type, rpa, rpa_smooth) + summary JSON
- fitter_eval: fitter_table.csv with columns exactly
  (input, A, MAE_fb_cent, MAE_delta_f, MAE_fm) + confusion CSVs + summary
- clip_classify: predictions.csv + summary JSON
"""

from __future__ import annotations

import csv
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .contours import ContourType, eval_contour, hz_to_cents
from .datasetio import LabeledClipSet, load_clip, patch_clip
from .fitter import classify_contour
from .metrics import (
    accuracy,
    confidence_aggregate,
    confusion_matrix,
    macro_f1,
    write_confusion_csv,
    write_metrics_json,
)
from .sampling import CLASS_ORDER, Manifest
from .tracker import TrackerConfig, rpa, track_pitch
from .wavio import read_wav

__all__ = [
    "ExperimentSpec",
    "SMOOTH_WINDOW",
    "prepare_out_dir",
    "run_tracker_eval",
    "run_fitter_eval",
    "run_clip_classify",
]

SMOOTH_WINDOW = 75
FITTER_TABLE_COLUMNS = ("input", "A", "MAE_fb_cent", "MAE_delta_f", "MAE_fm")


@dataclass(frozen=True)
class ExperimentSpec:
    """Bundles one experiment invocation for the CLI."""

    name: str
    pipeline: str
    out_dir: str
    force: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pipeline not in ("tracker_eval", "fitter_eval",
                                 "clip_classify"):
            raise ValueError(f"unknown pipeline {self.pipeline!r}")


def prepare_out_dir(out_dir, force):
    if out_dir is None:
        return None
    out_dir = os.fspath(out_dir)
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
        raise ValueError(
            f"output dir {out_dir!r} is not empty (use force to overwrite)")
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def smooth_hann(values, window: int = SMOOTH_WINDOW):
    """Centered Hann-weighted moving average with edge renormalization."""
    values = np.asarray(values, dtype=np.float64)
    if window < 3 or values.size < window:
        raise ValueError("need at least `window` points")
    w = np.hanning(window)
    num = np.convolve(values, w, mode="same")
    den = np.convolve(np.ones_like(values), w, mode="same")
    return num / den


def _split_entries(manifest, split):
    entries = manifest.split_entries(split)
    if not entries:
        raise ValueError(f"manifest has no {split!r} entries")
    return entries


def _track_entries(dataset_dir, entries, config, tracked):
    """Tracked contour per entry, honoring a precomputed cache."""
    out = {}
    for entry in entries:
        if tracked is not None and entry.entry_id in tracked:
            out[entry.entry_id] = tracked[entry.entry_id]
        else:
            clip = read_wav(os.path.join(dataset_dir, entry.wav_path))
            out[entry.entry_id] = track_pitch(clip, config)
    return out


def run_tracker_eval(dataset_dir, config: TrackerConfig = TrackerConfig(),
                     split: str = "test", out_dir=None, force: bool = False,
                     tracked: dict | None = None) -> dict:
    """RPA50 per clip against ground truth, with per-type curves over base
    frequency smoothed by a 75-point Hann moving average."""
    dataset_dir = os.fspath(dataset_dir)
    out_dir = prepare_out_dir(out_dir, force)
    manifest = Manifest.load(os.path.join(dataset_dir, "manifest.json"))
    entries = _split_entries(manifest, split)
    started = time.monotonic()
    contours = _track_entries(dataset_dir, entries, config, tracked)
    rows = []
    for entry in entries:
        truth = eval_contour(entry.params)
        rows.append({
            "id": entry.entry_id,
            "type": entry.params.kind.value,
            "f_b_hz": entry.params.base_hz,
            "f_m_hz": entry.params.mod_hz,
            "rpa": rpa(contours[entry.entry_id], truth),
        })
    runtime = time.monotonic() - started

    curve = []
    per_type = {}
    for kind in CLASS_ORDER:
        subset = sorted((r for r in rows if r["type"] == kind.value),
                        key=lambda r: r["f_b_hz"])
        if not subset:
            warnings.warn(f"no {kind.value} clips in split {split!r}")
            continue
        values = np.array([r["rpa"] for r in subset])
        if len(subset) >= SMOOTH_WINDOW:
            smooth = smooth_hann(values)
        else:
            warnings.warn(
                f"{kind.value}: {len(subset)} clips < {SMOOTH_WINDOW}, "
                "curve left unsmoothed")
            smooth = values
        for row, s in zip(subset, smooth):
            curve.append((row["f_b_hz"], row["type"], row["rpa"], float(s)))
        per_type[kind.value] = {"clips": len(subset),
                                "mean_rpa": float(values.mean())}

    summary = {
        "split": split,
        "clips": len(rows),
        "mean_rpa": float(np.mean([r["rpa"] for r in rows])),
        "per_type": per_type,
        "runtime_s": runtime,
        "rows": rows,
    }
    if out_dir is not None:
        with open(os.path.join(out_dir, "rpa_curve.csv"), "w",
                  newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["f_b_hz", "type", "rpa", "rpa_smooth"])
            for f_b, kind, raw, smooth in curve:
                writer.writerow([f"{f_b:.6f}", kind, f"{raw:.6f}",
                                 f"{smooth:.6f}"])
        write_metrics_json(os.path.join(out_dir, "tracker_summary.json"),
                           {k: v for k, v in summary.items() if k != "rows"})
    return summary


def _fit_rows(entries, contours_by_id):
    kinds = list(ContourType)
    preds, labels = [], []
    fb_err, df_err, fm_err = [], [], []
    fits = {}
    for entry in entries:
        fit = classify_contour(contours_by_id[entry.entry_id])
        fits[entry.entry_id] = fit
        preds.append(kinds.index(fit.kind))
        labels.append(kinds.index(entry.params.kind))
        fb_err.append(abs(hz_to_cents(fit.params.base_hz)
                          - hz_to_cents(entry.params.base_hz)))
        df_err.append(abs(fit.params.extent_cents
                          - entry.params.extent_cents))
        fm_err.append(abs(fit.params.mod_hz - entry.params.mod_hz))
    table_row = {
        "input": None,
        "A": accuracy(preds, labels),
        "MAE_fb_cent": float(np.mean(fb_err)),
        "MAE_delta_f": float(np.mean(df_err)),
        "MAE_fm": float(np.mean(fm_err)),
    }
    return table_row, preds, labels, fits


def run_fitter_eval(dataset_dir, split: str = "test",
                    include_tracked: bool = True,
                    config: TrackerConfig = TrackerConfig(),
                    out_dir=None, force: bool = False,
                    tracked: dict | None = None) -> dict:
    """Type accuracy and parameter MAEs on oracle contours and, optionally,
    tracker-extracted contours; emits one fixed-schema table row per input
    kind."""
    dataset_dir = os.fspath(dataset_dir)
    out_dir = prepare_out_dir(out_dir, force)
    manifest = Manifest.load(os.path.join(dataset_dir, "manifest.json"))
    entries = _split_entries(manifest, split)

    table = []
    confusions = {}
    oracle = {e.entry_id: eval_contour(e.params) for e in entries}
    row, preds, labels, _ = _fit_rows(entries, oracle)
    row["input"] = "oracle"
    table.append(row)
    confusions["oracle"] = confusion_matrix(preds, labels, len(ContourType))

    if include_tracked:
        contours = _track_entries(dataset_dir, entries, config, tracked)
        as_pitch = {k: v.to_pitch_contour() for k, v in contours.items()}
        row, preds, labels, _ = _fit_rows(entries, as_pitch)
        row["input"] = "tracked"
        table.append(row)
        confusions["tracked"] = confusion_matrix(preds, labels,
                                                 len(ContourType))

    summary = {"split": split, "clips": len(entries), "table": table}
    if out_dir is not None:
        with open(os.path.join(out_dir, "fitter_table.csv"), "w",
                  newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(FITTER_TABLE_COLUMNS)
            for row in table:
                writer.writerow([row["input"]] +
                                [f"{row[c]:.6f}" for c in
                                 FITTER_TABLE_COLUMNS[1:]])
        names = [k.value for k in ContourType]
        for input_kind, counts in confusions.items():
            write_confusion_csv(
                os.path.join(out_dir, f"confusion_{input_kind}.csv"),
                counts, names)
        write_metrics_json(os.path.join(out_dir, "fitter_summary.json"),
                           {"split": split, "clips": len(entries),
                            **{f"{r['input']}_{c}": r[c] for r in table
                               for c in FITTER_TABLE_COLUMNS[1:]}})
    return summary


def _patch_descriptor(patch, config):
    """Fit-derived feature vector for one audio patch, or None when the
    patch has too few voiced frames to fit."""
    tracked = track_pitch(patch, config)
    try:
        fit = classify_contour(tracked.to_pitch_contour())
    except ValueError:
        return None
    kinds = list(ContourType)
    onehot = np.zeros(len(kinds))
    onehot[kinds.index(fit.kind)] = 1.0
    return np.concatenate([
        onehot,
        [hz_to_cents(fit.params.base_hz),
         fit.params.extent_cents,
         fit.params.mod_hz,
         fit.residual_cents,
         float(tracked.strength.mean()),
         float(tracked.strength.std())],
    ])


def _clip_descriptors(clip_set, clips, config):
    per_clip = []
    for item in clips:
        audio = load_clip(item.path, clip_set.sample_rate)
        rows = []
        for patch in patch_clip(audio, clip_set.patch_len):
            desc = _patch_descriptor(patch, config)
            if desc is not None:
                rows.append(desc)
        per_clip.append((item, rows))
    return per_clip


def run_clip_classify(clip_set: LabeledClipSet,
                      backend: str = "fitter_features",
                      config: TrackerConfig = TrackerConfig(),
                      out_dir=None, force: bool = False) -> dict:
    """Nearest-centroid classification of labeled clips from fit-derived
    patch descriptors, aggregated with confidence weighting."""
    if backend != "fitter_features":
        raise ValueError(f"unknown backend {backend!r}")
    out_dir = prepare_out_dir(out_dir, force)
    train = clip_set.split_clips("train")
    test = clip_set.split_clips("test")
    if not train or not test:
        raise ValueError("need non-empty train and test splits")
    names = list(clip_set.class_names)
    train_labels = {c.label for c in train}
    missing = {c.label for c in test} - train_labels
    if missing:
        raise ValueError(f"test classes missing from train: {sorted(missing)}")

    rows_by_class = {name: [] for name in names}
    for item, rows in _clip_descriptors(clip_set, train, config):
        rows_by_class[item.label].extend(rows)
    unfit = [n for n in names if not rows_by_class[n]]
    if unfit:
        raise ValueError(f"no usable train patches for classes: {unfit}")
    stacked = np.vstack([r for rows in rows_by_class.values() for r in rows])
    mu = stacked.mean(axis=0)
    sigma = stacked.std(axis=0)
    sigma[sigma < 1e-12] = 1.0
    centroids = np.empty((len(names), stacked.shape[1]))
    for c, name in enumerate(names):
        z = (np.vstack(rows_by_class[name]) - mu) / sigma
        centroids[c] = z.mean(axis=0)

    predictions, skipped = [], []
    for item, rows in _clip_descriptors(clip_set, test, config):
        if not rows:
            skipped.append(item.path)
            continue
        z = (np.vstack(rows) - mu) / sigma
        dists = np.linalg.norm(z[:, None, :] - centroids[None, :, :], axis=2)
        logits = -dists
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        winner, _ = confidence_aggregate(probs)
        predictions.append((item, names[winner]))

    if not predictions:
        raise ValueError("every test clip was skipped")
    y_true = [names.index(item.label) for item, _ in predictions]
    y_pred = [names.index(pred) for _, pred in predictions]
    summary = {
        "backend": backend,
        "classes": names,
        "test_clips": len(predictions),
        "skipped": skipped,
        "accuracy": accuracy(y_pred, y_true),
        "macro_f1": macro_f1(y_pred, y_true, len(names)),
    }
    if out_dir is not None:
        with open(os.path.join(out_dir, "predictions.csv"), "w",
                  newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "label", "predicted"])
            for item, pred in predictions:
                writer.writerow([item.path, item.label, pred])
        write_confusion_csv(
            os.path.join(out_dir, "confusion.csv"),
            confusion_matrix(y_pred, y_true, len(names)), names)
        write_metrics_json(os.path.join(out_dir, "classify_summary.json"),
                           {k: v for k, v in summary.items()
                            if k not in ("skipped",)})
    return summary
