"""Readers for the exporter's file formats.

Everything in this module works from files alone: a dataset manifest
(JSON), per-clip F0 contour CSVs, PFT1 tensors with JSON sidecars, and
the patch index CSV written by labeled exports. The layouts are pinned
by the exporter's docs; parsing here is deliberately strict so silent
format drift turns into loud errors.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CENTS_REF_HZ",
    "ClipRecord",
    "PatchRecord",
    "hz_to_cents",
    "read_manifest",
    "read_f0_csv",
    "read_pft1",
    "read_pft1_sidecar",
    "read_export_json",
    "read_export_index",
    "regression_targets",
    "class_names_from_records",
]

# Cents reference used by the dataset exporter; keep in lockstep so the
# regression target f_b^cent means the same thing on both sides.
CENTS_REF_HZ = 25.0

_PFT1_MAGIC = b"PFT1"
_PFT1_FLOAT32 = 0
_F0_HEADER = ["time_s", "f0_hz", "voiced"]
_INDEX_HEADER = ["path", "label", "split", "clip"]
_SPLITS = ("train", "test")


def hz_to_cents(f):
    """Cents above the 25 Hz reference."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f <= 0.0) or not np.all(np.isfinite(f)):
        raise ValueError("frequencies must be finite and positive")
    out = 1200.0 * np.log2(f / CENTS_REF_HZ)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ClipRecord:
    """One manifest entry: contour parameters plus file layout."""

    entry_id: str
    kind: str
    f_b_hz: float
    delta_f_cents: float
    f_m_hz: float
    phi: float
    duration_s: float
    is_reversed: bool
    num_partials: int
    split: str
    wav_path: str
    f0_path: str


@dataclass(frozen=True)
class PatchRecord:
    """One row of a labeled patch export index."""

    path: str
    label: str
    split: str
    clip: str


def read_manifest(path):
    """Parse a dataset manifest.

    ``path`` may be the manifest file or the dataset directory that
    contains ``manifest.json``. Returns ``(records, sample_rate)`` with
    records in file order.
    """
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("format_version") != "1":
        raise ValueError(f"unsupported manifest format: {path}")
    records = []
    for e in doc["entries"]:
        split = e["split"]
        if split not in _SPLITS:
            raise ValueError(f"bad split {split!r} in manifest entry {e['id']!r}")
        records.append(ClipRecord(
            entry_id=e["id"], kind=e["type"], f_b_hz=float(e["f_b_hz"]),
            delta_f_cents=float(e["delta_f_cents"]),
            f_m_hz=float(e["f_m_hz"]), phi=float(e["phi"]),
            duration_s=float(e["duration_s"]),
            is_reversed=bool(e["reversed"]),
            num_partials=int(e["num_partials"]), split=split,
            wav_path=e["wav_path"], f0_path=e["f0_path"]))
    if not records:
        raise ValueError(f"manifest has no entries: {path}")
    return records, int(doc["sample_rate"])


def read_f0_csv(path):
    """Read an F0 contour CSV as ``(f0, voiced)`` float32/bool arrays.

    Accepts both the dataset layout (time_s, f0_hz, voiced) and tracked
    contours carrying a trailing strength column; strength is dropped.
    """
    f0, voiced = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != _F0_HEADER:
            raise ValueError(f"unexpected F0 CSV header in {path}: {header!r}")
        for row in reader:
            if not row:
                continue
            f0.append(float(row[1]))
            voiced.append(int(row[2]) != 0)
    if not f0:
        raise ValueError(f"empty F0 CSV: {path}")
    return np.asarray(f0, dtype=np.float32), np.asarray(voiced, dtype=bool)


def read_pft1(path):
    """Read a PFT1 tensor as a float32 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 6 or blob[:4] != _PFT1_MAGIC:
        raise ValueError(f"not a PFT1 tensor: {path}")
    dtype_code, ndim = struct.unpack_from("<BB", blob, 4)
    if dtype_code != _PFT1_FLOAT32:
        raise ValueError(f"unsupported PFT1 dtype code {dtype_code}: {path}")
    offset = 6 + 4 * ndim
    if ndim < 1 or len(blob) < offset:
        raise ValueError(f"bad PFT1 header: {path}")
    shape = struct.unpack_from(f"<{ndim}I", blob, 6)
    count = int(np.prod(shape, dtype=np.int64))
    if len(blob) != offset + 4 * count:
        raise ValueError(f"PFT1 payload does not match shape {shape}: {path}")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return data.reshape(shape).astype(np.float32, copy=True)


def read_pft1_sidecar(path):
    """JSON sidecar of a PFT1 tensor, or None when absent."""
    sidecar = os.fspath(path) + ".json"
    if not os.path.isfile(sidecar):
        return None
    with open(sidecar, encoding="utf-8") as fh:
        return json.load(fh)


def read_export_json(path):
    """Parse a tensor export index (``export.json``).

    ``path`` may be the file or the export directory. Returns the parsed
    document with each entry's ``tensor`` path resolved to an absolute
    path.
    """
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, "export.json")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != "1" or "entries" not in doc:
        raise ValueError(f"unsupported export index: {path}")
    base = os.path.dirname(os.path.abspath(path))
    for entry in doc["entries"]:
        if not os.path.isabs(entry["tensor"]):
            entry["tensor"] = os.path.join(base, entry["tensor"])
    return doc


def read_export_index(path):
    """Read a labeled patch index (``export_index.csv``) as PatchRecords.

    Relative patch paths resolve against the index file's directory.
    """
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, "export_index.csv")
    base = os.path.dirname(os.path.abspath(path))
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _INDEX_HEADER:
            raise ValueError(f"unexpected index header in {path}: {header!r}")
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"malformed index row: {row!r}")
            rel, label, split, clip = (cell.strip() for cell in row)
            if split not in _SPLITS:
                raise ValueError(f"bad split {split!r} in index row {row!r}")
            full = rel if os.path.isabs(rel) else os.path.join(base, rel)
            records.append(PatchRecord(path=full, label=label, split=split,
                                       clip=clip))
    if not records:
        raise ValueError(f"empty patch index: {path}")
    return records


def regression_targets(record: ClipRecord) -> np.ndarray:
    """Targets (f_b in cents, extent in cents, mod rate in Hz)."""
    return np.array([hz_to_cents(record.f_b_hz), record.delta_f_cents,
                     record.f_m_hz], dtype=np.float64)


def class_names_from_records(records) -> tuple:
    """Sorted contour type names present in a record list."""
    return tuple(sorted({r.kind for r in records}))
