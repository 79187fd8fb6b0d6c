"""Dataset materialization, clip patching, and external-audio ingestion.

Materialization is transactional at the directory level: a ``.partial``
marker is dropped before any file is touched and removed only after the
manifest (the commit marker) has been written, so interrupted runs are
detectable. Because generation is deterministic, reruns compare rendered
bytes against existing files and leave matching ones untouched.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .contours import eval_contour, read_f0_csv, write_f0_csv
from .sampling import Manifest
from .synth import AudioClip, synthesize
from .wavio import read_wav, write_wav

__all__ = [
    "PARTIAL_MARKER",
    "materialize_dataset",
    "patch_clip",
    "LabeledClip",
    "LabeledClipSet",
    "ingest_labeled_clips",
    "load_clip",
]

PARTIAL_MARKER = ".partial"
_SPLITS = ("train", "test")


def _render_entry(entry, sample_rate):
    contour = eval_contour(entry.params)
    clip = synthesize(contour, num_partials=entry.num_partials,
                      sample_rate=sample_rate)
    wav_buf = io.BytesIO()
    write_wav(wav_buf, clip)
    csv_buf = io.StringIO(newline="")
    write_f0_csv(csv_buf, contour)
    return contour, clip, wav_buf.getvalue(), csv_buf.getvalue().encode("utf-8")


def _commit_bytes(path, payload):
    """Write payload unless the file already holds exactly these bytes.
    Returns 'written' or 'unchanged'."""
    if os.path.exists(path):
        with open(path, "rb") as fh:
            if fh.read() == payload:
                return "unchanged"
    with open(path, "wb") as fh:
        fh.write(payload)
    return "written"


def materialize_dataset(manifest: Manifest, out_dir) -> dict:
    """Render every manifest entry to WAV + F0 CSV under ``out_dir``.

    Each written pair is read back and verified against the in-memory
    clip/contour before the run commits. The report counts written vs
    unchanged files and carries a digest over all dataset bytes.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    marker = os.path.join(out_dir, PARTIAL_MARKER)
    with open(marker, "w", encoding="utf-8") as fh:
        fh.write("materialization in progress\n")

    counts = {"written": 0, "unchanged": 0}
    digest = hashlib.sha256()
    for entry in manifest.entries:
        contour, clip, wav_bytes, csv_bytes = _render_entry(
            entry, manifest.sample_rate)
        wav_path = os.path.join(out_dir, entry.wav_path)
        csv_path = os.path.join(out_dir, entry.f0_path)
        os.makedirs(os.path.dirname(wav_path), exist_ok=True)
        os.makedirs(os.path.dirname(csv_path), exist_ok=True)
        counts[_commit_bytes(wav_path, wav_bytes)] += 1
        counts[_commit_bytes(csv_path, csv_bytes)] += 1
        _verify_entry(entry, contour, clip, wav_path, csv_path)
        digest.update(entry.wav_path.encode())
        digest.update(wav_bytes)
        digest.update(entry.f0_path.encode())
        digest.update(csv_bytes)

    manifest_bytes = manifest.to_json().encode("utf-8")
    manifest_path = os.path.join(out_dir, "manifest.json")
    manifest_state = _commit_bytes(manifest_path, manifest_bytes)
    digest.update(manifest_bytes)
    os.remove(marker)
    return {
        "entries": len(manifest.entries),
        "files_written": counts["written"] + (manifest_state == "written"),
        "files_unchanged": counts["unchanged"] + (manifest_state == "unchanged"),
        "manifest": manifest_state,
        "manifest_path": manifest_path,
        "sha256": digest.hexdigest(),
    }


def _verify_entry(entry, contour, clip, wav_path, csv_path):
    stored = read_wav(wav_path)
    expected = clip.samples.astype(np.float32).astype(np.float64)
    if stored.sample_rate != clip.sample_rate or not np.array_equal(
            stored.samples, expected):
        raise RuntimeError(f"WAV round-trip mismatch for {entry.entry_id}")
    rows = read_f0_csv(csv_path)
    if len(rows) != len(contour):
        raise RuntimeError(f"F0 CSV row count mismatch for {entry.entry_id}")


def patch_clip(clip: AudioClip, patch_len: float = 1.0):
    """Split into non-overlapping patches of ``patch_len`` seconds.

    Full patches come first; a tail of at least half a patch is zero-padded
    into one more patch, a shorter tail is dropped. A clip shorter than
    half a patch yields a single zero-padded patch.
    """
    if not (patch_len > 0.0) or not math.isfinite(patch_len):
        raise ValueError("patch_len must be positive and finite")
    size = int(round(patch_len * clip.sample_rate))
    if size < 1:
        raise ValueError("patch_len shorter than one sample")
    total = len(clip)
    full = total // size
    tail = total - full * size
    patches = [AudioClip(sample_rate=clip.sample_rate,
                         samples=clip.samples[i * size:(i + 1) * size])
               for i in range(full)]
    if (tail > 0 and 2 * tail >= size) or full == 0:
        padded = np.zeros(size)
        padded[:tail] = clip.samples[full * size:]
        patches.append(AudioClip(sample_rate=clip.sample_rate, samples=padded))
    return patches


@dataclass(frozen=True)
class LabeledClip:
    path: str
    label: str
    split: str


@dataclass(frozen=True)
class LabeledClipSet:
    """External audio with class labels and train/test splits.

    ``skipped`` lists unreadable files, ``resampled`` the readable files
    whose native rate differs from ``sample_rate`` (they are resampled by
    ``load_clip``).
    """

    clips: tuple
    class_names: tuple
    patch_len: float = 1.0
    sample_rate: int = 48000
    skipped: tuple = field(default_factory=tuple)
    resampled: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.clips:
            raise ValueError("clip set is empty")
        if not (self.patch_len > 0.0):
            raise ValueError("patch_len must be positive")
        names = set(self.class_names)
        if len(names) != len(self.class_names) or len(names) < 1:
            raise ValueError("class_names must be unique and non-empty")
        for clip in self.clips:
            if clip.label not in names:
                raise ValueError(f"label {clip.label!r} not in class_names")
            if clip.split not in _SPLITS:
                raise ValueError(f"split must be one of {_SPLITS}")

    def split_clips(self, split: str):
        return [c for c in self.clips if c.split == split]


def load_clip(path, sample_rate: int = 48000) -> AudioClip:
    """Read a WAV and resample to ``sample_rate`` (polyphase) if needed."""
    clip = read_wav(path)
    if clip.sample_rate == sample_rate:
        return clip
    g = math.gcd(sample_rate, clip.sample_rate)
    samples = scipy.signal.resample_poly(clip.samples, sample_rate // g,
                                         clip.sample_rate // g)
    return AudioClip(sample_rate=sample_rate, samples=samples)


def _ingest_index(index_path, sample_rate):
    base = os.path.dirname(os.path.abspath(index_path))
    rows = []
    with open(index_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "label", "split"]:
            raise ValueError("index header must be exactly path,label,split")
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"malformed index row: {row!r}")
            path, label, split = (cell.strip() for cell in row)
            if split not in _SPLITS:
                raise ValueError(f"split must be one of {_SPLITS}: {row!r}")
            if not os.path.isabs(path):
                path = os.path.join(base, path)
            rows.append(LabeledClip(path=path, label=label, split=split))
    return rows


def _ingest_tree(root):
    """Directory-per-class layout; every clip lands in the test split."""
    rows = []
    for name in sorted(os.listdir(root)):
        class_dir = os.path.join(root, name)
        if not os.path.isdir(class_dir):
            continue
        for fname in sorted(os.listdir(class_dir)):
            if fname.lower().endswith(".wav"):
                rows.append(LabeledClip(path=os.path.join(class_dir, fname),
                                        label=name, split="test"))
    return rows


def ingest_labeled_clips(source, patch_len: float = 1.0,
                         sample_rate: int = 48000) -> LabeledClipSet:
    """Build a LabeledClipSet from an index CSV (columns path,label,split)
    or a directory-per-class tree. Unreadable audio is skipped, not fatal."""
    source = os.fspath(source)
    if os.path.isdir(source):
        rows = _ingest_tree(source)
    elif os.path.isfile(source):
        rows = _ingest_index(source, sample_rate)
    else:
        raise ValueError(f"no such index file or directory: {source}")

    kept, skipped, resampled = [], [], []
    for row in rows:
        try:
            clip = read_wav(row.path)
        except (OSError, ValueError):
            skipped.append(row.path)
            continue
        if clip.sample_rate != sample_rate:
            resampled.append(row.path)
        kept.append(row)
    if not kept:
        raise ValueError("no readable clips in the set")
    class_names = tuple(sorted({row.label for row in kept}))
    return LabeledClipSet(clips=tuple(kept), class_names=class_names,
                          patch_len=patch_len, sample_rate=sample_rate,
                          skipped=tuple(skipped), resampled=tuple(resampled))
