"""Shared fixtures: toy datasets and exports built through the spc CLI.

The harness consumes exported files only, so every fixture materializes
real exports by invoking the exporter as a subprocess; nothing below
imports the exporter package.
"""

import csv
import math
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]

FRAME_RATE = 1000
DURATION_S = 1.0


def run_spc(*args):
    proc = subprocess.run([sys.executable, "-m", "spckit.cli", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, f"spc {' '.join(args)} failed:\n" \
                                 f"{proc.stdout}\n{proc.stderr}"
    return proc.stdout


@pytest.fixture(scope="session")
def vectors_path():
    path = REPO_ROOT / "conformance" / "evalkit_vectors.json"
    assert path.is_file(), f"shared vectors file missing: {path}"
    return path


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """350-clip dataset (50 per type) for the toy pre-training run."""
    root = tmp_path_factory.mktemp("toy_spc")
    run_spc("generate", "--seed", "21", "--clips-per-type", "50",
            "--out", str(root))
    return root


@pytest.fixture(scope="session")
def micro_dataset(tmp_path_factory):
    """14-clip dataset (2 per type) for cheap pipeline checks."""
    root = tmp_path_factory.mktemp("micro_spc")
    run_spc("generate", "--seed", "22", "--clips-per-type", "2",
            "--out", str(root))
    return root


@pytest.fixture(scope="session")
def image_export(micro_dataset, tmp_path_factory):
    """Model-input CQT tensors for every micro dataset clip."""
    out = tmp_path_factory.mktemp("cqt_export")
    run_spc("export", "--manifest", str(micro_dataset), "--repr", "cqt",
            "--model-input", "--split", "both", "--out", str(out),
            "--force")
    return out


def _write_contour_csv(path, base_hz, extent_cents, mod_hz):
    """F0 CSV in the dataset layout; extent is the +/- excursion."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "f0_hz", "voiced"])
        for i in range(int(FRAME_RATE * DURATION_S)):
            t = i / FRAME_RATE
            f0 = base_hz * 2.0 ** (
                (extent_cents / 1200.0) * math.sin(2.0 * math.pi * mod_hz * t))
            writer.writerow([f"{t:.6f}", f"{f0:.4f}", 1])


@pytest.fixture(scope="session")
def labeled_export(tmp_path_factory):
    """Two-class patch export: steady tones vs wobbling tones.

    16 clips per class (12 train / 4 test), tracked to per-patch F0 CSVs
    by the exporter. Separable by construction.
    """
    work = tmp_path_factory.mktemp("labeled_clips")
    out = tmp_path_factory.mktemp("labeled_export")
    rows = []
    for label, extent in (("steady", 0.0), ("warble", 150.0)):
        for i in range(16):
            base = 220.0 * 2.0 ** (i * 0.08)
            contour = work / f"{label}_{i:02d}.csv"
            wav = work / f"{label}_{i:02d}.wav"
            _write_contour_csv(contour, base, extent, 6.0)
            run_spc("synth", str(contour), "--out", str(wav),
                    "--num-partials", "4")
            rows.append((str(wav), label, "train" if i < 12 else "test"))
    index = work / "index.csv"
    with open(index, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label", "split"])
        writer.writerows(rows)
    run_spc("export", "--index", str(index), "--repr", "pitch",
            "--patch-len", "1.0", "--out", str(out), "--force")
    return out


@pytest.fixture(scope="session")
def pretrained(toy_dataset, tmp_path_factory):
    """30-epoch toy pre-training run; shared by the training tests."""
    from spcharness import ModelSpec, TrainSchedule, pretrain_multitask

    out = tmp_path_factory.mktemp("pretrain_toy")
    schedule = TrainSchedule(epochs=30, lr=5e-4, batch_size=32)
    summary = pretrain_multitask(ModelSpec("PT1D", "oracle_f0"),
                                 toy_dataset, schedule, out_dir=out,
                                 seed=7, force=True)
    return summary, out
