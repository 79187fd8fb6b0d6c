"""End-to-end command line tests, exercising exit codes and file outputs."""

import csv
import json
import os

import numpy as np
import pytest

from spckit.cli import main
from spckit.contours import ContourParams, ContourType, eval_contour, write_f0_csv
from spckit.tensorio import read_sidecar, read_tensor
from spckit.wavio import read_wav


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("clids") / "ds"
    code = main(["generate", "--seed", "11", "--clips-per-type", "2",
                 "--out", str(root)])
    assert code == 0
    return root


@pytest.fixture(scope="module")
def vibrato_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("clifiles")
    params = ContourParams(kind=ContourType.VIBRATO, base_hz=440.0,
                           extent_cents=200.0, mod_hz=6.0, phase=0.0)
    f0_path = root / "vib.csv"
    write_f0_csv(f0_path, eval_contour(params))
    wav_path = root / "vib.wav"
    assert main(["synth", str(f0_path), "--out", str(wav_path)]) == 0
    return f0_path, wav_path


def test_generate_dataset(dataset, capsys):
    assert (dataset / "manifest.json").exists()
    wavs = list((dataset / "wav").glob("*.wav"))
    csvs = list((dataset / "f0").glob("*.csv"))
    assert len(wavs) == 14 and len(csvs) == 14


def test_generate_conflict_requires_force(dataset):
    assert main(["generate", "--seed", "12", "--clips-per-type", "2",
                 "--out", str(dataset)]) == 2
    assert main(["generate", "--seed", "11", "--clips-per-type", "2",
                 "--out", str(dataset)]) == 0


def test_synth_output(vibrato_files):
    _, wav_path = vibrato_files
    clip = read_wav(wav_path)
    assert clip.sample_rate == 48000
    assert len(clip.samples) == 48000


def test_track_then_classify(vibrato_files, tmp_path, capsys):
    _, wav_path = vibrato_files
    tracked_csv = tmp_path / "tracked.csv"
    assert main(["track", str(wav_path), "--out", str(tracked_csv)]) == 0
    with open(tracked_csv, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time_s", "f0_hz", "voiced", "strength"]
    assert len(rows) == 1 + 1000

    assert main(["classify", str(tracked_csv)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc[0]["predicted_type"] == "vibrato"
    assert doc[0]["f_b_hz"] == pytest.approx(440.0, rel=0.01)
    assert set(doc[0]) == {"id", "predicted_type", "f_b_hz", "f_b_cent",
                           "delta_f_cents", "f_m_hz", "phi", "reversed",
                           "residual_cents"}


def test_classify_oracle_csv_and_csv_format(vibrato_files, tmp_path):
    f0_path, _ = vibrato_files
    out = tmp_path / "report.csv"
    assert main(["classify", str(f0_path), "--format", "csv",
                 "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["predicted_type"] == "vibrato"
    assert float(rows[0]["f_m_hz"]) == pytest.approx(6.0, abs=0.05)


def test_classify_missing_file_is_io_error(tmp_path):
    assert main(["classify", str(tmp_path / "nope.csv")]) == 1


def test_features_roundtrip(vibrato_files, tmp_path):
    _, wav_path = vibrato_files
    out = tmp_path / "img.pft1"
    assert main(["features", str(wav_path), "--repr", "stft",
                 "--out", str(out)]) == 0
    tensor = read_tensor(out)
    assert tensor.ndim == 2 and tensor.dtype == np.float32
    sidecar = read_sidecar(out)
    assert sidecar["kind"] == "stft"
    assert len(sidecar["bin_freqs"]) == tensor.shape[0]

    mi_out = tmp_path / "img_mi.pft1"
    assert main(["features", str(wav_path), "--repr", "cqt", "--model-input",
                 "--out", str(mi_out)]) == 0
    mi = read_tensor(mi_out)
    assert mi.shape == (224, 224, 3)
    assert mi.min() >= -1.0 and mi.max() <= 1.0


def test_features_pitch_from_csv(vibrato_files, tmp_path):
    f0_path, _ = vibrato_files
    out = tmp_path / "pitch.pft1"
    assert main(["features", str(f0_path), "--repr", "pitch",
                 "--out", str(out)]) == 0
    tensor = read_tensor(out)
    assert set(np.unique(tensor)) <= {0.0, 1.0}
    # Spectral reprs need audio input.
    assert main(["features", str(f0_path), "--repr", "stft",
                 "--out", str(tmp_path / "x.pft1")]) == 2


def test_eval_pipeline_and_force(dataset, tmp_path, capsys):
    out = tmp_path / "exp"
    with pytest.warns(UserWarning):
        code = main(["eval", "--pipeline", "tracker_eval",
                     "--manifest", str(dataset), "--out", str(out)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["clips"] == 7
    assert (out / "rpa_curve.csv").exists()
    assert main(["eval", "--pipeline", "tracker_eval",
                 "--manifest", str(dataset), "--out", str(out)]) == 2
    assert main(["eval", "--pipeline", "clip_classify",
                 "--out", str(tmp_path / "c")]) == 2


def test_export_manifest_mode(dataset, tmp_path, capsys):
    out = tmp_path / "exp"
    code = main(["export", "--manifest", str(dataset), "--repr", "pitch",
                 "--split", "test", "--out", str(out)])
    assert code == 0
    with open(out / "export.json") as fh:
        doc = json.load(fh)
    assert doc["repr"] == "pitch"
    assert len(doc["entries"]) == 7
    for rec in doc["entries"]:
        assert rec["split"] == "test"
        tensor = read_tensor(out / rec["tensor"])
        assert tensor.shape[1] == 1000


def test_export_labeled_mode(dataset, tmp_path):
    # Class-per-directory layout built from two dataset WAVs.
    src = tmp_path / "library"
    for entry_id in ("stable_0000", "vibrato_0000"):
        label_dir = src / entry_id.split("_")[0]
        os.makedirs(label_dir, exist_ok=True)
        with open(dataset / "wav" / f"{entry_id}.wav", "rb") as fh:
            (label_dir / f"{entry_id}.wav").write_bytes(fh.read())
    out = tmp_path / "exp"
    assert main(["export", "--index", str(src), "--repr", "mel",
                 "--model-input", "--out", str(out)]) == 0
    with open(out / "export_index.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["path", "label", "split", "clip"]
    assert len(rows) == 1 + 2
    tensor = read_tensor(out / rows[1][0])
    assert tensor.shape == (224, 224, 3)


def test_export_needs_one_source(tmp_path):
    assert main(["export", "--out", str(tmp_path / "x")]) == 2
    assert main(["export", "--manifest", "a", "--index", "b",
                 "--out", str(tmp_path / "y")]) == 2
