"""WAV and PFT1 tensor round trips, format validation."""

import numpy as np
import pytest
import scipy.io.wavfile

from spckit.contours import ContourParams, ContourType, eval_contour
from spckit.synth import AudioClip, synthesize
from spckit.tensorio import read_sidecar, read_tensor, write_tensor
from spckit.wavio import read_wav, write_wav


def _clip():
    c = eval_contour(ContourParams(
        kind=ContourType.BEND, base_hz=220.0, extent_cents=500.0,
        mod_hz=1.0, phase=-0.25, duration=0.25))
    return synthesize(c, 5)


def test_wav_float32_round_trip_bit_exact(tmp_path):
    clip = _clip()
    path = tmp_path / "clip.wav"
    write_wav(path, clip)
    back = read_wav(path)
    assert back.sample_rate == clip.sample_rate
    assert len(back) == len(clip)
    # float32 storage: stored bits equal the cast of the original samples
    np.testing.assert_array_equal(
        back.samples.astype(np.float32), clip.samples.astype(np.float32))
    # and a second write/read cycle is exactly stable
    write_wav(tmp_path / "clip2.wav", back)
    assert (tmp_path / "clip.wav").read_bytes() \
        == (tmp_path / "clip2.wav").read_bytes()


def test_wav_pcm_reading_scales_to_unit(tmp_path):
    rate = 8000
    x = (np.sin(2 * np.pi * 440 * np.arange(800) / rate) * 0.5)
    p16 = tmp_path / "pcm16.wav"
    scipy.io.wavfile.write(p16, rate, (x * 32767).astype(np.int16))
    back = read_wav(p16)
    assert back.sample_rate == rate
    assert np.abs(back.samples - x).max() < 1e-3
    assert np.abs(back.samples).max() <= 1.0

    p32 = tmp_path / "pcm32.wav"
    scipy.io.wavfile.write(p32, rate, (x * (2**31 - 1)).astype(np.int32))
    back32 = read_wav(p32)
    assert np.abs(back32.samples - x).max() < 1e-6


def test_wav_stereo_averaged(tmp_path):
    rate = 8000
    left = np.linspace(-0.5, 0.5, 100, dtype=np.float32)
    right = np.zeros(100, dtype=np.float32)
    path = tmp_path / "st.wav"
    scipy.io.wavfile.write(path, rate, np.stack([left, right], axis=1))
    back = read_wav(path)
    np.testing.assert_allclose(back.samples, left / 2.0, atol=1e-7)


def test_wav_rejects_unsupported(tmp_path):
    path = tmp_path / "u8.wav"
    scipy.io.wavfile.write(path, 8000, np.full(64, 128, dtype=np.uint8))
    with pytest.raises(ValueError):
        read_wav(path)
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFFxxxxWAVE")
    with pytest.raises(ValueError):
        read_wav(bad)
    with pytest.raises(OSError):
        read_wav(tmp_path / "missing.wav")


def test_tensor_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(17)
    for shape in [(7,), (3, 5), (4, 4, 3), (2, 3, 4, 5)]:
        arr = rng.standard_normal(shape).astype(np.float32)
        path = tmp_path / f"t{len(shape)}.pft1"
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.dtype == np.float32
        assert back.shape == arr.shape
        np.testing.assert_array_equal(back, arr)
        # byte-stable rewrite
        write_tensor(tmp_path / "again.pft1", back)
        assert (tmp_path / "again.pft1").read_bytes() == path.read_bytes()


def test_tensor_sidecar(tmp_path):
    path = tmp_path / "t.pft1"
    write_tensor(path, np.zeros((2, 2), dtype=np.float32),
                 sidecar={"kind": "mel", "hop_s": 0.001})
    assert read_sidecar(path) == {"kind": "mel", "hop_s": 0.001}
    assert read_sidecar(tmp_path / "absent.pft1") is None


def test_tensor_rejects_malformed(tmp_path):
    path = tmp_path / "t.pft1"
    write_tensor(path, np.zeros(4, dtype=np.float32))
    blob = path.read_bytes()
    (tmp_path / "magic.pft1").write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ValueError):
        read_tensor(tmp_path / "magic.pft1")
    (tmp_path / "trunc.pft1").write_bytes(blob[:-4])
    with pytest.raises(ValueError):
        read_tensor(tmp_path / "trunc.pft1")
    (tmp_path / "dtype.pft1").write_bytes(blob[:4] + b"\x09" + blob[5:])
    with pytest.raises(ValueError):
        read_tensor(tmp_path / "dtype.pft1")
