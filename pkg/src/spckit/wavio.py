"""WAV file I/O.

Generated clips are written as 32-bit float WAV (lossless for synthesized
float samples). Reading accepts float32/float64 and PCM 16/24/32; integer
PCM is scaled to [-1, 1) by its full-scale value and multi-channel audio is
averaged to mono.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.io.wavfile

from .synth import AudioClip

__all__ = ["write_wav", "read_wav"]


def write_wav(path, clip: AudioClip):
    """Write a clip as float32 WAV."""
    scipy.io.wavfile.write(path, clip.sample_rate,
                           clip.samples.astype("<f4"))


def read_wav(path) -> AudioClip:
    """Read a WAV file to a mono float clip.

    Raises
    ------
    ValueError
        Unsupported sample format (e.g. 8-bit PCM) or malformed file.
    OSError
        Unreadable file.
    """
    with warnings.catch_warnings():
        # scipy warns about unknown riff chunks; harmless for our purposes
        warnings.simplefilter("ignore", scipy.io.wavfile.WavFileWarning)
        try:
            rate, data = scipy.io.wavfile.read(path)
        except ValueError as exc:
            raise ValueError(f"cannot parse WAV file {path}: {exc}") from exc
    if data.dtype == np.uint8:
        raise ValueError(f"8-bit PCM is not supported: {path}")
    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        # scipy returns 24-bit PCM as int32 with data in the high bytes,
        # so one full-scale divisor covers both 24- and 32-bit PCM
        samples = data / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV dtype {data.dtype}: {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioClip(sample_rate=int(rate), samples=samples)
