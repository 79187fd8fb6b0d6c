"""Additive synthesis of pitch contours.

A contour is rendered as a band-limited sawtooth-flavoured harmonic stack:
partial k carries amplitude a_1 = 1, a_k = (-1)^k * 2/(pi*k) for k >= 2, and
the per-sample phase is the running sum of the commanded fundamental, so
frequency is exact at every sample and there are no phase jumps at frame
boundaries. The hot loop lives in a compiled extension when built, with a
NumPy fallback selected at import (see :data:`HAVE_COMPILED`,
:func:`active_backend`). Set ``SPCKIT_DISABLE_COMPILED=1`` to force the
fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .contours import PitchContour

__all__ = [
    "AudioClip",
    "DEFAULT_SAMPLE_RATE",
    "PEAK_LEVEL",
    "HAVE_COMPILED",
    "active_backend",
    "partial_amplitude",
    "partial_amplitudes",
    "max_partials",
    "frame_of_sample",
    "render_samples",
    "synthesize",
]

DEFAULT_SAMPLE_RATE = 48000

# Peak level after normalization; leaves headroom below full scale.
PEAK_LEVEL = 0.9

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
from . import _kernels_py as _python

HAVE_COMPILED = _compiled is not None
if HAVE_COMPILED and os.environ.get(
        "SPCKIT_DISABLE_COMPILED", "").lower() not in ("1", "true", "yes"):
    _impl = _compiled
else:
    _impl = _python


def active_backend() -> str:
    """Name of the oscillator-bank backend in use."""
    return "compiled" if _impl is _compiled else "python"


@dataclass(frozen=True)
class AudioClip:
    """Mono audio samples.

    Attributes
    ----------
    sample_rate : int
    samples : ndarray
        float64 samples in [-1, 1] for synthesized clips.
    """

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be 1-D")
        samples.flags.writeable = False
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate


def partial_amplitude(k: int) -> float:
    """Amplitude of partial ``k`` (1-based): 1 for k=1, (-1)^k * 2/(pi*k)."""
    if k < 1:
        raise ValueError("partial index is 1-based")
    if k == 1:
        return 1.0
    return (-1.0 if k % 2 else 1.0) * 2.0 / (math.pi * k)


def partial_amplitudes(num_partials: int) -> np.ndarray:
    """Amplitudes of partials 1..num_partials."""
    if num_partials < 1:
        raise ValueError("need at least one partial")
    k = np.arange(1, num_partials + 1, dtype=np.float64)
    amps = np.where(k % 2 == 0, 1.0, -1.0) * 2.0 / (np.pi * k)
    amps[0] = 1.0
    return amps


def max_partials(f0_max: float, sample_rate: int = DEFAULT_SAMPLE_RATE) -> int:
    """Largest partial count keeping every partial at or below Nyquist."""
    if not (0.0 < f0_max <= sample_rate / 2.0):
        raise ValueError("f0_max must lie in (0, sample_rate/2]")
    return int(sample_rate // (2.0 * f0_max))


def frame_of_sample(num_frames: int, num_samples: int) -> np.ndarray:
    """Frame index driving each output sample.

    Sample j reads frame ``min(floor(j * L / M), L - 1)``; exact integer
    arithmetic, non-decreasing, first frame 0 and last frame L-1.
    """
    if num_frames < 1 or num_samples < 1:
        raise ValueError("need at least one frame and one sample")
    j = np.arange(num_samples, dtype=np.int64)
    return np.minimum(j * num_frames // num_samples, num_frames - 1)


def _f0_per_sample(contour: PitchContour, num_samples: int,
                   start: int, stop: int) -> np.ndarray:
    j = np.arange(start, stop, dtype=np.int64)
    idx = np.minimum(j * len(contour) // num_samples, len(contour) - 1)
    return contour.values[idx]


def render_samples(contour: PitchContour, num_partials: int,
                   sample_rate: int = DEFAULT_SAMPLE_RATE, *,
                   start: int = 0, stop: int | None = None,
                   phase_carry: float = 0.0):
    """Render a slice of the unnormalized waveform with resumable phase.

    Rendering ``[0, m)`` and then ``[m, M)`` with the returned carry is
    bit-identical to rendering ``[0, M)`` in one call (within a backend).

    Parameters
    ----------
    contour : PitchContour
        Strictly positive f0 on every frame.
    num_partials : int
        Partials to render; the caller is responsible for the Nyquist
        budget (see :func:`max_partials`), :func:`synthesize` enforces it.
    start, stop : int
        Sample range within the full ``M = round(fs * duration)`` render.
    phase_carry : float
        Carry returned by the previous slice (0.0 at the start).

    Returns
    -------
    (ndarray, float)
        float64 samples and the carry for the next slice.
    """
    if num_partials < 1:
        raise ValueError("need at least one partial")
    if np.any(contour.values <= 0.0) or not np.all(
            np.isfinite(contour.values)):
        raise ValueError("synthesis needs finite positive f0 on every frame")
    num_samples = int(round(sample_rate * len(contour) / contour.frame_rate))
    if num_samples < 1:
        raise ValueError("contour too short for one sample")
    stop = num_samples if stop is None else stop
    if not (0 <= start <= stop <= num_samples):
        raise ValueError("bad sample range")
    f0 = _f0_per_sample(contour, num_samples, start, stop)
    amps = partial_amplitudes(num_partials)
    return _impl.oscillator_bank(f0, amps, float(sample_rate),
                                 float(phase_carry))


def synthesize(contour: PitchContour, num_partials: int,
               sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """Render a contour to a peak-normalized clip.

    Parameters
    ----------
    contour : PitchContour
    num_partials : int
        Must keep ``num_partials * max(f0)`` at or below Nyquist.
    sample_rate : int

    Returns
    -------
    AudioClip
        ``round(fs * duration)`` samples, peak ``PEAK_LEVEL``.
    """
    limit = max_partials(float(contour.values.max()), sample_rate)
    if num_partials > limit:
        raise ValueError(
            f"{num_partials} partials would alias; max is {limit} "
            f"for this contour at {sample_rate} Hz")
    raw, _ = render_samples(contour, num_partials, sample_rate)
    peak = np.abs(raw).max()
    if peak > 0.0:
        raw = raw * (PEAK_LEVEL / peak)
    return AudioClip(sample_rate=sample_rate, samples=raw)
