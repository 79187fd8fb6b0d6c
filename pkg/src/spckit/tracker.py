"""Training-free spectral pitch tracker.

For every log-spaced candidate pitch the tracker correlates the square-root
magnitude spectrum of a centered analysis frame with a sawtooth-inspired
comb kernel: positive cosine lobes of weight 1/sqrt(k) at harmonics k*c
(k up to ``num_harmonics`` and below Nyquist), negative lobes between them,
mean-removed and unit-normalized on its support eta = f/c in
[0.25, H + 0.25]. The square-root magnitude matches the 1/sqrt(k) lobe decay
for the 1/k sawtooth partial law, and the negative lobes penalize the
half-harmonic energy an octave-low hypothesis would have to explain, which
suppresses octave errors.

Each candidate uses the power-of-two window closest to 8 of its periods
(clamped to [256, 16384]), so frames are batched per window size: Hann
window, hop 48 samples, centered with reflection padding, one FFT batch and
one sparse-kernel product per size. The per-frame estimate is the argmax
candidate refined by parabolic interpolation over log-frequency, its
normalized correlation is the strength, and a frame is voiced when strength
exceeds the threshold (0 by default: any positive correlation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.signal
import scipy.sparse

from .contours import PitchContour
from .synth import AudioClip

__all__ = [
    "TrackerConfig",
    "TrackedContour",
    "candidate_grid",
    "track_pitch",
    "rpa",
]

_WINDOW_MIN = 256
_WINDOW_MAX = 16384
_PERIODS_PER_WINDOW = 8


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker settings; defaults match the dataset band."""

    fmin_hz: float = 25.0
    fmax_hz: float = 10000.0
    bins_per_octave: int = 128
    hop: int = 48
    strength_threshold: float = 0.0
    num_harmonics: int = 8

    def validate(self):
        if not (0.0 < self.fmin_hz < self.fmax_hz):
            raise ValueError("need 0 < fmin_hz < fmax_hz")
        if self.bins_per_octave < 1:
            raise ValueError("bins_per_octave must be >= 1")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if self.num_harmonics < 1:
            raise ValueError("num_harmonics must be >= 1")
        return self


@dataclass(frozen=True)
class TrackedContour:
    """Tracker output: one estimate per frame.

    Attributes
    ----------
    frame_rate : float
    f0 : ndarray
        Refined pitch in Hz per frame (defined even for unvoiced frames).
    strength : ndarray
        Winning normalized correlation per frame, in [-1, 1].
    voicing : ndarray
        strength > threshold.
    """

    frame_rate: float
    f0: np.ndarray
    strength: np.ndarray
    voicing: np.ndarray

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=np.float64)
        strength = np.asarray(self.strength, dtype=np.float64)
        voicing = np.asarray(self.voicing, dtype=bool)
        if not (f0.shape == strength.shape == voicing.shape) or f0.ndim != 1:
            raise ValueError("f0/strength/voicing must be 1-D, equal length")
        for arr in (f0, strength, voicing):
            arr.flags.writeable = False
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "strength", strength)
        object.__setattr__(self, "voicing", voicing)

    def __len__(self):
        return self.f0.shape[0]

    def to_pitch_contour(self) -> PitchContour:
        return PitchContour(frame_rate=self.frame_rate, values=self.f0,
                            voicing=self.voicing)


def candidate_grid(config: TrackerConfig) -> np.ndarray:
    """Log-spaced candidate pitches, ceil(bpo*log2(fmax/fmin)) + 1 points."""
    config.validate()
    octaves = np.log2(config.fmax_hz / config.fmin_hz)
    num = int(np.ceil(config.bins_per_octave * octaves)) + 1
    return np.geomspace(config.fmin_hz, config.fmax_hz, num)


def _window_size(candidate_hz: float, sample_rate: int) -> int:
    ideal = _PERIODS_PER_WINDOW * sample_rate / candidate_hz
    size = 2 ** int(round(np.log2(ideal)))
    return int(np.clip(size, _WINDOW_MIN, _WINDOW_MAX))


def _comb_kernel(candidate_hz, bin_freqs, num_harmonics, nyquist):
    """Zero-mean unit-norm comb over the kernel support; returns
    (bin indices, weights)."""
    harmonics = min(num_harmonics, int(nyquist / candidate_hz))
    harmonics = max(harmonics, 1)
    eta = bin_freqs / candidate_hz
    support = (eta >= 0.25) & (eta <= harmonics + 0.25)
    idx = np.flatnonzero(support)
    raw = np.cos(2.0 * np.pi * eta[idx]) / np.sqrt(eta[idx])
    raw -= raw.mean()
    norm = np.linalg.norm(raw)
    if norm > 0.0:
        raw /= norm
    return idx, raw


def _build_bank(config: TrackerConfig, sample_rate: int):
    """Per-window-size sparse kernel and support matrices.

    Returns a list of (window, candidate_rows, kernel_csr, support_csr);
    kernel rows are zero-mean unit-norm, support rows are binary masks.
    """
    candidates = candidate_grid(config)
    if config.fmax_hz > sample_rate / 2.0:
        raise ValueError("fmax_hz above Nyquist for this sample rate")
    sizes = np.array([_window_size(c, sample_rate) for c in candidates])
    bank = []
    for window in sorted(set(sizes.tolist()), reverse=True):
        rows = np.flatnonzero(sizes == window)
        bin_freqs = np.arange(window // 2 + 1) * (sample_rate / window)
        k_data, k_cols, s_ptr = [], [], [0]
        for c in candidates[rows]:
            idx, weights = _comb_kernel(c, bin_freqs, config.num_harmonics,
                                        sample_rate / 2.0)
            k_cols.append(idx)
            k_data.append(weights)
            s_ptr.append(s_ptr[-1] + len(idx))
        indices = np.concatenate(k_cols)
        kernel = scipy.sparse.csr_matrix(
            (np.concatenate(k_data).astype(np.float32), indices,
             np.asarray(s_ptr)),
            shape=(len(rows), window // 2 + 1))
        support = scipy.sparse.csr_matrix(
            (np.ones(len(indices), dtype=np.float32), indices.copy(),
             np.asarray(s_ptr)),
            shape=(len(rows), window // 2 + 1))
        bank.append((window, rows, kernel, support))
    return bank


_BANK_CACHE: dict = {}


def _bank(config: TrackerConfig, sample_rate: int):
    key = (config, sample_rate)
    if key not in _BANK_CACHE:
        _BANK_CACHE[key] = _build_bank(config, sample_rate)
    return _BANK_CACHE[key]


def _frames_f32(x, window, hop, n_frames):
    pad_left = window // 2
    need = (n_frames - 1) * hop + window
    pad_right = max(0, need - len(x) - pad_left)
    padded = np.pad(x, (pad_left, pad_right), mode="reflect")
    view = np.lib.stride_tricks.sliding_window_view(padded, window)
    return np.ascontiguousarray(view[::hop][:n_frames], dtype=np.float32)


def track_pitch(clip: AudioClip,
                config: TrackerConfig = TrackerConfig()) -> TrackedContour:
    """Track the fundamental of a clip frame by frame."""
    config.validate()
    if len(clip) < _WINDOW_MIN:
        raise ValueError(
            f"clip shorter than the smallest analysis window {_WINDOW_MIN}")
    candidates = candidate_grid(config)
    n_frames = -(-len(clip) // config.hop)
    x = clip.samples.astype(np.float32)
    scores = np.empty((len(candidates), n_frames), dtype=np.float32)
    for window, rows, kernel, support in _bank(config, clip.sample_rate):
        frames = _frames_f32(x, window, config.hop, n_frames)
        hann = scipy.signal.get_window("hann", window,
                                       fftbins=True).astype(np.float32)
        mag = np.abs(scipy.fft.rfft(frames * hann, axis=1))
        root = np.sqrt(mag).T  # bins x frames
        numer = kernel @ root
        denom = np.sqrt(np.maximum(support @ (root * root), 1e-20))
        scores[rows] = numer / denom

    best = scores.argmax(axis=0)
    strength = scores[best, np.arange(n_frames)].astype(np.float64)

    # parabolic refinement on the uniform log2-frequency grid
    log_f = np.log2(candidates)
    step = log_f[1] - log_f[0]
    f0 = np.empty(n_frames, dtype=np.float64)
    s64 = scores.astype(np.float64)
    for t in range(n_frames):
        i = int(best[t])
        if 0 < i < len(candidates) - 1:
            left, mid, right = s64[i - 1, t], s64[i, t], s64[i + 1, t]
            denom = left - 2.0 * mid + right
            delta = 0.0 if denom >= 0.0 else 0.5 * (left - right) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
        else:
            delta = 0.0
        f0[t] = 2.0 ** (log_f[i] + delta * step)
    f0 = np.clip(f0, config.fmin_hz, config.fmax_hz)
    return TrackedContour(
        frame_rate=clip.sample_rate / config.hop,
        f0=f0,
        strength=strength,
        voicing=strength > config.strength_threshold,
    )


def rpa(est: TrackedContour, gt: PitchContour, tol_cents: float = 50.0) -> float:
    """Raw pitch accuracy: fraction of ground-truth-voiced frames whose
    estimate is voiced and within ``tol_cents`` of the truth.

    Raises
    ------
    ValueError
        If the ground truth has no voiced frames.
    """
    if tol_cents <= 0.0:
        raise ValueError("tol_cents must be positive")
    gt_voiced = np.flatnonzero(gt.voicing)
    if gt_voiced.size == 0:
        raise ValueError("ground truth has no voiced frames")
    # nearest estimated frame for each ground-truth frame
    j = np.round(gt_voiced * est.frame_rate / gt.frame_rate).astype(np.int64)
    j = np.clip(j, 0, len(est) - 1)
    err = 1200.0 * np.log2(est.f0[j] / gt.values[gt_voiced])
    hits = est.voicing[j] & (np.abs(err) <= tol_cents)
    return float(hits.mean())
