"""Time-frequency feature images and model-input tensors.

All spectral images share one frame grid: centered analysis windows every 48
samples (1000 frames per second at 48 kHz), reflection padding at the edges.
Log images are 20*log10(magnitude + 1e-10), clamped to a floor 100 dB below
the image maximum.

Image kinds
-----------
stft
    1025-bin linear-frequency log magnitude, 2048-point Hann window.
mel
    128 HTK mel bands over 25 Hz..20 kHz; area-normalized triangles applied
    to the power spectrum, then the same log/floor convention.
cqt
    60 bins/octave over 25 Hz..20 kHz (579 bins); per-bin Hann-windowed
    complex kernels of length min(ceil(Q*fs/f_c), clip length), evaluated as
    one GEMM per window-length group.
pitch
    Binary image marking the nearest CQT bin of a ground-truth contour.

Model inputs resize any image to 224x224 with a Catmull-Rom bicubic kernel
(half-pixel centers, clamped borders) and normalize a batch jointly to
[-1, 1], replicated on 3 channels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.signal

from .contours import PitchContour
from .synth import AudioClip

__all__ = [
    "FFT_SIZE",
    "HOP_SAMPLES",
    "FeatureImage",
    "ModelInput",
    "stft_magnitude",
    "stft_logmag",
    "mel_filterbank",
    "mel_logmag",
    "cqt_bin_freqs",
    "cqt_logmag",
    "binary_pitch_image",
    "resize_bicubic",
    "to_model_inputs",
    "to_model_input",
]

FFT_SIZE = 2048
HOP_SAMPLES = 48
LOG_EPS = 1e-10
LOG_FLOOR_RANGE_DB = 100.0

MEL_BANDS = 128
MEL_FMIN_HZ = 25.0
MEL_FMAX_HZ = 20000.0

CQT_FMIN_HZ = 25.0
CQT_FMAX_HZ = 20000.0
CQT_BINS_PER_OCTAVE = 60

MODEL_INPUT_SIZE = 224


@dataclass(frozen=True)
class FeatureImage:
    """A bins x frames image with its axis metadata.

    Attributes
    ----------
    kind : str
        "stft", "mel", "cqt" or "pitch".
    matrix : ndarray
        bins x frames, float32.
    bin_freqs : ndarray
        Center frequency of each bin in Hz.
    hop_s : float
        Frame hop in seconds.
    log_floor_db : float
        Floor applied to log images (0.0 for the binary pitch image).
    """

    kind: str
    matrix: np.ndarray
    bin_freqs: np.ndarray
    hop_s: float
    log_floor_db: float

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float32)
        bin_freqs = np.asarray(self.bin_freqs, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("matrix must be bins x frames")
        if bin_freqs.shape != (matrix.shape[0],):
            raise ValueError("bin_freqs length must match bin count")
        matrix.flags.writeable = False
        bin_freqs.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "bin_freqs", bin_freqs)

    @property
    def num_bins(self):
        return self.matrix.shape[0]

    @property
    def num_frames(self):
        return self.matrix.shape[1]


@dataclass(frozen=True)
class ModelInput:
    """A 224x224x3 tensor normalized to [-1, 1]."""

    tensor: np.ndarray
    source_kind: str

    def __post_init__(self):
        tensor = np.asarray(self.tensor, dtype=np.float32)
        expected = (MODEL_INPUT_SIZE, MODEL_INPUT_SIZE, 3)
        if tensor.shape != expected:
            raise ValueError(f"model input must have shape {expected}")
        tensor.flags.writeable = False
        object.__setattr__(self, "tensor", tensor)


def _num_frames(num_samples: int) -> int:
    return -(-num_samples // HOP_SAMPLES)


def _frames(x: np.ndarray, win: int, dtype=np.float64) -> np.ndarray:
    """Centered frames every HOP_SAMPLES, reflection-padded."""
    n_frames = _num_frames(len(x))
    pad_left = win // 2
    need = (n_frames - 1) * HOP_SAMPLES + win
    pad_right = max(0, need - len(x) - pad_left)
    padded = np.pad(x, (pad_left, pad_right), mode="reflect")
    view = np.lib.stride_tricks.sliding_window_view(padded, win)
    return np.ascontiguousarray(view[::HOP_SAMPLES][:n_frames], dtype=dtype)


def stft_magnitude(clip: AudioClip):
    """Linear magnitude STFT.

    Returns
    -------
    (ndarray, ndarray)
         1025 x frames magnitude and the bin frequencies in Hz.
    """
    if len(clip) < FFT_SIZE:
        raise ValueError(f"clip shorter than one {FFT_SIZE}-sample window")
    frames = _frames(clip.samples, FFT_SIZE)
    window = scipy.signal.get_window("hann", FFT_SIZE, fftbins=True)
    spec = scipy.fft.rfft(frames * window, axis=1)
    freqs = np.arange(FFT_SIZE // 2 + 1) * clip.sample_rate / FFT_SIZE
    return np.abs(spec).T, freqs


def _log_image(mag: np.ndarray) -> tuple[np.ndarray, float]:
    log = 20.0 * np.log10(mag + LOG_EPS)
    floor = float(log.max() - LOG_FLOOR_RANGE_DB)
    return np.maximum(log, floor), floor


def stft_logmag(clip: AudioClip) -> FeatureImage:
    """Log-magnitude STFT image (silence gives a constant image)."""
    mag, freqs = stft_magnitude(clip)
    log, floor = _log_image(mag)
    return FeatureImage(kind="stft", matrix=log, bin_freqs=freqs,
                        hop_s=HOP_SAMPLES / clip.sample_rate,
                        log_floor_db=floor)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, num_bands: int = MEL_BANDS,
                   fmin: float = MEL_FMIN_HZ, fmax: float = MEL_FMAX_HZ):
    """HTK mel triangles, area-normalized, over the rfft bin grid.

    Returns
    -------
    (ndarray, ndarray)
        num_bands x 1025 weights and the band center frequencies.
    """
    if fmax > sample_rate / 2.0:
        raise ValueError("fmax above Nyquist")
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax),
                                   num_bands + 2))
    freqs = np.arange(FFT_SIZE // 2 + 1) * sample_rate / FFT_SIZE
    lo = edges[:-2, None]
    center = edges[1:-1, None]
    hi = edges[2:, None]
    up = (freqs[None, :] - lo) / (center - lo)
    down = (hi - freqs[None, :]) / (hi - center)
    tri = np.maximum(0.0, np.minimum(up, down))
    # area normalization: each triangle integrates to 1 over frequency
    tri *= 2.0 / (hi - lo)
    return tri, edges[1:-1]


def mel_logmag(clip: AudioClip) -> FeatureImage:
    """Mel-band log image: triangles on power, then the log/floor rule."""
    mag, _ = stft_magnitude(clip)
    weights, centers = mel_filterbank(clip.sample_rate)
    power = weights @ (mag ** 2)
    log, floor = _log_image(np.sqrt(power))
    return FeatureImage(kind="mel", matrix=log, bin_freqs=centers,
                        hop_s=HOP_SAMPLES / clip.sample_rate,
                        log_floor_db=floor)


def cqt_bin_freqs() -> np.ndarray:
    """Constant-Q center frequencies: 25 Hz * 2**(b/60) up to 20 kHz."""
    num = int(np.floor(CQT_BINS_PER_OCTAVE
                       * np.log2(CQT_FMAX_HZ / CQT_FMIN_HZ))) + 1
    return CQT_FMIN_HZ * 2.0 ** (np.arange(num) / CQT_BINS_PER_OCTAVE)


def _cqt_kernels(sample_rate: int, num_samples: int):
    """Windowed cosine/sine kernels grouped by GEMM length.

    Returns a list of (length, bin_indices, kernel_matrix); the kernel
    matrix stacks the real parts then the imaginary parts column-wise
    (length x 2*len(bin_indices), contiguous float32, so one BLAS GEMM
    covers both quadratures). Envelope: L1-normalized continuous Hann of
    per-bin width min(ceil(Q*fs/f_c), clip length).
    """
    freqs = cqt_bin_freqs()
    q = 1.0 / (2.0 ** (1.0 / CQT_BINS_PER_OCTAVE) - 1.0)
    lengths = np.minimum(np.ceil(q * sample_rate / freqs).astype(np.int64),
                         num_samples)
    groups = {}
    for start in range(0, len(freqs), CQT_BINS_PER_OCTAVE):
        stop = min(start + CQT_BINS_PER_OCTAVE, len(freqs))
        glen = int(lengths[start:stop].max())
        groups.setdefault(glen, []).extend(range(start, stop))
    out = []
    for glen, bins in sorted(groups.items(), reverse=True):
        tau = np.arange(glen, dtype=np.float64) - glen // 2
        kernels = np.zeros((glen, 2 * len(bins)), dtype=np.float32)
        for col, b in enumerate(bins):
            width = float(lengths[b])
            active = np.abs(tau) < width / 2.0
            env = np.cos(np.pi * tau[active] / width) ** 2
            env /= env.sum()
            arg = 2.0 * np.pi * freqs[b] * tau[active] / sample_rate
            kernels[active, col] = env * np.cos(arg)
            kernels[active, len(bins) + col] = -env * np.sin(arg)
        out.append((glen, np.asarray(bins, dtype=np.int64), kernels))
    return out


def cqt_logmag(clip: AudioClip) -> FeatureImage:
    """Constant-Q log-magnitude image (579 bins at 48 kHz)."""
    if len(clip) < 2:
        raise ValueError("clip too short for CQT")
    freqs = cqt_bin_freqs()
    n_frames = _num_frames(len(clip))
    mag = np.empty((len(freqs), n_frames), dtype=np.float64)
    x = clip.samples.astype(np.float32)
    for glen, bins, kernels in _cqt_kernels(clip.sample_rate, len(clip)):
        frames = _frames(x, glen, dtype=np.float32)
        resp = frames @ kernels
        n = len(bins)
        mag[bins, :] = np.hypot(resp[:, :n], resp[:, n:]).T
    log, floor = _log_image(mag)
    return FeatureImage(kind="cqt", matrix=log, bin_freqs=freqs,
                        hop_s=HOP_SAMPLES / clip.sample_rate,
                        log_floor_db=floor)


def binary_pitch_image(contour: PitchContour) -> FeatureImage:
    """One-hot image of a contour on the constant-Q bin grid.

    Voiced frames mark their nearest bin; pitches outside the bin range
    clamp to the edge bins and raise a UserWarning.
    """
    freqs = cqt_bin_freqs()
    matrix = np.zeros((len(freqs), len(contour)), dtype=np.float32)
    voiced = np.flatnonzero(contour.voicing)
    if voiced.size:
        f0 = contour.values[voiced]
        bins = np.round(CQT_BINS_PER_OCTAVE
                        * np.log2(f0 / CQT_FMIN_HZ)).astype(np.int64)
        clamped = (bins < 0) | (bins >= len(freqs))
        if np.any(clamped):
            warnings.warn(
                f"{int(clamped.sum())} voiced frames outside the "
                f"[{freqs[0]:.1f}, {freqs[-1]:.1f}] Hz bin range were "
                "clamped to edge bins", UserWarning, stacklevel=2)
            bins = np.clip(bins, 0, len(freqs) - 1)
        matrix[bins, voiced] = 1.0
    return FeatureImage(kind="pitch", matrix=matrix, bin_freqs=freqs,
                        hop_s=1.0 / contour.frame_rate, log_floor_db=0.0)


def _cubic_kernel(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    at = np.abs(t)
    inner = (a + 2.0) * at ** 3 - (a + 3.0) * at ** 2 + 1.0
    outer = a * (at ** 3 - 5.0 * at ** 2 + 8.0 * at - 4.0)
    return np.where(at <= 1.0, inner, np.where(at < 2.0, outer, 0.0))


def _resize_weights(n_src: int, n_dst: int) -> np.ndarray:
    # half-pixel mapping with clamped (edge-replicated) borders
    pos = (np.arange(n_dst) + 0.5) * n_src / n_dst - 0.5
    base = np.floor(pos).astype(np.int64)
    weights = np.zeros((n_dst, n_src), dtype=np.float64)
    for off in range(-1, 3):
        idx = np.clip(base + off, 0, n_src - 1)
        w = _cubic_kernel(pos - (base + off))
        np.add.at(weights, (np.arange(n_dst), idx), w)
    return weights


def resize_bicubic(matrix: np.ndarray,
                   out_shape=(MODEL_INPUT_SIZE, MODEL_INPUT_SIZE)):
    """Separable Catmull-Rom resize (a = -0.5)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or min(matrix.shape) < 2:
        raise ValueError("matrix must be 2-D with at least 2 rows/cols")
    wr = _resize_weights(matrix.shape[0], out_shape[0])
    wc = _resize_weights(matrix.shape[1], out_shape[1])
    return wr @ matrix @ wc.T


def to_model_inputs(images) -> list[ModelInput]:
    """Resize a batch of images and normalize them jointly to [-1, 1].

    The batch minimum maps to -1 and the batch maximum to +1; a constant
    batch maps to all zeros. Each tensor replicates its image on 3 channels.
    """
    images = list(images)
    if not images:
        raise ValueError("empty batch")
    resized = [resize_bicubic(img.matrix) for img in images]
    lo = min(float(r.min()) for r in resized)
    hi = max(float(r.max()) for r in resized)
    out = []
    for img, r in zip(images, resized):
        if hi > lo:
            norm = (r - lo) * (2.0 / (hi - lo)) - 1.0
        else:
            norm = np.zeros_like(r)
        tensor = np.repeat(norm[:, :, None], 3, axis=2).astype(np.float32)
        out.append(ModelInput(tensor=tensor, source_kind=img.kind))
    return out


def to_model_input(image: FeatureImage) -> ModelInput:
    """Single-image convenience wrapper; the image is its own batch."""
    return to_model_inputs([image])[0]
