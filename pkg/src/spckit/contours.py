"""Parametric pitch-contour model.

A contour is a fundamental-frequency trajectory sampled on a uniform frame
grid. Every family is the same geometric template

    f0(n) = base_hz * 2 ** ((extent_cents / 1200) * psi(x(n))),
    x(n)  = mod_hz * duration * n / L + phase,      n = 0 .. L-1,

with ``L = round(frame_rate * duration)`` frames and ``psi`` a unit-amplitude
period-1 waveform chosen per family. The exponent is in octaves, so
``extent_cents`` is a symmetric musical excursion around ``base_hz`` and the
trajectory stays inside ``base_hz * 2**(+-extent_cents/1200)`` by
construction. Reversed variants flip the frame axis.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ContourType",
    "ContourParams",
    "PitchContour",
    "PSI_BY_TYPE",
    "eval_psi",
    "eval_contour",
    "reverse_contour",
    "frequency_extent",
    "hz_to_cents",
    "cents_to_hz",
    "write_f0_csv",
    "read_f0_csv",
    "CENTS_REF_HZ",
    "DEFAULT_FRAME_RATE",
]

# Reference for the cents scale: 25 Hz maps to 0 cents.
CENTS_REF_HZ = 25.0

# Frame rate of generated contours; matches a 48 kHz / hop-48 analysis grid.
DEFAULT_FRAME_RATE = 1000.0


class ContourType(enum.Enum):
    """The seven contour families."""

    STABLE = "stable"
    ALTERNATING = "alternating"
    VIBRATO = "vibrato"
    GLISSANDO = "glissando"
    BEND = "bend"
    SAWTOOTH = "sawtooth"
    TRIANGLE = "triangle"


def _psi_sin(x):
    return np.sin(2.0 * np.pi * x)


def _psi_square(x):
    # sign(0) := 0 at the jump, matching np.sign.
    return np.sign(np.sin(2.0 * np.pi * x))


def _psi_triangle(x):
    return 2.0 * np.abs(2.0 * (x - np.floor(x + 0.5))) - 1.0


def _psi_sawtooth(x):
    return 2.0 * (x - np.floor(x + 0.5))


_PSI_FUNCS = {
    "sin": _psi_sin,
    "square": _psi_square,
    "triangle": _psi_triangle,
    "sawtooth": _psi_sawtooth,
}

# Modulator shape per family. Glissando/bend are one half / one full cosine
# period carved out by their fixed (mod_hz, phase); see TABLE_I in sampling.
PSI_BY_TYPE = {
    ContourType.STABLE: "square",
    ContourType.ALTERNATING: "square",
    ContourType.VIBRATO: "sin",
    ContourType.GLISSANDO: "sin",
    ContourType.BEND: "sin",
    ContourType.SAWTOOTH: "sawtooth",
    ContourType.TRIANGLE: "triangle",
}


def eval_psi(kind, x):
    """Evaluate a unit modulator waveform.

    Parameters
    ----------
    kind : str
        One of ``"sin"``, ``"square"``, ``"triangle"``, ``"sawtooth"``.
    x : array_like
        Phase in periods; any finite real value.

    Returns
    -------
    ndarray or scalar
        Waveform values in [-1, 1], period 1 in ``x``.
    """
    if kind not in _PSI_FUNCS:
        raise ValueError(f"unknown psi kind: {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("psi argument must be finite")
    out = _PSI_FUNCS[kind](x)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ContourParams:
    """Parameters of one contour.

    Attributes
    ----------
    kind : ContourType
        Contour family.
    base_hz : float
        Center frequency in Hz; geometric center of the excursion.
    extent_cents : float
        Peak deviation from ``base_hz`` in cents (>= 0).
    mod_hz : float
        Modulation rate in Hz (> 0).
    phase : float
        Modulator phase in periods; interpreted modulo 1.
    duration : float
        Duration in seconds (> 0).
    reversed : bool
        Evaluate the contour on a reversed frame axis.
    """

    kind: ContourType
    base_hz: float
    extent_cents: float
    mod_hz: float
    phase: float
    duration: float = 1.0
    reversed: bool = False

    def validate(self):
        """Raise ValueError if any field is out of domain."""
        vals = (self.base_hz, self.extent_cents, self.mod_hz, self.phase,
                self.duration)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("contour parameters must be finite")
        if self.base_hz <= 0.0:
            raise ValueError("base_hz must be positive")
        if self.extent_cents < 0.0:
            raise ValueError("extent_cents must be >= 0")
        if self.mod_hz <= 0.0:
            raise ValueError("mod_hz must be positive")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if self.kind is ContourType.STABLE and self.extent_cents != 0.0:
            raise ValueError("stable contours have extent_cents == 0")
        if self.reversed and self.kind not in (ContourType.GLISSANDO,
                                               ContourType.SAWTOOTH):
            raise ValueError("only glissando/sawtooth contours reverse")
        return self


@dataclass(frozen=True)
class PitchContour:
    """A sampled f0 trajectory.

    Attributes
    ----------
    frame_rate : float
        Frames per second.
    values : ndarray
        f0 in Hz per frame; must be strictly positive on voiced frames.
    voicing : ndarray
        Boolean per-frame voicing mask, same length as ``values``.
    """

    frame_rate: float
    values: np.ndarray
    voicing: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if self.voicing is None:
            voicing = np.ones(values.shape, dtype=bool)
        else:
            voicing = np.asarray(self.voicing, dtype=bool)
        if values.ndim != 1 or voicing.shape != values.shape:
            raise ValueError("values/voicing must be 1-D and equal length")
        if self.frame_rate <= 0.0:
            raise ValueError("frame_rate must be positive")
        if np.any(values[voicing] <= 0.0):
            raise ValueError("voiced f0 values must be strictly positive")
        values.flags.writeable = False
        voicing.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "voicing", voicing)

    def __len__(self):
        return self.values.shape[0]

    @property
    def times(self):
        """Frame times in seconds."""
        return np.arange(len(self)) / self.frame_rate

    @property
    def duration(self):
        return len(self) / self.frame_rate


def eval_contour(params: ContourParams,
                 frame_rate: float = DEFAULT_FRAME_RATE) -> PitchContour:
    """Sample a contour on its frame grid.

    Parameters
    ----------
    params : ContourParams
    frame_rate : float
        Frames per second of the output grid.

    Returns
    -------
    PitchContour
        ``round(frame_rate * duration)`` frames, all voiced.
    """
    params.validate()
    if frame_rate <= 0.0:
        raise ValueError("frame_rate must be positive")
    length = int(round(frame_rate * params.duration))
    if length < 1:
        raise ValueError("duration too short for the frame grid")
    n = np.arange(length, dtype=np.float64)
    x = params.mod_hz * params.duration * n / length + params.phase
    psi = eval_psi(PSI_BY_TYPE[params.kind], x)
    f0 = params.base_hz * np.exp2((params.extent_cents / 1200.0) * psi)
    if params.reversed:
        f0 = f0[::-1]
    return PitchContour(frame_rate=frame_rate, values=f0,
                        voicing=np.ones(length, dtype=bool))


def reverse_contour(contour: PitchContour) -> PitchContour:
    """Time-reverse a contour (frames and voicing)."""
    return PitchContour(frame_rate=contour.frame_rate,
                        values=contour.values[::-1].copy(),
                        voicing=contour.voicing[::-1].copy())


def frequency_extent(params: ContourParams):
    """Analytic frequency range of the continuous contour.

    Returns
    -------
    (float, float)
        ``base_hz * 2**(-extent_cents/1200)`` and
        ``base_hz * 2**(+extent_cents/1200)``. The sampled frame grid is
        contained in this interval; it attains the bounds exactly only when a
        frame lands on a modulator extreme.
    """
    params.validate()
    half = params.extent_cents / 1200.0
    return params.base_hz * 2.0 ** (-half), params.base_hz * 2.0 ** half


def hz_to_cents(f):
    """Map frequency to cents above the 25 Hz reference.

    Parameters
    ----------
    f : array_like
        Frequencies in Hz, strictly positive.
    """
    f = np.asarray(f, dtype=np.float64)
    if np.any(f <= 0.0) or not np.all(np.isfinite(f)):
        raise ValueError("frequencies must be finite and positive")
    out = 1200.0 * np.log2(f / CENTS_REF_HZ)
    return out if out.ndim else float(out)


def cents_to_hz(c):
    """Inverse of :func:`hz_to_cents`."""
    c = np.asarray(c, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise ValueError("cents values must be finite")
    out = CENTS_REF_HZ * np.exp2(c / 1200.0)
    return out if out.ndim else float(out)


def write_f0_csv(path, contour: PitchContour):
    """Write a contour as ``time_s,f0_hz,voiced`` CSV.

    Times carry 6 decimals, frequencies 4, voicing is 1/0. Unvoiced frames
    keep their stored value (0.0 by convention when none exists).
    ``path`` may be an open text stream.
    """
    if hasattr(path, "write"):
        _write_f0_rows(path, contour)
        return
    with open(path, "w", newline="") as fh:
        _write_f0_rows(fh, contour)


def _write_f0_rows(fh, contour):
    writer = csv.writer(fh)
    writer.writerow(["time_s", "f0_hz", "voiced"])
    times = contour.times
    for i in range(len(contour)):
        writer.writerow([f"{times[i]:.6f}",
                         f"{contour.values[i]:.4f}",
                         int(contour.voicing[i])])


def read_f0_csv(path) -> PitchContour:
    """Read a ``time_s,f0_hz,voiced`` CSV written by :func:`write_f0_csv`.

    The frame rate is recovered from the time column; it must be uniform.
    """
    times, values, voicing = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != [
                "time_s", "f0_hz", "voiced"]:
            raise ValueError(f"not an f0 CSV: {path}")
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]))
            values.append(float(row[1]))
            voicing.append(bool(int(row[2])))
    if not times:
        raise ValueError(f"empty f0 CSV: {path}")
    if len(times) > 1:
        steps = np.diff(times)
        step = float(np.median(steps))
        if step <= 0.0 or np.any(np.abs(steps - step) > 1e-4):
            raise ValueError("non-uniform time grid in f0 CSV")
        frame_rate = 1.0 / step
    else:
        frame_rate = DEFAULT_FRAME_RATE
    # Snap to an integer rate when within rounding noise of one.
    if abs(frame_rate - round(frame_rate)) < 1e-3:
        frame_rate = float(round(frame_rate))
    return PitchContour(frame_rate=frame_rate,
                        values=np.asarray(values, dtype=np.float64),
                        voicing=np.asarray(voicing, dtype=bool))


def canonical_params(params: ContourParams) -> ContourParams:
    """Reduce ``phase`` modulo 1 without changing the sampled contour."""
    return replace(params, phase=params.phase % 1.0)
