"""spckit: synthetic pitch-contour dataset generation and analysis.

Submodules
----------
contours
    Parametric contour model (seven families on a cents-exponent template).
sampling
    Seeded parameter sampling and dataset manifests.
synth
    Additive synthesis with a compiled kernel and NumPy fallback.
features
    STFT / mel / constant-Q / binary pitch images and model-input tensors.
tracker
    Training-free spectral pitch tracker.
fitter
    Training-free contour fitting and classification.
metrics
    Evaluation metrics and confidence aggregation.
wavio, tensorio
    WAV and tensor file I/O.
datasetio
    Dataset materialization, patching, labeled-clip ingestion.
experiments
    Tracker / fitter / clip-classification evaluation runners.
"""

from .contours import (
    ContourParams,
    ContourType,
    PitchContour,
    cents_to_hz,
    eval_contour,
    frequency_extent,
    hz_to_cents,
)
from .synth import AudioClip, active_backend, max_partials, synthesize

__version__ = "0.1.0"

__all__ = [
    "ContourParams",
    "ContourType",
    "PitchContour",
    "AudioClip",
    "cents_to_hz",
    "eval_contour",
    "frequency_extent",
    "hz_to_cents",
    "active_backend",
    "max_partials",
    "synthesize",
    "__version__",
]
