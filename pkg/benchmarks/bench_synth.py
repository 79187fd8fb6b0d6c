"""Benchmark the oscillator-bank backends (compiled extension vs NumPy).

Renders a one-second vibrato contour at 48 kHz through both kernels across
a range of partial counts and prints throughput plus the numerical gap
between backends.

Usage:
    python3 benchmarks/bench_synth.py [--repeats 5] [--partials 1,4,16,64,240]
"""

import argparse
import time

import numpy as np

from spckit import _kernels_py
from spckit.contours import ContourParams, ContourType, eval_contour
from spckit.synth import HAVE_COMPILED, partial_amplitudes

try:
    from spckit import _kernels
except ImportError:
    _kernels = None


def per_sample_f0(sample_rate=48000):
    contour = eval_contour(ContourParams(
        kind=ContourType.VIBRATO, base_hz=100.0, extent_cents=600.0,
        mod_hz=6.0, phase=0.0))
    j = np.arange(sample_rate, dtype=np.int64)
    idx = np.minimum(j * len(contour) // sample_rate, len(contour) - 1)
    return contour.values[idx]


def best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--partials", default="1,4,16,64,240")
    args = parser.parse_args()
    counts = [int(c) for c in args.partials.split(",")]

    f0 = per_sample_f0()
    fs = 48000.0
    if not HAVE_COMPILED:
        print("compiled extension not built; showing NumPy backend only")

    print(f"{'K':>4} {'numpy ms':>10} {'compiled ms':>12} "
          f"{'speedup':>8} {'max |diff|':>11}")
    for k in counts:
        amps = partial_amplitudes(k)
        py_out, _ = _kernels_py.oscillator_bank(f0, amps, fs)
        py_ms = best_of(
            lambda: _kernels_py.oscillator_bank(f0, amps, fs),
            args.repeats) * 1e3
        if _kernels is None:
            print(f"{k:>4} {py_ms:>10.2f} {'-':>12} {'-':>8} {'-':>11}")
            continue
        c_out, _ = _kernels.oscillator_bank(f0, amps, fs)
        c_ms = best_of(
            lambda: _kernels.oscillator_bank(f0, amps, fs),
            args.repeats) * 1e3
        diff = float(np.abs(py_out - c_out).max())
        print(f"{k:>4} {py_ms:>10.2f} {c_ms:>12.2f} "
              f"{py_ms / c_ms:>7.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
