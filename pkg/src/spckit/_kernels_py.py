"""Pure-NumPy additive-synthesis kernel.

Fallback used when the compiled extension is unavailable. Keeps the exact
operation order of the compiled kernel (sequential running sum, phase
reduction, Chebyshev recurrence over partials) so each backend is
bit-reproducible on its own.
"""

import numpy as np

__all__ = ["oscillator_bank"]


def oscillator_bank(f0, amps, sample_rate, phase_carry=0.0):
    """Render ``sum_k amps[k-1] * sin(k * phi(j))`` with running phase.

    Parameters
    ----------
    f0 : float64[M]
        Per-sample fundamental in Hz.
    amps : float64[K]
        Partial amplitudes, fundamental first.
    sample_rate : float
    phase_carry : float
        Raw running f0 sum carried in from the previous chunk.

    Returns
    -------
    (ndarray, float)
        Unnormalized samples and the carry to resume from.
    """
    f0 = np.ascontiguousarray(f0, dtype=np.float64)
    amps = np.ascontiguousarray(amps, dtype=np.float64)
    if amps.size < 1:
        raise ValueError("need at least one partial amplitude")
    if sample_rate <= 0.0:
        raise ValueError("sample_rate must be positive")
    if f0.size == 0:
        return np.empty(0, dtype=np.float64), float(phase_carry)
    # folding the carry into the first term keeps the addition order of a
    # single uninterrupted run, which makes chunked rendering bit-identical
    work = f0.copy()
    work[0] += phase_carry
    acc = np.cumsum(work)
    cyc = acc / sample_rate
    phi = (2.0 * np.pi) * (cyc - np.floor(cyc))
    s1 = np.sin(phi)
    out = amps[0] * s1
    if amps.size > 1:
        twoc = 2.0 * np.cos(phi)
        skm2 = np.zeros_like(s1)
        skm1 = s1
        for k in range(1, amps.size):
            sk = twoc * skm1 - skm2
            out += amps[k] * sk
            skm2, skm1 = skm1, sk
    return out, float(acc[-1])
