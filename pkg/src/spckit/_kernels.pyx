# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled additive-synthesis kernel.

Mirrors :mod:`spckit._kernels_py` operation for operation: same running-sum
order, same phase reduction, same Chebyshev partial recurrence. Outputs of
the two backends agree to float rounding but are only guaranteed
bit-reproducible within one backend.
"""

import numpy as np

from libc.math cimport M_PI, cos, floor, sin


def oscillator_bank(const double[::1] f0, const double[::1] amps,
                    double sample_rate, double phase_carry=0.0):
    """Render sum_k amps[k-1] * sin(k * phi(j)) with running phase.

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
    cdef Py_ssize_t m = f0.shape[0]
    cdef Py_ssize_t kmax = amps.shape[0]
    if kmax < 1:
        raise ValueError("need at least one partial amplitude")
    if sample_rate <= 0.0:
        raise ValueError("sample_rate must be positive")
    out_arr = np.empty(m, dtype=np.float64)
    if m == 0:
        return out_arr, float(phase_carry)
    cdef double[::1] out = out_arr
    cdef double acc = phase_carry
    cdef double two_pi = 2.0 * M_PI
    cdef double cyc, phi, s1, twoc, sk, skm1, skm2, y
    cdef Py_ssize_t j, k
    for j in range(m):
        acc = acc + f0[j]
        cyc = acc / sample_rate
        # phase reduced to [0, 2*pi) before evaluation; the carry stays raw
        phi = two_pi * (cyc - floor(cyc))
        s1 = sin(phi)
        y = amps[0] * s1
        if kmax > 1:
            twoc = 2.0 * cos(phi)
            skm2 = 0.0
            skm1 = s1
            for k in range(1, kmax):
                sk = twoc * skm1 - skm2
                y = y + amps[k] * sk
                skm2 = skm1
                skm1 = sk
        out[j] = y
    return out_arr, acc
