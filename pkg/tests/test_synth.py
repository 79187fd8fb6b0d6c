"""Synthesis: amplitude law, Nyquist budget, phase continuity, oracles.

Oracles are independent of the implementation: spectral peaks come from a
windowed FFT of the rendered audio, instantaneous frequency from the Hilbert
analytic phase, and the sample->frame map from its defining formula.
"""

import numpy as np
import pytest
import scipy.signal

from spckit.contours import ContourParams, ContourType, eval_contour
from spckit.synth import (
    DEFAULT_SAMPLE_RATE,
    HAVE_COMPILED,
    PEAK_LEVEL,
    AudioClip,
    frame_of_sample,
    max_partials,
    partial_amplitude,
    partial_amplitudes,
    render_samples,
    synthesize,
)
from spckit import _kernels_py

if HAVE_COMPILED:
    from spckit import _kernels


def _vibrato(base=440.0, extent=300.0, mod=7.0, phase=0.3, duration=1.0):
    return eval_contour(ContourParams(
        kind=ContourType.VIBRATO, base_hz=base, extent_cents=extent,
        mod_hz=mod, phase=phase, duration=duration))


# ---------------------------------------------------------------------------
# amplitude law and partial budget


def test_partial_amplitudes_frozen():
    assert partial_amplitude(1) == 1.0
    assert partial_amplitude(2) == pytest.approx(1.0 / np.pi, rel=1e-12)
    assert partial_amplitude(3) == pytest.approx(-2.0 / (3 * np.pi), rel=1e-12)
    amps = partial_amplitudes(5)
    assert amps[0] == 1.0
    np.testing.assert_allclose(
        amps[1:], [2 / (2 * np.pi), -2 / (3 * np.pi),
                   2 / (4 * np.pi), -2 / (5 * np.pi)], rtol=1e-12)
    with pytest.raises(ValueError):
        partial_amplitude(0)


def test_max_partials_frozen():
    assert max_partials(10000.0, 48000) == 2
    assert max_partials(440.0, 48000) == 54
    assert max_partials(25.0, 48000) == 960
    assert max_partials(24000.0, 48000) == 1
    with pytest.raises(ValueError):
        max_partials(24001.0, 48000)
    with pytest.raises(ValueError):
        max_partials(0.0, 48000)


def test_synthesize_rejects_aliasing_budget():
    c = _vibrato(base=5000.0, extent=0.0)
    limit = max_partials(5000.0)
    synthesize(c, limit)
    with pytest.raises(ValueError):
        synthesize(c, limit + 1)


# ---------------------------------------------------------------------------
# sample <-> frame map


def test_frame_of_sample_map():
    idx = frame_of_sample(1000, 48000)
    assert idx[0] == 0
    assert idx[-1] == 999
    assert np.all(np.diff(idx) >= 0)
    # 48 samples per frame exactly
    _, counts = np.unique(idx, return_counts=True)
    assert np.all(counts == 48)
    # ragged case still covers all frames
    idx = frame_of_sample(700, 48000)
    assert idx[0] == 0 and idx[-1] == 699
    assert len(np.unique(idx)) == 700


# ---------------------------------------------------------------------------
# rendered clip basics


def test_clip_shape_and_peak():
    clip = synthesize(_vibrato(), 10)
    assert clip.sample_rate == DEFAULT_SAMPLE_RATE
    assert len(clip) == 48000
    assert np.abs(clip.samples).max() == pytest.approx(PEAK_LEVEL, rel=1e-12)
    half = synthesize(_vibrato(duration=0.5), 4)
    assert len(half) == 24000


def test_audio_clip_validation():
    with pytest.raises(ValueError):
        AudioClip(sample_rate=0, samples=np.zeros(4))
    with pytest.raises(ValueError):
        AudioClip(sample_rate=48000, samples=np.zeros((2, 2)))


# ---------------------------------------------------------------------------
# spectral oracle


def test_spectral_peaks_match_partial_stack():
    # stable 440 Hz, 3 partials: lines at 440/880/1320 with the 1, 1/pi,
    # 2/(3*pi) magnitude law
    c = eval_contour(ContourParams(
        kind=ContourType.STABLE, base_hz=440.0, extent_cents=0.0,
        mod_hz=1.0, phase=0.0))
    clip = synthesize(c, 3)
    w = scipy.signal.get_window("hann", len(clip), fftbins=True)
    spec = np.abs(np.fft.rfft(clip.samples * w))
    freqs = np.fft.rfftfreq(len(clip), 1.0 / clip.sample_rate)

    def peak_near(f):
        band = (freqs > f - 5) & (freqs < f + 5)
        i = np.argmax(spec[band])
        return freqs[band][i], spec[band][i]

    f1, m1 = peak_near(440.0)
    f2, m2 = peak_near(880.0)
    f3, m3 = peak_near(1320.0)
    assert f1 == pytest.approx(440.0, abs=1.5)
    assert f2 == pytest.approx(880.0, abs=1.5)
    assert f3 == pytest.approx(1320.0, abs=1.5)
    assert m2 / m1 == pytest.approx(1.0 / np.pi, rel=0.02)
    assert m3 / m1 == pytest.approx(2.0 / (3 * np.pi), rel=0.02)
    # nothing above the last partial
    above = freqs > 1500.0
    assert spec[above].max() < m1 * 1e-3


def test_no_energy_above_nyquist_budget():
    # K at the budget edge: highest partial stays at/below Nyquist, so the
    # band just below Nyquist holds only rounding noise once K*f0 < band.
    c = eval_contour(ContourParams(
        kind=ContourType.STABLE, base_hz=997.0, extent_cents=0.0,
        mod_hz=1.0, phase=0.0))
    clip = synthesize(c, 20)  # top partial at 19.94 kHz
    spec = np.abs(np.fft.rfft(clip.samples * np.hanning(len(clip))))
    freqs = np.fft.rfftfreq(len(clip), 1.0 / clip.sample_rate)
    assert spec[freqs > 20500.0].max() < spec.max() * 1e-6


# ---------------------------------------------------------------------------
# instantaneous-frequency oracle


def _quadrature_phase(contour, sample_rate=DEFAULT_SAMPLE_RATE):
    # exact analytic phase: K=1 render plus a quarter-cycle-advanced twin
    # (phase carry of fs/4 turns sin into cos), atan2, unwrap
    x_sin, _ = render_samples(contour, 1, sample_rate)
    x_cos, _ = render_samples(contour, 1, sample_rate,
                              phase_carry=sample_rate / 4.0)
    return np.unwrap(np.arctan2(x_sin, x_cos))


def _frame_if(phase, hop):
    # increment j belongs to frame j // hop, so spans [hop*i, hop*i+hop-1]
    # read exactly one frame; frame 0 is dropped (no sample -1)
    bounds = phase[hop - 1::hop]
    return np.diff(bounds) * (48000 / (2 * np.pi * hop))


def test_quadrature_phase_if_exact_even_at_jumps():
    # worst case for any spectral estimator: fast large square-wave FM
    c = eval_contour(ContourParams(
        kind=ContourType.ALTERNATING, base_hz=100.0, extent_cents=1200.0,
        mod_hz=50.0, phase=0.37))
    est = _frame_if(_quadrature_phase(c), 48)
    err_cents = 1200 * np.log2(est / c.values[1:1 + len(est)])
    assert np.abs(err_cents).max() < 1e-6


def test_hilbert_agrees_with_quadrature_on_smooth_clip():
    # anchors the quadrature construction to an independent estimator in
    # the domain where the Hilbert transform is a valid quadrature
    c = _vibrato(base=440.0, extent=300.0, mod=7.0)
    x, _ = render_samples(c, 1)
    taper = scipy.signal.windows.tukey(len(x), alpha=2 * 2000 / len(x))
    ph_hilbert = np.unwrap(np.angle(scipy.signal.hilbert(x * taper)))
    ph_quad = _quadrature_phase(c)
    est_h = _frame_if(ph_hilbert, 48)
    est_q = _frame_if(ph_quad, 48)
    core = slice(60, -60)
    diff_cents = 1200 * np.log2(est_h[core] / est_q[core])
    assert np.abs(diff_cents).max() < 1.0
    err = 1200 * np.log2(est_q / c.values[1:1 + len(est_q)])
    assert np.abs(err).max() < 1e-6


# ---------------------------------------------------------------------------
# phase continuity / chunked rendering


def test_chunked_render_bit_identical():
    rng = np.random.default_rng(808)
    for _ in range(5):
        c = _vibrato(base=float(rng.uniform(100, 2000)),
                     extent=float(rng.uniform(0, 1200)),
                     mod=float(rng.uniform(1, 80)))
        k = int(rng.integers(1, max_partials(float(c.values.max())) + 1))
        full, carry_full = render_samples(c, k)
        cut = int(rng.integers(1, len(full)))
        a, carry = render_samples(c, k, stop=cut)
        b, carry_end = render_samples(c, k, start=cut, phase_carry=carry)
        joined = np.concatenate([a, b])
        assert np.array_equal(joined, full)
        assert carry_end == carry_full


def test_three_way_chunking_bit_identical():
    c = _vibrato()
    full, _ = render_samples(c, 8)
    out, carry, pos = [], 0.0, 0
    for cut in (11111, 30000, len(full)):
        seg, carry = render_samples(c, 8, start=pos, stop=cut,
                                    phase_carry=carry)
        out.append(seg)
        pos = cut
    assert np.array_equal(np.concatenate(out), full)


def test_first_difference_bounded():
    # |x(j+1) - x(j)| <= 2*pi*K*f0max/fs * peak: chord <= arc per partial.
    rng = np.random.default_rng(909)
    for _ in range(5):
        c = _vibrato(base=float(rng.uniform(50, 4000)),
                     extent=float(rng.uniform(0, 1200)))
        k = int(rng.integers(1, max_partials(float(c.values.max())) + 1))
        clip = synthesize(c, k)
        bound = 2 * np.pi * k * c.values.max() / clip.sample_rate * PEAK_LEVEL
        assert np.abs(np.diff(clip.samples)).max() <= bound * (1 + 1e-9)


# ---------------------------------------------------------------------------
# backend agreement


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernel not built")
def test_backends_agree():
    rng = np.random.default_rng(111)
    f0 = np.exp(rng.uniform(np.log(25), np.log(10000), size=20000))
    for k in (1, 7, 200):
        amps = partial_amplitudes(k)
        out_c, carry_c = _kernels.oscillator_bank(f0, amps, 48000.0, 0.0)
        out_p, carry_p = _kernels_py.oscillator_bank(f0, amps, 48000.0, 0.0)
        np.testing.assert_allclose(out_c, out_p, atol=5e-9)
        assert carry_c == pytest.approx(carry_p, rel=1e-15)


def test_kernel_rejects_bad_args():
    for mod in ([_kernels] if HAVE_COMPILED else []) + [_kernels_py]:
        with pytest.raises(ValueError):
            mod.oscillator_bank(np.ones(4), np.empty(0), 48000.0, 0.0)
        with pytest.raises(ValueError):
            mod.oscillator_bank(np.ones(4), np.ones(1), 0.0, 0.0)
