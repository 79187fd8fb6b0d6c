"""Training-free contour classification by least-squares family fitting.

In the cents domain the contour model is affine given the modulator:
y(n) = b + d*psi(x(n)) with b the base pitch in cents above 25 Hz and d the
extent. For each family the fitter scans a coarse grid over (mod rate,
phase), solves (b, d) in closed form at every node, then refines the best
node with iterated local grids shrunk around the running argmin. Grid
refinement (rather than golden-section line search) is deliberate: for
square and sawtooth modulators the frame-sampled residual is piecewise
constant in (mod_hz, phase) with a flat zero-residual pocket at the truth,
which violates the unimodality a golden-section search relies on, while a
shrinking argmin grid converges onto the pocket unconditionally.

classify_contour fits all seven families and returns the lowest residual;
ties within 1e-9 cents go to the family with fewest free parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contours import (
    CENTS_REF_HZ,
    ContourParams,
    ContourType,
    PSI_BY_TYPE,
    PitchContour,
    eval_psi,
    hz_to_cents,
)

__all__ = ["ContourFit", "fit_contour", "fit_all", "classify_contour"]

MIN_VOICED_FRAMES = 50
TIE_BAND_CENTS = 1e-9

EXTENT_MAX_CENTS = 1200.0
_BASE_MAX_CENTS = hz_to_cents(10000.0)

# free-parameter search ranges (mod rate)
_FM_RANGE = {
    ContourType.ALTERNATING: (1.0, 50.0),
    ContourType.VIBRATO: (5.0, 100.0),
    ContourType.SAWTOOTH: (5.0, 100.0),
    ContourType.TRIANGLE: (5.0, 100.0),
}
_REVERSIBLE = (ContourType.GLISSANDO, ContourType.SAWTOOTH)

_COARSE_FM = 96
_COARSE_PHASE = 32
_REFINE_POINTS = 17
_REFINE_REL_TOL = 1e-7
_REFINE_MAX_ROUNDS = 24
_RESCUE_RESIDUAL_CENTS = 1.0
_RESCUE_STEP_CYCLES = 0.25  # linear fallback grid step, in cycles per clip

# simplest-first order used to break residual ties
_PRIORITY = (
    ContourType.STABLE,
    ContourType.GLISSANDO,
    ContourType.BEND,
    ContourType.ALTERNATING,
    ContourType.VIBRATO,
    ContourType.SAWTOOTH,
    ContourType.TRIANGLE,
)


@dataclass(frozen=True)
class ContourFit:
    """One family fitted to a trajectory; residual is RMS cents error."""

    kind: ContourType
    params: ContourParams
    residual_cents: float

    def __post_init__(self):
        if self.residual_cents < 0.0 or not np.isfinite(self.residual_cents):
            raise ValueError("residual_cents must be finite and >= 0")
        self.params.validate()


def _observed_cents(contour: PitchContour):
    """Voiced frame indices and their cents values; enforces the frame-count
    precondition."""
    idx = np.flatnonzero(contour.voicing)
    if idx.size < MIN_VOICED_FRAMES:
        raise ValueError(
            f"need at least {MIN_VOICED_FRAMES} voiced frames, got {idx.size}")
    return idx, hz_to_cents(contour.values[idx])


def _solve_affine(y_mean, yc_sq_mean, u_mean, u_sq_mean, u_yc_mean):
    """Closed-form least squares for y ~ b + d*u, with d and b clamped to
    their model ranges. Vectorized over grid axes.

    Moments involving y must be taken against the centered trajectory
    yc = y - mean(y); raw second moments of y (~1e7 cents^2) would drown
    sub-cent residuals in cancellation noise.

    Returns (b, d, rms).
    """
    u_var = u_sq_mean - u_mean * u_mean
    d = np.where(u_var > 1e-18,
                 u_yc_mean / np.where(u_var > 1e-18, u_var, 1.0), 0.0)
    d = np.clip(d, 0.0, EXTENT_MAX_CENTS)
    b = np.clip(y_mean - d * u_mean, 0.0, _BASE_MAX_CENTS)
    b_rel = b - y_mean
    sq = (yc_sq_mean + b_rel * b_rel + d * d * u_sq_mean
          - 2.0 * d * u_yc_mean + 2.0 * b_rel * d * u_mean)
    return b, d, np.sqrt(np.maximum(sq, 0.0))


def _modulator_grid(psi_kind, fm, phase_c, centered_t, dtype=np.float64):
    """psi evaluated on every (mod rate, centered phase) pair.

    ``phase_c`` is the phase at mid-clip; centering decouples the two axes
    (a mod-rate error no longer drags the best phase with it).
    Returns u with shape (len(fm), len(phase_c), len(centered_t)).
    """
    x = (np.asarray(fm, dtype=dtype)[:, None, None] * centered_t[None, None, :]
         + np.asarray(phase_c, dtype=dtype)[None, :, None])
    return eval_psi(psi_kind, x)


def _grid_residuals(u, y):
    n = y.size
    y_mean = y.mean()
    yc = y - y_mean
    u_mean = u.mean(axis=-1)
    u_sq_mean = np.einsum("...n,...n->...", u, u) / n
    return _solve_affine(y_mean, yc @ yc / n, u_mean, u_sq_mean, (u @ yc) / n)


_COARSE_CACHE: dict = {}
_COARSE_CACHE_MAX = 16


def _coarse_grid(psi_kind, fm_nodes, ph_nodes, centered_t, cacheable):
    """Coarse modulator grid with per-node moments.

    The grid depends only on the modulator family and the frame lattice, so
    with every frame voiced (``cacheable``) repeated fits over a dataset
    reuse one build; sparser voicing patterns are computed on the fly.
    """
    key = (psi_kind, float(fm_nodes[0]), float(fm_nodes[-1]), len(fm_nodes),
           len(ph_nodes), centered_t.size, float(centered_t[0]),
           float(centered_t[-1]))
    hit = _COARSE_CACHE.get(key) if cacheable else None
    if hit is None:
        u = _modulator_grid(psi_kind, fm_nodes, ph_nodes, centered_t,
                            dtype=np.float32)
        n = centered_t.size
        hit = (u, u.mean(axis=-1), np.einsum("fpn,fpn->fp", u, u) / n)
        if cacheable:
            if len(_COARSE_CACHE) >= _COARSE_CACHE_MAX:
                _COARSE_CACHE.pop(next(iter(_COARSE_CACHE)))
            _COARSE_CACHE[key] = hit
    return hit


def _fit_fixed_curve(kind, contour, reversed_flag=False):
    """Families with no free modulator: stable, glissando, bend."""
    idx, y = _observed_cents(contour)
    L = len(contour)
    duration = L / contour.frame_rate
    if reversed_flag:
        idx = (L - 1) - idx[::-1]
        y = y[::-1]
    n = y.size
    if kind == ContourType.STABLE:
        fm, phase = 1.0, 0.0
        b = float(np.clip(y.mean(), 0.0, _BASE_MAX_CENTS))
        d = 0.0
        rms = float(np.sqrt(np.maximum((y - b) ** 2, 0.0).mean()))
    else:
        fm, phase = (0.5, -0.25) if kind == ContourType.GLISSANDO else (1.0, -0.25)
        x = fm * duration * idx / L + phase
        u = eval_psi(PSI_BY_TYPE[kind], x)
        y_mean = y.mean()
        yc = y - y_mean
        b, d, rms = _solve_affine(y_mean, yc @ yc / n, u.mean(),
                                  u @ u / n, (u @ yc) / n)
        b, d, rms = float(b), float(d), float(rms)
    params = ContourParams(kind=kind, base_hz=CENTS_REF_HZ * 2.0 ** (b / 1200.0),
                           extent_cents=d, mod_hz=fm, phase=phase,
                           duration=duration, reversed=reversed_flag)
    return ContourFit(kind=kind, params=params, residual_cents=rms)


def _coarse_argmin(psi_kind, fm_nodes, ph_nodes, centered_t, y, cacheable):
    u, u_mean, u_sq_mean = _coarse_grid(psi_kind, fm_nodes, ph_nodes,
                                        centered_t, cacheable)
    y_mean = y.mean()
    yc32 = (y - y_mean).astype(np.float32)
    n = yc32.size
    _, _, rms = _solve_affine(y_mean, yc32 @ yc32 / n, u_mean, u_sq_mean,
                              (u @ yc32) / n)
    return np.unravel_index(int(np.argmin(rms)), rms.shape)


def _zoom(psi_kind, centered_t, y, lo, hi, p_lo, p_hi, log_fm_lo, log_fm_hi):
    """Iterated argmin grids over (log mod rate, mid-clip phase), shrinking
    the box around the running argmin until both axes converge."""
    best = None
    for _ in range(_REFINE_MAX_ROUNDS):
        lo = max(lo, log_fm_lo)
        hi = min(hi, log_fm_hi)
        fm = np.exp(np.linspace(lo, hi, _REFINE_POINTS))
        ph = np.linspace(p_lo, p_hi, _REFINE_POINTS)
        b, d, rms = _grid_residuals(
            _modulator_grid(psi_kind, fm, ph, centered_t), y)
        i, j = np.unravel_index(int(np.argmin(rms)), rms.shape)
        best = (float(fm[i]), float(ph[j]), float(b[i, j]), float(d[i, j]),
                float(rms[i, j]))
        width = (hi - lo) / (_REFINE_POINTS - 1)
        p_width = (p_hi - p_lo) / (_REFINE_POINTS - 1)
        if best[4] <= 1e-12 and width < 1e-5:
            break
        if width < _REFINE_REL_TOL and p_width < _REFINE_REL_TOL:
            break
        lo, hi = np.log(fm[i]) - 1.5 * width, np.log(fm[i]) + 1.5 * width
        p_lo, p_hi = ph[j] - 1.5 * p_width, ph[j] + 1.5 * p_width
    return best


def _fit_periodic(kind, contour, reversed_flag=False):
    """Families with a free (mod rate, phase): coarse grid, local
    refinement, and a dense fallback sweep when the coarse grid missed the
    basin."""
    idx, y = _observed_cents(contour)
    L = len(contour)
    duration = L / contour.frame_rate
    if reversed_flag:
        idx = (L - 1) - idx[::-1]
        y = y[::-1]
    psi_kind = PSI_BY_TYPE[kind]
    fm_lo, fm_hi = _FM_RANGE[kind]
    centered_t = duration * (idx / L - 0.5)
    cacheable = idx.size == L
    log_fm_lo, log_fm_hi = np.log(fm_lo), np.log(fm_hi)
    ph_nodes = np.arange(_COARSE_PHASE) / _COARSE_PHASE

    fm_nodes = np.geomspace(fm_lo, fm_hi, _COARSE_FM)
    i, j = _coarse_argmin(psi_kind, fm_nodes, ph_nodes, centered_t, y,
                          cacheable)
    log_step = np.log(fm_nodes[1] / fm_nodes[0])
    best = _zoom(psi_kind, centered_t, y,
                 np.log(fm_nodes[i]) - log_step, np.log(fm_nodes[i]) + log_step,
                 ph_nodes[j] - 1.5 / _COARSE_PHASE,
                 ph_nodes[j] + 1.5 / _COARSE_PHASE,
                 log_fm_lo, log_fm_hi)

    if best[4] > _RESCUE_RESIDUAL_CENTS:
        # The log-spaced coarse grid can step over the ~1/duration-wide
        # correlation basin at high mod rates; rescan on a linear grid fine
        # enough that the basin always holds a node, then refine again.
        step = _RESCUE_STEP_CYCLES / duration
        dense = np.arange(fm_lo, fm_hi + step, step)
        dense[-1] = min(dense[-1], fm_hi)
        i, j = _coarse_argmin(psi_kind, dense, ph_nodes, centered_t, y,
                              cacheable)
        pad = np.log1p(2.0 * step / dense[i])
        rescue = _zoom(psi_kind, centered_t, y,
                       np.log(dense[i]) - pad, np.log(dense[i]) + pad,
                       ph_nodes[j] - 1.5 / _COARSE_PHASE,
                       ph_nodes[j] + 1.5 / _COARSE_PHASE,
                       log_fm_lo, log_fm_hi)
        if rescue[4] < best[4]:
            best = rescue

    fm_best, phase_c, b, d, rms = best
    phase = (phase_c - fm_best * duration * 0.5) % 1.0
    params = ContourParams(kind=kind, base_hz=CENTS_REF_HZ * 2.0 ** (b / 1200.0),
                           extent_cents=d, mod_hz=fm_best, phase=phase,
                           duration=duration, reversed=reversed_flag)
    return ContourFit(kind=kind, params=params, residual_cents=rms)


def fit_contour(f0: PitchContour, kind: ContourType) -> ContourFit:
    """Best least-squares fit of one family; reversible families also try
    the time-flipped orientation and keep the better fit."""
    kind = ContourType(kind)
    fitter = (_fit_fixed_curve if kind in
              (ContourType.STABLE, ContourType.GLISSANDO, ContourType.BEND)
              else _fit_periodic)
    fit = fitter(kind, f0)
    if kind in _REVERSIBLE:
        flipped = fitter(kind, f0, reversed_flag=True)
        if flipped.residual_cents < fit.residual_cents:
            fit = flipped
    return fit


def fit_all(f0: PitchContour) -> dict:
    """Fits for every family, keyed by ContourType."""
    return {kind: fit_contour(f0, kind) for kind in ContourType}


def classify_contour(f0: PitchContour) -> ContourFit:
    """Minimum-residual family; ties within 1e-9 cents go to the simplest
    family (fewest free parameters)."""
    fits = fit_all(f0)
    floor = min(fit.residual_cents for fit in fits.values())
    for kind in _PRIORITY:
        if fits[kind].residual_cents <= floor + TIE_BAND_CENTS:
            return fits[kind]
    raise AssertionError("unreachable")
