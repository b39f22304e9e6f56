"""Guided-mode extraction: Lorentzian fit of the k_z spectrum and the
lossless re-run that splits a leaky mode's decay into radiative and ohmic parts."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .errors import NoModeError, UsageError


@dataclass(frozen=True)
class ModeInfo:
    """Fitted guided-mode parameters in the k_z spectrum.

    L_spp is the 1/e intensity propagation length, 1/(2 HWHM) of the fitted
    Lorentzian; Gamma_spp = 1/L_spp.  For a leaky mode (n_eff < n_max) the
    total decay splits as Gamma_spp = Gamma_rad + Gamma_nrad, with Gamma_rad
    measured on the lossless re-run.
    """

    k_spp: float              # rad/um
    n_eff: float
    hwhm: float               # rad/um
    amplitude: float          # peak delta-rho value (baseline removed)
    kind: str                 # "bound" | "leaky"
    residual_rms: float       # fit residual RMS / peak amplitude
    window: tuple             # (kz_lo, kz_hi) of the fit window
    baseline: tuple = (0.0, 0.0)
    gamma_rad_spp: Optional[float] = None   # 1/um, leaky split
    gamma_nrad_spp: Optional[float] = None  # 1/um
    extra_peaks: tuple = ()   # k_z of weaker peaks, flagged not fitted
    below_resolution: bool = False  # HWHM under the local grid step

    @property
    def l_spp(self) -> Optional[float]:
        if self.below_resolution:
            return None
        return 1.0 / (2.0 * self.hwhm)

    @property
    def gamma_spp(self) -> Optional[float]:
        if self.below_resolution:
            return None
        return 2.0 * self.hwhm


def _lorentz(p, x):
    amp, x0, hw, b0, b1 = p
    return amp * hw**2 / ((x - x0) ** 2 + hw**2) + b0 + b1 * (x - x0)


def _baseline(y):
    """Off-resonant level estimate; a low quantile survives windows where
    refinement has concentrated most samples on the peak itself."""
    return float(np.percentile(y, 10))


def _find_peaks(kz, y, floor=0.0):
    """Local maxima above 3x the local baseline (and any absolute noise
    floor), strongest first."""
    n = len(y)
    base = abs(_baseline(y))
    peaks = []
    for i in range(1, n - 1):
        if (y[i] >= y[i - 1] and y[i] >= y[i + 1] and y[i] > 3 * base
                and y[i] > floor and y[i] > 0):
            peaks.append(i)
    if not peaks:
        return []
    # merge plateaus / adjacent samples of the same peak
    merged = []
    for i in sorted(peaks, key=lambda j: -y[j]):
        if all(abs(kz[i] - kz[j]) > 0.02 * (kz[-1] - kz[0]) for j in merged):
            merged.append(i)
    return merged


def _half_width_estimate(kz, y, i, base):
    target = base + 0.5 * (y[i] - base)
    lo = i
    while lo > 0 and y[lo] > target:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi] > target:
        hi += 1
    return max(0.5 * (kz[hi] - kz[lo]), 0.5 * np.min(np.diff(kz)))


def fit_lorentzian(spec) -> ModeInfo:
    """Fit the dominant spectral peak with a Lorentzian plus affine baseline.

    The window is +-5 FWHM around the peak, iterated once from a moment
    estimate.  Raises NoModeError when no sample rises 3x above the baseline.
    """
    kz = np.asarray(spec.kz)
    y = np.asarray(spec.delta_rho)
    if len(kz) < 7:
        raise NoModeError("spectrum too short to fit")
    # the reference density sets the physical scale; anything far below it is
    # round-off (e.g. the exactly-real lossless bound problem)
    floor = 1e-9 * float(np.max(np.abs(np.asarray(spec.rho_ref))))
    peaks = _find_peaks(kz, y, floor=floor)
    if not peaks:
        raise NoModeError("no peak above 3x baseline in the spectrum")
    i = peaks[0]
    extra = tuple(float(kz[j]) for j in peaks[1:])
    if extra:
        warnings.warn(f"multiple spectral peaks; fitting the strongest, others at "
                      f"kz={np.round(extra, 4)}", stacklevel=2)

    base = _baseline(y)
    hw = _half_width_estimate(kz, y, i, base)
    x0 = float(kz[i])
    for _ in range(3):
        sel = (kz > x0 - 10 * hw) & (kz < x0 + 10 * hw)
        if sel.sum() < 7:
            sel = slice(None)
        xs, ys = kz[sel], y[sel]
        p0 = np.array([max(y[i] - base, 1e-300), x0, hw, base, 0.0])
        scale = np.array([abs(p0[0]), max(abs(x0), 1.0), max(hw, 1e-6),
                          max(abs(base), 1e-3 * p0[0]), p0[0]])
        res = least_squares(lambda p: _lorentz(p, xs) - ys, p0, x_scale=scale,
                            max_nfev=20000)
        amp, x0, hw, b0, b1 = res.x
        hw = abs(hw)
        if amp <= 0:
            raise NoModeError("fit collapsed to non-positive amplitude")
    sel = (kz > x0 - 10 * hw) & (kz < x0 + 10 * hw)
    xs, ys = kz[sel], y[sel]
    rms = float(np.sqrt(np.mean((_lorentz(res.x, xs) - ys) ** 2)) / amp)

    k0 = spec.sp.k0
    n_eff = x0 / k0
    n_max = spec.n_max
    grid_step = float(np.min(np.diff(kz[max(0, np.searchsorted(kz, x0) - 8):
                                        np.searchsorted(kz, x0) + 8]))) \
        if len(kz) > 16 else float(np.min(np.diff(kz)))
    below = hw < 0.5 * grid_step
    return ModeInfo(k_spp=float(x0), n_eff=float(n_eff), hwhm=float(hw),
                    amplitude=float(amp),
                    kind="leaky" if n_eff < n_max else "bound",
                    residual_rms=rms, window=(float(xs[0]), float(xs[-1])),
                    baseline=(float(b0), float(b1)), extra_peaks=extra,
                    below_resolution=bool(below))


def leaky_mode_split(lossless_spectrum, mode: ModeInfo) -> ModeInfo:
    """Attach (Gamma_rad, Gamma_nrad) to a leaky mode from its lossless re-run.

    lossless_spectrum: the same configuration re-solved with the guide
    material's losses cancelled; its fitted width is pure leakage.
    """
    if mode.kind != "leaky":
        raise UsageError("leaky_mode_split applies to leaky modes only")
    try:
        m0 = fit_lorentzian(lossless_spectrum)
    except NoModeError as exc:
        raise NoModeError(f"lossless re-run lost the mode: {exc}") from exc
    gam = mode.gamma_spp
    gam_rad = m0.gamma_spp
    if gam is None or gam_rad is None:
        raise UsageError("mode width below grid resolution; cannot split")
    gam_nrad = gam - gam_rad
    if gam_nrad < 0:
        if gam_nrad < -0.05 * gam:
            warnings.warn(
                f"lossless width {gam_rad:.4g} exceeds lossy width {gam:.4g} beyond "
                "tolerance; clamping Gamma_nrad to 0", stacklevel=2)
        gam_nrad = 0.0
    return ModeInfo(k_spp=mode.k_spp, n_eff=mode.n_eff, hwhm=mode.hwhm,
                    amplitude=mode.amplitude, kind=mode.kind,
                    residual_rms=mode.residual_rms, window=mode.window,
                    baseline=mode.baseline, extra_peaks=mode.extra_peaks,
                    below_resolution=mode.below_resolution,
                    gamma_rad_spp=float(gam_rad), gamma_nrad_spp=float(gam_nrad))
