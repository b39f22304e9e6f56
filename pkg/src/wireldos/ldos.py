"""k_z-resolved partial 2D-LDOS, adaptive spectra, and the decay-rate channels.

Normalization chain: the partial 2D-LDOS is
    rho_u(k_z) = -(2 k_z / pi) Im[ eps(r) (u . G . u) ],
and a rate in units of the free-space rate gamma_0 follows from
    gamma/gamma_0 = (3 pi / (eps1 k0)) * integral over k_z >= 0 of rho_u(k_z)/k_z
(band-restricted for the individual channels).  In a homogeneous lossless
medium this integral over the radiative band equals n1 exactly.

The guided plasmon enters either through the band integral or through the
closed form  gamma_pl/gamma_0 = n1 (3 pi lambda / (4 n1^3 k_spp)) rho_peak/L_spp,
which equals the Lorentzian-window integral up to O((HWHM/k_spp)^2).
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NumericalError, UsageError
from .green import ReflectedKernel, transverse_wavenumber
from .model import (Background, CrossSection, EmitterSpec, Mesh, SpectralPoint,
                    build_mesh, emitter_at_distance, lossless_variant,
                    validate_emitter)
from .modes import ModeInfo, fit_lorentzian, leaky_mode_split
from .scatter import assemble, delta_green_many

BRANCH_GUARD_K0 = 1e-3       # guard band around k_z = n_max k0, in units of k0
EVANESCENT_CEILING_K0 = 50.0
QUENCH_DISTANCE_UM = 0.005   # below this distance the e-h tail is genuinely divergent


def _u_vec(u):
    if isinstance(u, str):
        if u == "total":
            return None
        raise ValueError("string orientation must be 'total'; use model.orientation_vector")
    v = np.asarray(u, dtype=float)
    if v.shape != (3,):
        raise ValueError("orientation must be a 3-vector or 'total'")
    return v


def delta_rho2d(dg, kz, eps_at_emitter, u) -> float:
    """Partial 2D-LDOS of the guide contribution: -(2 kz/pi) Im[eps u.dG.u]."""
    t = dg.tensor if hasattr(dg, "tensor") else np.asarray(dg)
    v = _u_vec(u)
    proj = np.trace(t) if v is None else v @ t @ v
    return float(-(2.0 * kz / np.pi) * (eps_at_emitter * proj).imag)


def _ref_im_diag_hom(kz, eps1, k0):
    """Im of the coincidence-limit diagonal of the homogeneous dyad (lossless)."""
    k1sq = eps1.real * k0**2
    kt2 = k1sq - kz * kz
    if kt2 <= 0:
        return 0.0, 0.0
    im_xx = -0.25 + kt2 / (8.0 * k1sq)
    im_zz = -kt2 / (4.0 * k1sq)
    return im_xx, im_zz


def reference_rho(emitter: EmitterSpec, bg: Background, kz, sp: SpectralPoint,
                  u, refl_kernel: Optional[ReflectedKernel] = None) -> float:
    """Reference-system partial 2D-LDOS at the emitter (finite part).

    Only the imaginary part of the coincidence dyad enters; the homogeneous
    real-part divergence never appears.  For the two-layer background the
    surface-reflected coincidence term is added.
    """
    k0 = sp.k0
    eps1 = bg.eps1
    v = _u_vec(u)
    im_xx, im_zz = _ref_im_diag_hom(kz, eps1, k0)
    if v is None:
        im_proj = 2 * im_xx + im_zz
    else:
        im_proj = (v[0] ** 2 + v[1] ** 2) * im_xx + v[2] ** 2 * im_zz
    rho = -(2.0 * kz / np.pi) * eps1.real * im_proj
    if bg.kind == "two_layer":
        y = emitter.r[1]
        if y <= 0:
            raise DomainError("emitter must sit in the superstrate (y > 0)")
        kern = refl_kernel or ReflectedKernel(bg, sp, kz, y_min=2 * y)
        t = kern.eval(np.array([0.0]), np.array([2 * y]))[0]
        proj = np.trace(t) if v is None else v @ t @ v
        rho += -(2.0 * kz / np.pi) * (eps1 * proj).imag
    return float(rho)


@dataclass(frozen=True)
class LdosSpectrum:
    """Sampled spectrum Delta-rho_u(k_z) with its reference background."""

    emitter: EmitterSpec
    sp: SpectralPoint
    bg: Background
    u: tuple
    kz: np.ndarray            # strictly increasing, k_z >= 0
    delta_rho: np.ndarray
    rho_ref: np.ndarray
    levels: np.ndarray        # refinement level that produced each sample
    tail_converged: bool = True
    quenching_divergent: bool = False

    @property
    def n_max(self) -> float:
        return self.bg.n_max

    @property
    def k_branch(self) -> float:
        return self.n_max * self.sp.k0

    def band(self, lo, hi):
        sel = (self.kz >= lo) & (self.kz <= hi)
        return self.kz[sel], self.delta_rho[sel], self.rho_ref[sel]


class SpectrumEngine:
    """Shared k_z solver for a set of emitters over one mesh and background.

    One factorization per k_z serves every emitter; different k_z values are
    independent jobs (thread pool), reduced in sorted order for determinism.
    """

    def __init__(self, mesh: Mesh, bg: Background, sp: SpectralPoint,
                 emitters: Sequence[EmitterSpec], us=None, workers: int = 1):
        self.mesh, self.bg, self.sp = mesh, bg, sp
        self.emitters = list(emitters)
        self.us = [e.u_vec for e in emitters] if us is None else [
            (None if isinstance(u, str) and u == "total" else _u_vec(u)) for u in us]
        self.workers = max(1, int(workers))
        self.eps_em = [bg.eps_ref_at(e.r) for e in self.emitters]
        self._rows = {}          # kz -> (drho[n_em], ref[n_em])
        self._levels = {}

    def _solve_one(self, kz):
        y_min = None
        if self.bg.kind == "two_layer":
            y_em = min(e.r[1] for e in self.emitters)
            y_min = min(2.0 * y_em,
                        float(np.min(self.mesh.centers[:, 1])) + y_em)
        sys = assemble(self.mesh, self.bg, kz, self.sp, y_min=y_min)
        obs = np.array([e.r for e in self.emitters])
        dgs = delta_green_many(sys, obs)
        drho = np.empty(len(self.emitters))
        ref = np.empty(len(self.emitters))
        for i, dg in enumerate(dgs):
            uv = self.us[i]
            drho[i] = delta_rho2d(dg, kz, self.eps_em[i], uv if uv is not None else "total")
            ref[i] = reference_rho(self.emitters[i], self.bg, kz, self.sp,
                                   uv if uv is not None else "total",
                                   refl_kernel=sys.refl_kernel)
        return drho, ref

    def ensure(self, kzs, level: int):
        new = [kz for kz in np.unique(np.asarray(kzs, dtype=float))
               if not any(abs(kz - k) < 1e-12 * self.sp.k0 for k in self._rows)]
        if not new:
            return
        if self.workers > 1 and len(new) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as ex:
                results = list(ex.map(self._solve_one, new))
        else:
            results = [self._solve_one(kz) for kz in new]
        for kz, res in zip(new, results):
            self._rows[kz] = res
            self._levels[kz] = level

    def spectrum_arrays(self, i_emitter):
        kz = np.array(sorted(self._rows))
        drho = np.array([self._rows[k][0][i_emitter] for k in kz])
        ref = np.array([self._rows[k][1][i_emitter] for k in kz])
        lev = np.array([self._levels[k] for k in kz])
        return kz, drho, ref, lev


def _base_grid(k0, k_branch, k_max):
    guard = BRANCH_GUARD_K0 * k0
    rad = np.linspace(1e-4 * k0, k_branch - 32 * guard, 36)
    rad_cluster = k_branch - guard * np.array([16.0, 8.0, 4.0, 2.0, 1.0])
    ev_cluster = k_branch + guard * np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    ev = np.geomspace(k_branch + 64 * guard, k_max, 44)
    return np.unique(np.concatenate([rad, rad_cluster, ev_cluster, ev]))


def _fwhm_window_counts(kz, y, floor=0.0):
    """Strongest-peak location, FWHM estimate and sample count inside it."""
    from .modes import _baseline, _find_peaks, _half_width_estimate

    peaks = _find_peaks(kz, y, floor=floor)
    if not peaks:
        return None
    i = peaks[0]
    base = _baseline(y)
    hw = _half_width_estimate(kz, y, i, base)
    inside = np.sum(np.abs(kz - kz[i]) <= hw)
    return kz[i], hw, int(inside)


def _remaining_tail_fraction(kz, drho, k_branch, guard):
    """Estimate the uncollected tail of the evanescent integral of drho/kz,
    relative to its collected part, from the decay rate of the last samples."""
    sel = kz > k_branch + guard
    x = kz[sel]
    w = drho[sel] / x
    total = abs(np.trapz(w, x))
    if total == 0:
        return 0.0
    tail = np.abs(w[-6:])
    xs = x[-6:]
    if np.any(tail <= 0):
        return 1.0
    slope = np.polyfit(xs, np.log(tail), 1)[0]
    if slope >= 0:
        return 1.0
    remaining = tail[-1] / (-slope)
    return float(remaining / total)


def spectra_for_emitters(mesh: Mesh, bg: Background, sp: SpectralPoint,
                         emitters, us=None, k_max=None, tol=0.005,
                         workers=1, min_peak_samples=15, max_passes=14):
    """Adaptive shared-k_z spectra for several emitters (one mesh factorization
    per k_z).  Returns a list of LdosSpectrum in emitter order."""
    k0 = sp.k0
    k_branch = bg.n_max * k0
    if k_max is None:
        k_max = 12.0 * k0
    if not k_max > k_branch:
        raise UsageError("k_max must exceed n_max*k0")
    eng = SpectrumEngine(mesh, bg, sp, emitters, us=us, workers=workers)
    eng.ensure(_base_grid(k0, k_branch, k_max), level=0)

    guard = BRANCH_GUARD_K0 * k0
    # peak refinement until each emitter's dominant peak is resolved
    for pas in range(1, max_passes + 1):
        requests = []
        for i in range(len(eng.emitters)):
            kz, drho, ref, _ = eng.spectrum_arrays(i)
            info = _fwhm_window_counts(kz, drho, floor=1e-9 * np.max(np.abs(ref)))
            if info is None:
                continue
            x0, hw, inside = info
            if inside < min_peak_samples and hw > 1e-6 * k0:
                lo = max(x0 - 1.5 * hw, 1e-5 * k0)
                hi = x0 + 1.5 * hw
                pts = np.linspace(lo, hi, 2 * min_peak_samples + 1)
                pts = pts[np.abs(pts - k_branch) > guard]
                requests.append(pts)
        if not requests:
            break
        eng.ensure(np.concatenate(requests), level=pas)
    else:
        raise NumericalError("unresolved spectral peak at the refinement limit")

    # evanescent tail extension in octaves until each emitter's running
    # integral is within tol of converged (remaining-tail estimate)
    n_em = len(eng.emitters)
    converged = [False] * n_em
    k_end = k_max
    level = max_passes
    while True:
        for i in range(n_em):
            kz, drho, _, _ = eng.spectrum_arrays(i)
            converged[i] = _remaining_tail_fraction(kz, drho, k_branch, guard) < 0.005
        if all(converged) or k_end >= EVANESCENT_CEILING_K0 * k0:
            break
        new_end = min(2 * k_end, EVANESCENT_CEILING_K0 * k0)
        level += 1
        eng.ensure(np.geomspace(k_end, new_end, 9)[1:], level=level)
        k_end = new_end

    out = []
    for i, em in enumerate(eng.emitters):
        kz, drho, ref, lev = eng.spectrum_arrays(i)
        d = em.surface_distance
        quench = (not converged[i]) and d is not None and d <= QUENCH_DISTANCE_UM + 1e-12
        uv = eng.us[i]
        out.append(LdosSpectrum(
            emitter=em, sp=sp, bg=bg,
            u=tuple(uv) if uv is not None else ("total",),
            kz=kz, delta_rho=drho, rho_ref=ref, levels=lev,
            tail_converged=bool(converged[i]), quenching_divergent=quench))
    return out


def peak_window_spectra(mesh: Mesh, bg: Background, sp: SpectralPoint,
                        emitters, window, us=None, n0=41, workers=1,
                        min_peak_samples=15, max_passes=12):
    """Spectra sampled only inside a k_z window around an expected mode peak.

    Cheaper than a full spectrum when only the fitted mode parameters (and the
    closed-form plasmon rate) are needed.  Band integrals over these spectra
    are NOT meaningful.
    """
    k0 = sp.k0
    k_branch = bg.n_max * k0
    guard = BRANCH_GUARD_K0 * k0
    lo, hi = window
    eng = SpectrumEngine(mesh, bg, sp, emitters, us=us, workers=workers)
    pts = np.linspace(lo, hi, n0)
    eng.ensure(pts[np.abs(pts - k_branch) > guard], level=0)
    for pas in range(1, max_passes + 1):
        requests = []
        for i in range(len(eng.emitters)):
            kz, drho, ref, _ = eng.spectrum_arrays(i)
            info = _fwhm_window_counts(kz, drho, floor=1e-9 * np.max(np.abs(ref)))
            if info is None:
                continue
            x0, hw, inside = info
            if inside < min_peak_samples and hw > 1e-6 * k0:
                p = np.linspace(max(x0 - 1.5 * hw, lo), min(x0 + 1.5 * hw, hi),
                                2 * min_peak_samples + 1)
                requests.append(p[np.abs(p - k_branch) > guard])
        if not requests:
            break
        eng.ensure(np.concatenate(requests), level=pas)
    out = []
    for i, em in enumerate(eng.emitters):
        kz, drho, ref, lev = eng.spectrum_arrays(i)
        uv = eng.us[i]
        out.append(LdosSpectrum(
            emitter=em, sp=sp, bg=bg,
            u=tuple(uv) if uv is not None else ("total",),
            kz=kz, delta_rho=drho, rho_ref=ref, levels=lev))
    return out


def spectrum(emitter: EmitterSpec, mesh: Mesh, bg: Background, sp: SpectralPoint,
             u=None, k_max=None, tol=0.005, workers=1) -> LdosSpectrum:
    """Adaptive spectrum for a single emitter; see spectra_for_emitters."""
    us = None if u is None else [u]
    return spectra_for_emitters(mesh, bg, sp, [emitter], us=us, k_max=k_max,
                                tol=tol, workers=workers)[0]


# ---------------------------------------------------------------------------
# Band integration and channel decomposition
# ---------------------------------------------------------------------------

def _gamma_weight(eps1, k0):
    return 3.0 * np.pi / (eps1.real * k0)


def reference_band_integral(emitter: EmitterSpec, bg: Background, sp: SpectralPoint,
                            u, n_nodes=160) -> float:
    """Radiative-band integral of the reference density, in units of gamma_0.

    Gauss-Legendre over [0, n_max k0]; the integrand rho_ref/k_z is bounded.
    For a homogeneous lossless background this equals n1 (up to quadrature).
    """
    k0 = sp.k0
    hi = bg.n_max * k0
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    kzs = 0.5 * (x + 1) * hi
    wts = 0.5 * hi * w
    vals = np.array([reference_rho(emitter, bg, kz, sp, u) / kz for kz in kzs])
    return float(_gamma_weight(bg.eps1, k0) * np.sum(wts * vals))


def _band_trapz(kz, rho, eps1, k0, lo, hi):
    sel = (kz >= lo) & (kz <= hi)
    if sel.sum() < 2:
        return 0.0
    return float(_gamma_weight(eps1, k0) * np.trapz(rho[sel] / kz[sel], kz[sel]))


def _lorentz_density(mode: ModeInfo, kz):
    """Fitted mode density over the whole band.

    The (kz/k_spp) factor encodes the even pole pair at +-k_spp: the mode's
    density vanishes linearly at kz = 0, so the 1/kz rate conversion of the
    subtracted profile stays integrable and sums exactly to the closed-form
    plasmon weight.
    """
    lor = mode.amplitude * mode.hwhm**2 / ((kz - mode.k_spp) ** 2 + mode.hwhm**2)
    return lor * (kz / mode.k_spp)


def gamma_plasmon(mode: ModeInfo, rho_peak: float, sp: SpectralPoint, n1: float) -> float:
    """Closed-form guided-plasmon rate in units of gamma_0."""
    if rho_peak == 0.0:
        return 0.0
    lspp = mode.l_spp
    if lspp is None:
        raise UsageError("mode width below resolution; no finite L_spp")
    lam = sp.lambda_um
    return float(n1 * (3.0 * np.pi * lam / (4.0 * n1**3 * mode.k_spp)) * rho_peak / lspp)


def _has_radiative_peak(spec: LdosSpectrum) -> bool:
    info = _fwhm_window_counts(spec.kz, spec.delta_rho)
    return info is not None and info[0] < spec.k_branch


def gamma_radiative(spec: LdosSpectrum, mode: Optional[ModeInfo] = None):
    """(gamma_rad, gamma_scatt, gamma_pl_leak) from the radiative band.

    Bound (or guide-free) case: gamma_rad is the direct band integral of the
    total density and gamma_scatt = gamma_rad.  Leaky case: the fitted
    Lorentzian is removed from the band (gamma_scatt) and re-added as
    gamma_pl_leak = gamma_pl * Gamma_rad / Gamma_spp.
    """
    k0 = spec.sp.k0
    guard = BRANCH_GUARD_K0 * k0
    eps1 = spec.bg.eps1
    i_ref = reference_band_integral(spec.emitter, spec.bg, spec.sp,
                                    spec.u[0] if spec.u == ("total",) else spec.u)
    leaky = mode is not None and mode.kind == "leaky"
    if mode is None and _has_radiative_peak(spec):
        raise UsageError("radiative-band peak present: pass the fitted ModeInfo")

    if not leaky:
        i_delta = _band_trapz(spec.kz, spec.delta_rho, eps1, k0, 0.0,
                              spec.k_branch - guard)
        grad = i_ref + i_delta
        return grad, grad, 0.0

    if mode.gamma_rad_spp is None:
        raise UsageError("leaky mode lacks the lossless Gamma_rad split")
    n1 = spec.bg.n1
    gpl = gamma_plasmon(mode, mode.amplitude, spec.sp, n1)
    resid = spec.delta_rho - _lorentz_density(mode, spec.kz)
    gscatt = i_ref + _band_trapz(spec.kz, resid, eps1, k0, 0.0, spec.k_branch - guard)
    branch = mode.gamma_rad_spp / (mode.gamma_rad_spp + mode.gamma_nrad_spp)
    gleak = gpl * branch
    return gscatt + gleak, gscatt, gleak


def gamma_nonradiative(spec: LdosSpectrum, mode: Optional[ModeInfo] = None):
    """(gamma_NR, gamma_pl_NR, gamma_eh) from the evanescent band.

    The lossless reference contributes nothing beyond the light line; the
    electron-hole channel is the band integral after removing the fitted
    Lorentzian over the whole band.
    """
    if not spec.tail_converged and not spec.quenching_divergent:
        raise NumericalError(
            "evanescent tail not converged at the k_z ceiling; "
            "inspect the spectrum flags")
    k0 = spec.sp.k0
    guard = BRANCH_GUARD_K0 * k0
    eps1 = spec.bg.eps1
    lo = spec.k_branch + guard
    hi = float(spec.kz[-1])
    i_delta = _band_trapz(spec.kz, spec.delta_rho, eps1, k0, lo, hi)
    if mode is None:
        return i_delta, 0.0, i_delta
    n1 = spec.bg.n1
    gpl = gamma_plasmon(mode, mode.amplitude, spec.sp, n1)
    resid = spec.delta_rho - _lorentz_density(mode, spec.kz)
    i_eh = _band_trapz(spec.kz, resid, eps1, k0, lo, hi)
    if mode.kind == "leaky":
        if mode.gamma_rad_spp is None:
            raise UsageError("leaky mode lacks the lossless Gamma_rad split")
        frac_nr = mode.gamma_nrad_spp / (mode.gamma_rad_spp + mode.gamma_nrad_spp)
        g_pl_nr = gpl * frac_nr
        return g_pl_nr + i_eh, g_pl_nr, i_eh
    return i_delta, gpl, i_eh


@dataclass(frozen=True)
class RateBreakdown:
    """All decay channels in units of gamma_0, at one emitter distance."""

    d: float
    gamma_pl: float
    gamma_rad: float
    gamma_nr: float
    gamma_scatt: float
    gamma_pl_leak: float
    gamma_pl_nr: float
    gamma_eh: float
    beta: float

    @property
    def gamma_total(self) -> float:
        return self.gamma_rad + self.gamma_nr

    @property
    def beta_leak(self) -> float:
        return self.gamma_pl_leak / self.gamma_total if self.gamma_total > 0 else 0.0


def rate_breakdown(spec: LdosSpectrum, mode: Optional[ModeInfo]) -> RateBreakdown:
    """Assemble every channel for one spectrum (mode may be None for no guide)."""
    n1 = spec.bg.n1
    gpl = 0.0 if mode is None else gamma_plasmon(mode, mode.amplitude, spec.sp, n1)
    grad, gscatt, gleak = gamma_radiative(spec, mode)
    gnr, gplnr, geh = gamma_nonradiative(spec, mode)
    total = grad + gnr
    beta = gpl / total if total > 0 else 0.0
    d = spec.emitter.surface_distance
    return RateBreakdown(d=float(d) if d is not None else np.nan,
                         gamma_pl=gpl, gamma_rad=grad, gamma_nr=gnr,
                         gamma_scatt=gscatt, gamma_pl_leak=gleak,
                         gamma_pl_nr=gplnr, gamma_eh=geh, beta=beta)


def rate_sweep(distances_um, cs: CrossSection, bg: Background, sp: SpectralPoint,
               h: float, direction_rad=0.0, orientation="radial",
               k_max=None, tol=0.005, workers=1):
    """Full pipeline over emitter distances, sharing every k_z factorization.

    Returns (list of RateBreakdown, list of ModeInfo or None, list of LdosSpectrum).
    """
    mesh = build_mesh(cs, bg, h, sp)
    if np.any(np.asarray(distances_um) < h):
        raise DomainError("all emitter distances must be >= the mesh pitch h")
    emitters = [emitter_at_distance(cs, d, direction_rad, orientation)
                for d in distances_um]
    for em in emitters:
        validate_emitter(em, cs, mesh)
    specs = spectra_for_emitters(mesh, bg, sp, emitters, k_max=k_max, tol=tol,
                                 workers=workers)

    modes: list = []
    no_guide = bool(np.all(np.abs(mesh.delta_eps) == 0))
    for s in specs:
        if no_guide:
            modes.append(None)
            continue
        try:
            modes.append(fit_lorentzian(s))
        except Exception:
            modes.append(None)

    # leaky case: one lossless re-run shared by all emitters
    if any(m is not None and m.kind == "leaky" for m in modes):
        cs_ll = replace(cs, material=lossless_variant(cs.material))
        mesh_ll = build_mesh(cs_ll, bg, h, sp)
        m0 = next(m for m in modes if m is not None and m.kind == "leaky")
        span = max(10 * m0.hwhm, 0.02 * sp.k0)
        kzs = np.linspace(m0.k_spp - span, m0.k_spp + span, 41)
        eng = SpectrumEngine(mesh_ll, bg, sp, emitters, workers=workers)
        eng.ensure(kzs, level=0)
        for _ in range(10):
            kz0, dr0, ref0, _ = eng.spectrum_arrays(0)
            info = _fwhm_window_counts(kz0, dr0, floor=1e-9 * np.max(np.abs(ref0)))
            if info is None:
                break
            x0, hw, inside = info
            if inside >= 15 or hw <= 1e-6 * sp.k0:
                break
            eng.ensure(np.linspace(x0 - 1.5 * hw, x0 + 1.5 * hw, 31), level=1)
        for i, m in enumerate(modes):
            if m is None or m.kind != "leaky":
                continue
            kz, dr, rf, lv = eng.spectrum_arrays(i)
            ll_spec = LdosSpectrum(emitter=emitters[i], sp=sp, bg=bg,
                                   u=specs[i].u, kz=kz, delta_rho=dr,
                                   rho_ref=rf, levels=lv)
            modes[i] = leaky_mode_split(ll_spec, m)

    rates = [rate_breakdown(s, m) for s, m in zip(specs, modes)]
    return rates, modes, specs
