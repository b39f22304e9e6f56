import numpy as np
import pytest

import wireldos as w
from wireldos.errors import NoModeError, UsageError
from wireldos.ldos import LdosSpectrum, peak_window_spectra
from wireldos.modes import fit_lorentzian, leaky_mode_split

SP = w.SpectralPoint(1.0)
K0 = SP.k0
BG = w.Background.homogeneous(2.0)
EM = w.EmitterSpec(position=(0.07, 0.0), u=(1, 0, 0), surface_distance=0.05)


def _spec(kz, y, bg=BG):
    return LdosSpectrum(emitter=EM, sp=SP, bg=bg, u=(1, 0, 0), kz=kz,
                        delta_rho=y, rho_ref=np.zeros_like(y),
                        levels=np.zeros(len(kz), dtype=int))


def test_synthetic_recovery():
    amp, x0, hw = 480.0, 2.28 * K0, 0.4167
    b0, b1 = 2.0, 0.1
    kz = np.linspace(1.6 * K0, 3.0 * K0, 900)
    y = amp * hw**2 / ((kz - x0) ** 2 + hw**2) + b0 + b1 * (kz - x0)
    m = fit_lorentzian(_spec(kz, y))
    assert m.amplitude == pytest.approx(amp, rel=1e-6)
    assert m.k_spp == pytest.approx(x0, rel=1e-8)
    assert m.hwhm == pytest.approx(hw, rel=1e-6)
    assert m.l_spp == pytest.approx(1 / (2 * hw), rel=1e-6)
    assert m.gamma_spp == pytest.approx(2 * hw, rel=1e-6)
    assert m.kind == "bound"
    assert m.residual_rms < 1e-8


def test_no_peak_raises():
    kz = np.linspace(0.1 * K0, 3 * K0, 200)
    with pytest.raises(NoModeError):
        fit_lorentzian(_spec(kz, np.full(200, 2.0)))


def test_multiple_peaks_strongest_wins():
    kz = np.linspace(1.2 * K0, 3.4 * K0, 1200)
    big = 500.0 * 0.4**2 / ((kz - 2.3 * K0) ** 2 + 0.4**2)
    small = 120.0 * 0.3**2 / ((kz - 2.9 * K0) ** 2 + 0.3**2)
    with pytest.warns(UserWarning, match="multiple"):
        m = fit_lorentzian(_spec(kz, big + small))
    assert m.k_spp == pytest.approx(2.3 * K0, rel=1e-3)
    assert len(m.extra_peaks) == 1
    assert m.extra_peaks[0] == pytest.approx(2.9 * K0, rel=1e-2)


def test_below_resolution_flag():
    kz = np.linspace(2.0 * K0, 2.6 * K0, 61)   # step 0.01 k0
    hw = 0.001 * K0
    y = 300.0 * hw**2 / ((kz - 2.3001 * K0) ** 2 + hw**2) + 1.0
    m = fit_lorentzian(_spec(kz, y))
    assert m.below_resolution
    assert m.l_spp is None and m.gamma_spp is None


def test_benchmark_mode(benchmark_spectrum):
    m = benchmark_spectrum["mode"]
    assert abs(m.n_eff - 2.28) / 2.28 < 0.02
    assert abs(m.l_spp - 1.2) / 1.2 < 0.15
    assert m.kind == "bound"
    assert m.residual_rms < 0.05


def test_neff_independent_of_distance(benchmark):
    b = benchmark
    ems = [w.emitter_at_distance(b["cs"], d, 0.0, "radial")
           for d in (0.020, 0.050, 0.100)]
    specs = peak_window_spectra(b["mesh"], b["bg"], b["sp"], ems,
                                window=(2.0 * K0, 2.6 * K0), workers=2)
    neffs = [fit_lorentzian(s).n_eff for s in specs]
    assert max(neffs) - min(neffs) <= 0.01 * np.mean(neffs)


def test_leaky_split_synthetic():
    kz = np.linspace(1.0 * K0, 1.5 * K0, 800)
    bg = w.Background.two_layer(1.0, 2.25)
    hw_lossy, hw_ll = 0.45, 0.37
    lossy = 60.0 * hw_lossy**2 / ((kz - 1.28 * K0) ** 2 + hw_lossy**2)
    lossless = 80.0 * hw_ll**2 / ((kz - 1.28 * K0) ** 2 + hw_ll**2)
    m = fit_lorentzian(_spec(kz, lossy, bg))
    assert m.kind == "leaky"
    m2 = leaky_mode_split(_spec(kz, lossless, bg), m)
    assert m2.gamma_rad_spp == pytest.approx(2 * hw_ll, rel=1e-4)
    assert m2.gamma_nrad_spp == pytest.approx(2 * (hw_lossy - hw_ll), rel=1e-3)


def test_leaky_split_requires_leaky():
    kz = np.linspace(1.9 * K0, 2.7 * K0, 400)
    y = 100.0 * 0.4**2 / ((kz - 2.3 * K0) ** 2 + 0.4**2)
    m = fit_lorentzian(_spec(kz, y))
    with pytest.raises(UsageError):
        leaky_mode_split(_spec(kz, y), m)


def test_leaky_split_clamps_negative():
    kz = np.linspace(1.0 * K0, 1.5 * K0, 800)
    bg = w.Background.two_layer(1.0, 2.25)
    lossy = 60.0 * 0.30**2 / ((kz - 1.28 * K0) ** 2 + 0.30**2)
    wider = 60.0 * 0.40**2 / ((kz - 1.28 * K0) ** 2 + 0.40**2)
    m = fit_lorentzian(_spec(kz, lossy, bg))
    with pytest.warns(UserWarning, match="clamping"):
        m2 = leaky_mode_split(_spec(kz, wider, bg), m)
    assert m2.gamma_nrad_spp == 0.0
