import numpy as np
import pytest

import wireldos as w

WORKERS = 2


@pytest.fixture(scope="session")
def benchmark():
    """Bound-mode benchmark: R=20 nm silver-like wire in eps1=2 at 1 um."""
    sp = w.SpectralPoint(1.0)
    eps2 = -50.0 + 3.85j
    cs = w.CrossSection.circle(w.Material.constant(eps2), 0.020)
    bg = w.Background.homogeneous(2.0)
    mesh = w.build_mesh(cs, bg, 0.002, sp)
    kz_root = w.circular_dispersion_root(0.020, 2.0, -50.0, sp)
    return dict(sp=sp, eps1=2.0, eps2=eps2, R=0.020, cs=cs, bg=bg, mesh=mesh,
                kz_root=kz_root)


@pytest.fixture(scope="session")
def benchmark_spectrum(benchmark):
    """Full adaptive spectrum at d = 50 nm, h = 2 nm, radial dipole."""
    b = benchmark
    em = w.emitter_at_distance(b["cs"], 0.050, 0.0, "radial")
    spec = w.spectrum(em, b["mesh"], b["bg"], b["sp"], workers=WORKERS)
    mode = w.fit_lorentzian(spec)
    return dict(emitter=em, spec=spec, mode=mode, **b)


@pytest.fixture(scope="session")
def benchmark_sweep(benchmark):
    """Distance sweep on a fine mesh (h = 1.25 nm) for the rate criteria."""
    b = benchmark
    distances = [0.005, 0.010, 0.015, 0.020, 0.030, 0.050, 0.075, 0.100,
                 0.150, 0.175]
    rates, modes, specs = w.rate_sweep(distances, b["cs"], b["bg"], b["sp"],
                                       h=0.00125, workers=WORKERS)
    return dict(distances=distances, rates=rates, modes=modes, specs=specs, **b)


@pytest.fixture(scope="session")
def leaky_run():
    """Leaky benchmark: 100 nm diameter wire 50 nm above glass, emitter in
    the gap (d = 25 nm, vertical dipole)."""
    sp = w.SpectralPoint(1.0)
    eps2 = -50.0 + 3.85j
    cs = w.CrossSection.circle(w.Material.constant(eps2), 0.050,
                               center=(0.0, 0.100))
    bg = w.Background.two_layer(1.0, 2.25)
    rates, modes, specs = w.rate_sweep([0.025], cs, bg, sp, h=0.005,
                                       direction_rad=-np.pi / 2,
                                       orientation="radial", workers=WORKERS)
    return dict(sp=sp, cs=cs, bg=bg, eps2=eps2, rate=rates[0], mode=modes[0],
                spec=specs[0])
