"""Analytic m = 0 mode of a circular wire: dispersion root, field profiles, and
the flux-normalized coupling rate of a lossless guide.

The azimuthally symmetric TM mode has E_z ~ I0(kappa2 r) inside and
K0(kappa1 r) outside, kappа_i^2 = k_z^2 - eps_i k0^2, and the dispersion
relation  eps2 I1(k2 R)/(k2 I0(k2 R)) + eps1 K1(k1 R)/(k1 K0(k1 R)) = 0.
Field relations use natural units (c = eps0 = 1, omega = k0), under which the
flux-normalized rate 3 pi |E_u(d)|^2 / (k0^2 P) is dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import iv, kv

from .errors import NoModeError, UsageError
from .model import SpectralPoint


def _dispersion(kz, R, eps1, eps2, k0):
    kap1 = np.sqrt(kz**2 - eps1 * k0**2)
    kap2 = np.sqrt(kz**2 - eps2 * k0**2)
    return (eps2 * iv(1, kap2 * R) / (kap2 * iv(0, kap2 * R))
            + eps1 * kv(1, kap1 * R) / (kap1 * kv(0, kap1 * R)))


def circular_dispersion_root(R: float, eps1: float, eps2_lossless: float,
                             sp: SpectralPoint) -> float:
    """Propagation constant k_z of the m = 0 wire mode (lossless, bracketed)."""
    if not (eps2_lossless < -eps1 and eps1 > 0):
        raise UsageError("mode existence requires real eps2 < -eps1 < 0")
    k0 = sp.k0
    n1 = np.sqrt(eps1)
    lo = n1 * k0 * (1 + 1e-6)
    hi = 20.0 * n1 * k0
    grid = np.geomspace(lo, hi, 4000)
    with np.errstate(all="ignore"):  # I/K overflow far out in the bracket -> nan, skipped
        vals = np.array([_dispersion(kz, R, eps1, eps2_lossless, k0).real
                         for kz in grid])
    sign = np.sign(vals)
    idx = np.where(np.diff(sign) != 0)[0]
    if len(idx) == 0:
        raise NoModeError("no sign change of the dispersion function in the bracket")
    i = idx[0]
    return float(brentq(lambda kz: _dispersion(kz, R, eps1, eps2_lossless, k0).real,
                        grid[i], grid[i + 1], xtol=1e-14 * k0))


@dataclass(frozen=True)
class CircularModeField:
    """Radial profiles of the m = 0 TM mode at a real propagation constant."""

    kz: float
    R: float
    eps1: float
    eps2: float
    k0: float
    c_in: complex    # interior E_z amplitude (times I0)
    c_out: complex   # exterior E_z amplitude (times K0)

    @property
    def kappa1(self) -> float:
        return float(np.sqrt(self.kz**2 - self.eps1 * self.k0**2))

    @property
    def kappa2(self) -> float:
        return float(np.sqrt(self.kz**2 - self.eps2 * self.k0**2))

    def e_z(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.R,
                        self.c_in * iv(0, self.kappa2 * r),
                        self.c_out * kv(0, self.kappa1 * r))

    def _dez_dr(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.R,
                        self.c_in * self.kappa2 * iv(1, self.kappa2 * r),
                        -self.c_out * self.kappa1 * kv(1, self.kappa1 * r))

    def e_r(self, r):
        r = np.asarray(r, dtype=float)
        kap2 = np.where(r < self.R, self.kappa2**2, self.kappa1**2)
        return -1j * self.kz / kap2 * self._dez_dr(r)

    def h_phi(self, r):
        r = np.asarray(r, dtype=float)
        eps = np.where(r < self.R, self.eps2, self.eps1)
        kap2 = np.where(r < self.R, self.kappa2**2, self.kappa1**2)
        return -1j * self.k0 * eps / kap2 * self._dez_dr(r)

    def flux(self) -> float:
        """Longitudinal power integral int (E x H*) . z dA, closed Bessel form."""
        a2, a1 = self.kappa2, self.kappa1
        x2, x1 = a2 * self.R, a1 * self.R
        # int_0^R r I1(a r)^2 dr and int_R^inf r K1(a r)^2 dr (Lommel forms)
        i2 = iv(0, x2) - 2 * iv(1, x2) / x2          # I2
        k2 = kv(0, x1) + 2 * kv(1, x1) / x1          # K2
        int_in = (self.R**2 / 2.0) * (iv(1, x2) ** 2 - iv(0, x2) * i2)
        int_out = (self.R**2 / 2.0) * (kv(0, x1) * k2 - kv(1, x1) ** 2)
        p_in = (self.kz * self.k0 * self.eps2 / self.kappa2**2) * abs(self.c_in) ** 2 * int_in
        p_out = (self.kz * self.k0 * self.eps1 / self.kappa1**2) * abs(self.c_out) ** 2 * int_out
        return float(2 * np.pi * (p_in + p_out))

    def flux_quadrature(self, rel_tol=1e-9) -> float:
        """Same flux by adaptive radial quadrature (cross-check path)."""
        def f(r):
            return float((self.e_r(r) * np.conj(self.h_phi(r))).real) * 2 * np.pi * r
        tail = 30.0 / self.kappa1
        p1, _ = quad(f, 0.0, self.R, epsrel=rel_tol, limit=300)
        p2, _ = quad(f, self.R, self.R + tail, epsrel=rel_tol, limit=300)
        # analytic bound on the truncated exponential tail
        rt = self.R + tail
        bound = abs(f(rt)) / (2 * self.kappa1)
        return p1 + p2 + bound


def mode_fields(root_kz: float, R: float, eps1: float, eps2: float,
                sp: SpectralPoint) -> CircularModeField:
    """Construct the mode profiles at a dispersion root; amplitudes are fixed
    by continuity of E_z at r = R (H_phi continuity then holds at the root)."""
    k0 = sp.k0
    kap1 = np.sqrt(root_kz**2 - eps1 * k0**2)
    kap2 = np.sqrt(root_kz**2 - eps2 * k0**2)
    return CircularModeField(kz=float(root_kz), R=float(R), eps1=float(eps1),
                             eps2=float(eps2), k0=float(k0),
                             c_in=complex(kv(0, kap1 * R)),
                             c_out=complex(iv(0, kap2 * R)))


def gamma_pl_lossless(field: CircularModeField, d: float, u: str = "radial") -> float:
    """Flux-normalized coupling rate 3 pi |E_u(R+d)|^2 / (k0^2 P), gamma_0 units.

    u: 'radial' | 'z' | 'azimuthal' (the m = 0 TM mode carries no E_phi).
    Invariant under rescaling the mode amplitude by any complex constant.
    """
    r = field.R + d
    if u == "radial":
        e2 = abs(field.e_r(r)) ** 2
    elif u == "z":
        e2 = abs(field.e_z(r)) ** 2
    elif u == "azimuthal":
        return 0.0
    else:
        raise UsageError(f"unknown orientation {u!r}")
    return float(3 * np.pi * e2 / (field.k0**2 * field.flux()))
