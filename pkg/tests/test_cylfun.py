import numpy as np
import pytest

from wireldos import cylfun
from wireldos.errors import RangeError, SingularityError

from oracles import (quad_k0, quad_k1, series_hankel1, series_i0, series_i1)

# reference values computed from the ascending-series / quadrature oracles
H1_0_1 = 0.7651976865579666 + 0.08825696421567697j
H1_1_1 = 0.4400505857449335 - 0.7812128213002887j
K0_1 = 0.42102443824070834
K1_1 = 0.6019072301972346
I0_1 = 1.2660658777520084


def test_oracle_self_consistency():
    assert series_hankel1(0, 1.0) == pytest.approx(H1_0_1, rel=1e-12)
    assert series_hankel1(1, 1.0) == pytest.approx(H1_1_1, rel=1e-12)
    assert quad_k0(1.0) == pytest.approx(K0_1, rel=1e-9)
    assert quad_k1(1.0) == pytest.approx(K1_1, rel=1e-9)
    assert series_i0(1.0) == pytest.approx(I0_1, rel=1e-13)


def test_hankel1_reference_points():
    assert cylfun.hankel1(0, 1.0) == pytest.approx(H1_0_1, rel=1e-10)
    assert cylfun.hankel1(1, 1.0) == pytest.approx(H1_1_1, rel=1e-10)


@pytest.mark.parametrize("x", [0.003, 0.02, 0.7, 3.0, 6.0])
def test_hankel1_vs_series(x):
    assert cylfun.hankel1(0, x) == pytest.approx(series_hankel1(0, x), rel=1e-10)
    assert cylfun.hankel1(1, x) == pytest.approx(series_hankel1(1, x), rel=1e-10)


def test_hankel1_small_argument_singularity():
    # H1^(1)(z) ~ -2i/(pi z) as z -> 0 along the reals
    for z in (1e-3, 1e-4, 1e-5):
        lead = -2j / (np.pi * z)
        assert cylfun.hankel1(1, z) == pytest.approx(lead, rel=2e-2 * z * 100)


@pytest.mark.parametrize("x", [1e-3, 0.5, 1.0, 5.0, 9.9])
def test_besselk_connection_to_hankel(x):
    # K0(x) = (i pi / 2) H0^(1)(i x)
    lhs = cylfun.besselk(0, x)
    rhs = 0.5j * np.pi * cylfun.hankel1(0, 1j * x)
    assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("x", [0.01, 0.3, 1.0, 4.0, 20.0])
def test_besselk_vs_quadrature(x):
    assert cylfun.besselk(0, x).real == pytest.approx(quad_k0(x), rel=1e-8)
    assert cylfun.besselk(1, x).real == pytest.approx(quad_k1(x), rel=1e-8)


def test_besseli_values():
    assert cylfun.besseli(0, 0.0) == 1.0
    assert cylfun.besseli(1, 0.0) == 0.0
    assert cylfun.besseli(0, 1.0) == pytest.approx(series_i0(1.0), rel=1e-10)
    assert cylfun.besseli(1, 2.3) == pytest.approx(series_i1(2.3), rel=1e-10)


def test_wronskian_modified():
    xs = np.geomspace(0.01, 100.0, 41)
    for x in xs:
        lhs = (cylfun.besseli(0, x) * cylfun.besselk(1, x)
               + cylfun.besseli(1, x) * cylfun.besselk(0, x))
        assert abs(lhs - 1.0 / x) <= 1e-10 * abs(1.0 / x)


def test_wronskian_ordinary():
    xs = np.geomspace(0.01, 100.0, 41)
    for x in xs:
        j0 = cylfun.eval_cylinder("J", 0, x).value
        j1 = cylfun.eval_cylinder("J", 1, x).value
        y0 = cylfun.eval_cylinder("Y", 0, x).value
        y1 = cylfun.eval_cylinder("Y", 1, x).value
        target = 2.0 / (np.pi * x)
        assert abs(j1 * y0 - j0 * y1 - target) <= 1e-10 * abs(target)


def test_h1_identity():
    z = 2.3 + 0.7j
    v = cylfun.eval_cylinder("H1", 0, z)
    j = cylfun.eval_cylinder("J", 0, z).value
    y = cylfun.eval_cylinder("Y", 0, z).value
    assert v.value == pytest.approx(j + 1j * y, rel=1e-12)
    assert (v.order, v.kind) == (0, "H1")


@pytest.mark.parametrize("angle", [0.4, 1.2, 2.6, -0.9])
def test_branch_continuity_along_rays(angle):
    # values continuous along rays that avoid the negative real axis
    r = np.linspace(0.5, 3.0, 40)
    z = r * np.exp(1j * angle)
    vals = np.array([cylfun.hankel1(0, zz) for zz in z])
    steps = np.abs(np.diff(vals))
    assert steps.max() < 10 * np.median(steps) + 1e-12


def test_error_paths():
    with pytest.raises(SingularityError):
        cylfun.hankel1(0, 0.0)
    with pytest.raises(RangeError):
        cylfun.hankel1(2, 1.0)
    with pytest.raises(RangeError):
        cylfun.besselk(0, -1.0)
    with pytest.raises(RangeError):
        cylfun.besselk(0, 800.0)
    with pytest.raises(RangeError):
        cylfun.besseli(0, 900.0)
