"""Cylinder functions of orders 0 and 1 for complex argument.

Thin contract layer over scipy.special (AMOS), which holds well past ten
significant digits on the argument ranges used here; the independent series
and quadrature oracles live in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special as sps

from .errors import RangeError, SingularityError

_ORDERS = (0, 1)
_BESSELK_MAX = 700.0
_BESSELI_MAX = 700.0


@dataclass(frozen=True)
class CylinderFnValue:
    """One evaluated cylinder-function sample."""

    value: complex
    order: int
    kind: str  # "J" | "Y" | "H1" | "I" | "K"


def _check_order(order):
    if order not in _ORDERS:
        raise RangeError(f"order must be 0 or 1, got {order}")


def hankel1(order: int, z) -> complex:
    """H^(1)_order(z), principal branch (cut on the negative real axis)."""
    _check_order(order)
    z = complex(z)
    if z == 0:
        raise SingularityError("hankel1 is singular at z = 0")
    return complex(sps.hankel1(order, z))


def besselk(order: int, x) -> complex:
    """K_order(x) for Re x > 0."""
    _check_order(order)
    x = complex(x)
    if not x.real > 0:
        raise RangeError(f"besselk requires Re x > 0, got {x}")
    if abs(x) > _BESSELK_MAX:
        raise RangeError(f"besselk argument |x|={abs(x):.3g} beyond supported range")
    v = complex(sps.kv(order, x))
    if not np.isfinite(v.real) or not np.isfinite(v.imag):
        raise RangeError(f"besselk overflow/underflow at x={x}")
    return v


def besseli(order: int, x) -> complex:
    """I_order(x) for |x| <= 700 (overflow guard)."""
    _check_order(order)
    x = complex(x)
    if abs(x) > _BESSELI_MAX:
        raise RangeError(f"besseli argument |x|={abs(x):.3g} beyond supported range")
    v = complex(sps.iv(order, x))
    if not np.isfinite(v.real) or not np.isfinite(v.imag):
        raise RangeError(f"besseli overflow at x={x}")
    return v


def eval_cylinder(kind: str, order: int, z) -> CylinderFnValue:
    """Evaluate one cylinder function and wrap it with its provenance."""
    _check_order(order)
    z = complex(z)
    if kind == "J":
        v = complex(sps.jv(order, z))
    elif kind == "Y":
        if z == 0:
            raise SingularityError("Y is singular at z = 0")
        v = complex(sps.yv(order, z))
    elif kind == "H1":
        v = hankel1(order, z)
    elif kind == "I":
        v = besseli(order, z)
    elif kind == "K":
        v = besselk(order, z)
    else:
        raise RangeError(f"unknown cylinder function kind {kind!r}")
    if kind != "K" and not (np.isfinite(v.real) and np.isfinite(v.imag)):
        raise RangeError(f"{kind}_{order}({z}) not finite")
    return CylinderFnValue(value=v, order=order, kind=kind)
