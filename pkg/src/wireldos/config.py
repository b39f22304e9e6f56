"""Run configuration: schema-validated TOML/JSON parsing.

Unknown keys are errors, not warnings, so a typo in an epsilon value can
never silently change a run.  The fully resolved configuration (defaults
included) is embedded in every output header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .model import (Background, CrossSection, EmitterSpec, Material,
                    SpectralPoint, orientation_vector)

try:
    import tomllib as _toml
except ModuleNotFoundError:  # python < 3.11
    import tomli as _toml


_SCHEMA = {
    "run": {"workers", "tol"},
    "spectral": {"lambda_um"},
    "background": {"kind", "eps1", "eps3"},
    "guide": {"shape", "radius_um", "circumradius_um", "n_sides", "rotation_rad",
              "center_um", "vertices_um", "material"},
    "guide.material": {"kind", "eps", "eps_inf", "omega_p_rad_s", "gamma_d_rad_s",
                       "lambda_um", "eps_values"},
    "mesh": {"h_um"},
    "emitter": {"orientation", "distances_nm", "direction_deg", "position_um"},
    "band": {"kmax_over_k0", "tol"},
    "map": {"xmin_um", "xmax_um", "ymin_um", "ymax_um", "nx", "ny", "kz_over_k0"},
}


def _complexify(v, where):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {v!r}")


def _check_keys(d, section):
    allowed = _SCHEMA[section]
    for k in d:
        if k not in allowed:
            raise ConfigError(
                f"unknown key {k!r} in [{section}] (allowed: {sorted(allowed)})")


@dataclass
class RunConfig:
    """Validated configuration plus the resolved-default dictionary."""

    sp: SpectralPoint
    bg: Background
    cs: Optional[CrossSection]
    h_um: float
    orientation: str
    distances_nm: tuple
    direction_rad: float
    position_um: Optional[tuple]
    kmax_over_k0: float
    tol: float
    workers: int
    map_spec: Optional[dict]
    resolved: dict            # full provenance for output headers


def _parse_material(d) -> Material:
    _check_keys(d, "guide.material")
    kind = d.get("kind", "constant")
    if kind == "constant":
        if "eps" not in d:
            raise ConfigError("[guide.material] constant model needs 'eps'")
        return Material.constant(_complexify(d["eps"], "guide.material.eps"))
    if kind == "drude":
        try:
            return Material.drude(d["eps_inf"], d["omega_p_rad_s"], d["gamma_d_rad_s"])
        except KeyError as exc:
            raise ConfigError(f"[guide.material] drude model missing {exc}") from exc
    if kind == "table":
        try:
            lam = d["lambda_um"]
            eps = [_complexify(e, "guide.material.eps_values") for e in d["eps_values"]]
        except KeyError as exc:
            raise ConfigError(f"[guide.material] table model missing {exc}") from exc
        return Material.table(lam, eps)
    raise ConfigError(f"[guide.material] unknown kind {kind!r}")


def load_config(path) -> RunConfig:
    """Parse and validate a TOML (or JSON) configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    else:
        try:
            raw = _toml.loads(text)
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    for sec in raw:
        if sec not in _SCHEMA or sec == "guide.material":
            raise ConfigError(f"unknown section [{sec}] "
                              f"(allowed: {sorted(k for k in _SCHEMA if '.' not in k)})")

    try:
        spd = raw["spectral"]
    except KeyError:
        raise ConfigError("missing required section [spectral]")
    _check_keys(spd, "spectral")
    if "lambda_um" not in spd:
        raise ConfigError("[spectral] needs lambda_um")
    sp = SpectralPoint(float(spd["lambda_um"]))

    bgd = raw.get("background", {})
    _check_keys(bgd, "background")
    kind = bgd.get("kind", "homogeneous")
    eps1 = _complexify(bgd.get("eps1", 1.0), "background.eps1")
    if kind == "homogeneous":
        bg = Background.homogeneous(eps1)
    elif kind == "two_layer":
        if "eps3" not in bgd:
            raise ConfigError("[background] two_layer needs eps3")
        bg = Background.two_layer(eps1, _complexify(bgd["eps3"], "background.eps3"))
    else:
        raise ConfigError(f"[background] unknown kind {kind!r}")

    cs = None
    h_um = 0.0
    gd = raw.get("guide")
    if gd is not None:
        _check_keys({k: v for k, v in gd.items() if k != "material"}, "guide")
        mat = _parse_material(gd.get("material", {"kind": "constant", "eps": [1.0, 0.0]}))
        shape = gd.get("shape", "circle")
        center = tuple(gd.get("center_um", (0.0, 0.0)))
        try:
            if shape == "circle":
                cs = CrossSection.circle(mat, gd["radius_um"], center)
            elif shape == "regular_polygon":
                cs = CrossSection.regular_polygon(mat, gd["circumradius_um"],
                                                  gd["n_sides"],
                                                  gd.get("rotation_rad", 0.0), center)
            elif shape == "polygon":
                cs = CrossSection.polygon(mat, gd["vertices_um"])
            else:
                raise ConfigError(f"[guide] unknown shape {shape!r}")
        except KeyError as exc:
            raise ConfigError(f"[guide] {shape} shape missing {exc}") from exc

    md = raw.get("mesh", {})
    if gd is not None:
        if not isinstance(md, dict) or "h_um" not in md:
            raise ConfigError("missing [mesh] h_um (required with a [guide])")
        for k in md:
            if k != "h_um":
                raise ConfigError(f"unknown key {k!r} in [mesh]")
        h_um = float(md["h_um"])
    elif md:
        for k in md:
            if k != "h_um":
                raise ConfigError(f"unknown key {k!r} in [mesh]")
        h_um = float(md.get("h_um", 0.0))

    emd = raw.get("emitter", {})
    _check_keys(emd, "emitter")
    orientation = emd.get("orientation", "radial")
    if orientation not in ("radial", "x", "y", "z", "total"):
        raise ConfigError(f"[emitter] unknown orientation {orientation!r}")
    distances = tuple(float(d) for d in emd.get("distances_nm", ()))
    direction_rad = float(emd.get("direction_deg", 0.0)) * np.pi / 180.0
    position = emd.get("position_um")
    if position is not None:
        position = (float(position[0]), float(position[1]))
    if not distances and position is None:
        raise ConfigError("[emitter] needs distances_nm or position_um")

    bd = raw.get("band", {})
    _check_keys(bd, "band")
    kmax_over_k0 = float(bd.get("kmax_over_k0", 12.0))
    tol = float(bd.get("tol", 0.005))

    rund = raw.get("run", {})
    _check_keys(rund, "run")
    workers = int(rund.get("workers", 1))
    tol = float(rund.get("tol", tol))

    map_spec = None
    if "map" in raw:
        mp = raw["map"]
        _check_keys(mp, "map")
        try:
            map_spec = {"xmin_um": float(mp["xmin_um"]), "xmax_um": float(mp["xmax_um"]),
                        "ymin_um": float(mp["ymin_um"]), "ymax_um": float(mp["ymax_um"]),
                        "nx": int(mp["nx"]), "ny": int(mp["ny"]),
                        "kz_over_k0": mp.get("kz_over_k0")}
        except KeyError as exc:
            raise ConfigError(f"[map] missing {exc}") from exc

    resolved = {
        "spectral": {"lambda_um": sp.lambda_um},
        "background": {"kind": bg.kind, "eps1": [bg.eps1.real, bg.eps1.imag],
                       "eps3": [bg.eps3.real, bg.eps3.imag]},
        "guide": None if cs is None else _resolved_guide(cs),
        "mesh": {"h_um": h_um},
        "emitter": {"orientation": orientation,
                    "distances_nm": list(distances),
                    "direction_deg": direction_rad * 180.0 / np.pi,
                    "position_um": list(position) if position else None},
        "band": {"kmax_over_k0": kmax_over_k0, "tol": tol},
        "run": {"workers": workers},
        "map": map_spec,
    }
    return RunConfig(sp=sp, bg=bg, cs=cs, h_um=h_um, orientation=orientation,
                     distances_nm=distances, direction_rad=direction_rad,
                     position_um=position, kmax_over_k0=kmax_over_k0, tol=tol,
                     workers=workers, map_spec=map_spec, resolved=resolved)


def _resolved_guide(cs: CrossSection) -> dict:
    m = cs.material
    mat = {"kind": m.kind}
    if m.kind == "constant":
        mat["eps"] = [m.eps.real, m.eps.imag]
    elif m.kind == "drude":
        mat.update(eps_inf=m.eps_inf, omega_p_rad_s=m.omega_p, gamma_d_rad_s=m.gamma_d)
    else:
        mat.update(lambda_um=list(m.table_lambda),
                   eps_values=[[e.real, e.imag] for e in m.table_eps])
    g = {"shape": cs.shape, "material": mat, "center_um": list(cs.center)}
    if cs.shape == "circle":
        g["radius_um"] = cs.radius
    elif cs.shape == "regular_polygon":
        g.update(circumradius_um=cs.circumradius, n_sides=cs.n_sides,
                 rotation_rad=cs.rotation)
    else:
        g["vertices_um"] = [list(v) for v in cs.vertices]
    return g
