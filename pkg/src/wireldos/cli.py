"""Command-line front end: spectrum / modes / rates / map / validate.

Every output embeds the fully resolved configuration in its header and uses
shortest-round-trip float formatting, so identical configs give byte-identical
data rows regardless of worker count.  Exit codes: 0 success, 1 physics or
validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, NoModeError, WireldosError
from .ldos import (peak_window_spectra, rate_sweep, spectra_for_emitters,
                   spectrum)
from .model import (build_mesh, emitter_at_distance, lossless_variant,
                    validate_emitter)
from .modes import fit_lorentzian
from .circular import circular_dispersion_root, gamma_pl_lossless, mode_fields
from .scatter import assemble, delta_green_many, ldos_map


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "nan"
    return repr(float(x))


def _header_lines(cfg: RunConfig, extra=None):
    lines = [f"# wireldos {__version__}",
             f"# config {json.dumps(cfg.resolved, sort_keys=True)}"]
    if extra:
        lines += [f"# {k} {v}" for k, v in extra.items()]
    return lines


def _write_csv(path: Path, cfg: RunConfig, columns, rows, extra=None):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for ln in _header_lines(cfg, extra):
            f.write(ln + "\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) if not isinstance(v, str) else v
                             for v in row) + "\n")
    return path


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.workers is not None:
        cfg.workers = int(args.workers)
        cfg.resolved["run"]["workers"] = int(args.workers)
    if args.tol is not None:
        cfg.tol = float(args.tol)
        cfg.resolved["band"]["tol"] = float(args.tol)
    if args.lossless and cfg.cs is not None:
        cfg.cs = replace(cfg.cs, material=lossless_variant(cfg.cs.material))
        cfg.resolved["guide"] = None  # re-resolve below
        from .config import _resolved_guide
        cfg.resolved["guide"] = _resolved_guide(cfg.cs)
        cfg.resolved["run"]["lossless"] = True
    return cfg


def _emitters(cfg: RunConfig):
    from .model import EmitterSpec, orientation_vector

    if cfg.cs is None:
        if cfg.position_um is None:
            raise ConfigError("guide-free runs need [emitter] position_um")
        pos = cfg.position_um
        u = orientation_vector(cfg.orientation if cfg.orientation != "total" else "x",
                               pos, (0.0, 0.0))
        em = EmitterSpec(position=pos, u=tuple(u))
        return [em], [None]
    if cfg.distances_nm:
        ems = [emitter_at_distance(cfg.cs, d * 1e-3, cfg.direction_rad,
                                   cfg.orientation if cfg.orientation != "total" else "radial")
               for d in cfg.distances_nm]
    else:
        pos = cfg.position_um
        u = orientation_vector(cfg.orientation if cfg.orientation != "total" else "radial",
                               pos, cfg.cs.center)
        d = cfg.cs.surface_distance(pos)
        from .model import EmitterSpec
        ems = [EmitterSpec(position=pos, u=tuple(u), surface_distance=d)]
    us = ["total" if cfg.orientation == "total" else e.u_vec for e in ems]
    return ems, us


def cmd_spectrum(cfg: RunConfig, out: Path) -> list:
    if cfg.cs is None:
        raise ConfigError("[guide] section required for the spectrum command")
    mesh = build_mesh(cfg.cs, cfg.bg, cfg.h_um, cfg.sp)
    ems, us = _emitters(cfg)
    for e in ems:
        validate_emitter(e, cfg.cs, mesh)
    specs = spectra_for_emitters(mesh, cfg.bg, cfg.sp, ems, us=us,
                                 k_max=cfg.kmax_over_k0 * cfg.sp.k0,
                                 tol=cfg.tol, workers=cfg.workers)
    paths = []
    for s in specs:
        d = s.emitter.surface_distance
        name = "spectrum.csv" if len(specs) == 1 else f"spectrum_d{d*1e3:g}nm.csv"
        rows = [(kz / cfg.sp.k0, dr, rr, int(lv))
                for kz, dr, rr, lv in zip(s.kz, s.delta_rho, s.rho_ref, s.levels)]
        extra = {"columns_note": "kz in units of k0; densities per (rad/um)",
                 "tail_converged": s.tail_converged,
                 "quenching_divergent": s.quenching_divergent}
        paths.append(_write_csv(out / name, cfg,
                                ["k_z_over_k0", "delta_rho2d_u", "rho_ref",
                                 "refinement_level"], rows, extra))
    return paths


def _fit_primary_mode(cfg: RunConfig, mesh, ems, us):
    specs = spectra_for_emitters(mesh, cfg.bg, cfg.sp, ems[:1], us=us[:1],
                                 k_max=cfg.kmax_over_k0 * cfg.sp.k0,
                                 tol=cfg.tol, workers=cfg.workers)
    return fit_lorentzian(specs[0]), specs[0]


def cmd_modes(cfg: RunConfig, out: Path) -> Path:
    if cfg.cs is None:
        raise ConfigError("[guide] section required for the modes command")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "modes.json"
    mesh = build_mesh(cfg.cs, cfg.bg, cfg.h_um, cfg.sp)
    ems, us = _emitters(cfg)
    validate_emitter(ems[0], cfg.cs, mesh)
    from .model import permittivity

    eps_g = permittivity(cfg.cs.material, cfg.sp)
    zero_width = (eps_g.imag == 0 and cfg.bg.kind == "homogeneous"
                  and np.any(mesh.delta_eps != 0))
    try:
        if zero_width:
            # a lossless bound mode responds exactly in phase: zero linewidth
            mode = _locate_zero_width_mode(cfg, ems, us)
        else:
            mode, spec0 = _fit_primary_mode(cfg, mesh, ems, us)
        if not zero_width and mode.kind == "leaky":
            from .ldos import rate_sweep as _rs  # reuse split machinery
            from .modes import leaky_mode_split
            from .ldos import SpectrumEngine, LdosSpectrum, _fwhm_window_counts
            cs_ll = replace(cfg.cs, material=lossless_variant(cfg.cs.material))
            mesh_ll = build_mesh(cs_ll, cfg.bg, cfg.h_um, cfg.sp)
            span = max(10 * mode.hwhm, 0.02 * cfg.sp.k0)
            ll = peak_window_spectra(mesh_ll, cfg.bg, cfg.sp, ems[:1], us=us[:1],
                                     window=(mode.k_spp - span, mode.k_spp + span),
                                     workers=cfg.workers)
            mode = leaky_mode_split(ll[0], mode)
    except NoModeError as exc:
        payload = {"error": {"type": "NoModeError", "message": str(exc)}}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        raise
    below = zero_width or mode.below_resolution
    payload = {
        "n_eff": mode.n_eff,
        "k_spp_per_um": mode.k_spp,
        "L_spp_um": None if below else mode.l_spp,
        "Gamma_SPP_per_um": None if below else mode.gamma_spp,
        "Gamma_rad_SPP_per_um": mode.gamma_rad_spp,
        "Gamma_nrad_SPP_per_um": mode.gamma_nrad_spp,
        "kind": mode.kind,
        "amplitude": None if zero_width else mode.amplitude,
        "fit": {"residual_rms": mode.residual_rms,
                "window_per_um": list(mode.window),
                "extra_peaks_per_um": list(mode.extra_peaks)},
        "flags": (["below_linewidth_resolution"] if below else []),
        "config": cfg.resolved,
        "version": __version__,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _locate_zero_width_mode(cfg: RunConfig, ems, us):
    """A strictly lossless bound mode has an exactly real response and zero
    linewidth; locate its propagation constant with a vanishing artificial
    loss and report the width as below resolution."""
    from .model import Material, permittivity
    from .errors import NoModeError as _NME

    eps = permittivity(cfg.cs.material, cfg.sp)
    if eps.imag != 0 or abs(eps - cfg.bg.eps1) == 0:
        raise _NME("no spectral peak and the guide is not a lossless scatterer")
    probe = replace(cfg.cs, material=Material.constant(eps + 1e-3j * abs(eps.real)))
    mesh = build_mesh(probe, cfg.bg, cfg.h_um, cfg.sp)
    specs = peak_window_spectra(mesh, cfg.bg, cfg.sp, ems[:1], us=us[:1],
                                window=(1.001 * cfg.bg.n_max * cfg.sp.k0,
                                        cfg.kmax_over_k0 * cfg.sp.k0),
                                n0=81, workers=cfg.workers)
    return fit_lorentzian(specs[0])


def cmd_rates(cfg: RunConfig, out: Path) -> Path:
    if cfg.cs is None:
        raise ConfigError("[guide] section required for the rates command")
    if not cfg.distances_nm:
        raise ConfigError("[emitter] distances_nm required for the rates command")
    rates, _, _ = rate_sweep([d * 1e-3 for d in cfg.distances_nm], cfg.cs, cfg.bg,
                             cfg.sp, cfg.h_um, direction_rad=cfg.direction_rad,
                             orientation=(cfg.orientation
                                          if cfg.orientation != "total" else "radial"),
                             k_max=cfg.kmax_over_k0 * cfg.sp.k0,
                             tol=cfg.tol, workers=cfg.workers)
    rows = [(r.d * 1e3, r.gamma_pl, r.gamma_rad, r.gamma_scatt, r.gamma_pl_leak,
             r.gamma_nr, r.gamma_pl_nr, r.gamma_eh, r.beta) for r in rates]
    return _write_csv(out / "rates.csv", cfg,
                      ["d_nm", "gamma_pl", "gamma_rad", "gamma_scatt",
                       "gamma_pl_leak", "gamma_NR", "gamma_pl_NR", "gamma_eh",
                       "beta"], rows)


def cmd_map(cfg: RunConfig, out: Path) -> Path:
    if cfg.cs is None or cfg.map_spec is None:
        raise ConfigError("map command needs [guide] and [map] sections")
    mesh = build_mesh(cfg.cs, cfg.bg, cfg.h_um, cfg.sp)
    ms = cfg.map_spec
    if ms["kz_over_k0"] is not None:
        kz = float(ms["kz_over_k0"]) * cfg.sp.k0
    else:
        ems, us = _emitters(cfg)
        validate_emitter(ems[0], cfg.cs, mesh)
        mode, _ = _fit_primary_mode(cfg, mesh, ems, us)
        kz = mode.k_spp
    xs = np.linspace(ms["xmin_um"], ms["xmax_um"], ms["nx"])
    ys = np.linspace(ms["ymin_um"], ms["ymax_um"], ms["ny"])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    grid = np.stack([X.ravel(), Y.ravel()], axis=-1)
    u = "total" if cfg.orientation == "total" else cfg.orientation
    if u == "radial":
        u = "total"  # no single radial direction on a grid
    vals = ldos_map(mesh, cfg.bg, kz, cfg.sp, grid, u)
    rows = [(x * 1e3, y * 1e3, v, int(np.isnan(v)))
            for (x, y), v in zip(grid, vals)]
    return _write_csv(out / "map.csv", cfg,
                      ["x_nm", "y_nm", "delta_rho2d_u", "masked"],
                      rows, extra={"kz_over_k0": kz / cfg.sp.k0})


def cmd_validate(out: Path, workers: int = 1) -> int:
    """Built-in oracle suite; returns the number of failed checks."""
    from .ldos import gamma_plasmon, reference_band_integral
    from .model import (Background, CrossSection, EmitterSpec, Material,
                        SpectralPoint)

    failures = 0
    report = []

    def check(name, value, target, tol, relative=True):
        nonlocal failures
        dev = abs(value - target) / (abs(target) if relative and target else 1.0)
        ok = dev <= tol
        failures += 0 if ok else 1
        report.append(f"{'PASS' if ok else 'FAIL'}  {name}: value={value:.6g} "
                      f"target={target:.6g} deviation={dev:.3g} tol={tol:g}")

    sp = SpectralPoint(1.0)
    for n1 in (1.0, np.sqrt(2.0), 1.5):
        bg = Background.homogeneous(n1**2)
        em = EmitterSpec(position=(0.0, 0.0), u=(1.0, 0.0, 0.0))
        val = reference_band_integral(em, bg, sp, em.u_vec)
        check(f"homogeneous identity (n1={n1:.4g}, x)", val, n1, 1e-4)
        val = reference_band_integral(em, bg, sp, (0.0, 0.0, 1.0))
        check(f"homogeneous identity (n1={n1:.4g}, z)", val, n1, 1e-4)

    R, eps1, eps2 = 0.020, 2.0, -50.0 + 3.85j
    kz_root = circular_dispersion_root(R, eps1, eps2.real, sp)
    n_eff_exact = kz_root / sp.k0
    # planar-interface limit
    kz_big = circular_dispersion_root(5.0, eps1, eps2.real, sp)
    check("dispersion planar limit (R=5um)", kz_big / sp.k0,
          float(np.sqrt(eps1 * eps2.real / (eps1 + eps2.real))), 0.01)

    cs = CrossSection.circle(Material.constant(eps2), R)
    bg = Background.homogeneous(eps1)
    mesh = build_mesh(cs, bg, R / 10, sp)
    dgrid = [0.010, 0.020, 0.050, 0.100]
    ems = [emitter_at_distance(cs, d, 0.0, "radial") for d in dgrid]
    specs = peak_window_spectra(mesh, bg, sp, ems,
                                window=(0.85 * kz_root, 1.15 * kz_root),
                                workers=workers)
    fits = [fit_lorentzian(s) for s in specs]
    check("dispersion root vs numerical peak", fits[1].n_eff, n_eff_exact, 0.02)

    fld = mode_fields(kz_root, R, eps1, eps2.real, sp)
    worst = 0.0
    for d, m in zip(dgrid, fits):
        g_closed = gamma_plasmon(m, m.amplitude, sp, np.sqrt(eps1))
        g_exact = gamma_pl_lossless(fld, d, "radial")
        worst = max(worst, abs(g_closed - g_exact) / g_exact)
    check("lossless vs closed form, max over d-grid", worst, 0.0, 0.10,
          relative=False)

    out.mkdir(parents=True, exist_ok=True)
    text = "\n".join(report) + f"\n{'ALL PASS' if failures == 0 else f'{failures} FAILURES'}\n"
    (out / "validate.txt").write_text(text)
    sys.stdout.write(text)
    return failures


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="wireldos",
                                description="Decay channels of a dipole near a 2D waveguide")
    p.add_argument("command", choices=["spectrum", "modes", "rates", "map", "validate"])
    p.add_argument("--config", type=Path, help="TOML or JSON configuration file")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--lossless", action="store_true",
                   help="cancel the guide material's losses")
    args = p.parse_args(argv)

    try:
        if args.command == "validate":
            return 1 if cmd_validate(args.out, workers=args.workers or 1) else 0
        if args.config is None:
            raise ConfigError(f"--config is required for the {args.command} command")
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "spectrum":
            paths = cmd_spectrum(cfg, args.out)
        elif args.command == "modes":
            paths = [cmd_modes(cfg, args.out)]
        elif args.command == "rates":
            paths = [cmd_rates(cfg, args.out)]
        else:
            paths = [cmd_map(cfg, args.out)]
        for path in paths:
            print(path)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except WireldosError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
