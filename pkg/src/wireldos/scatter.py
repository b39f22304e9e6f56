"""Discretized Lippmann-Schwinger solver for the guide contribution dG(r, r; k_z).

With the sign convention of the green module (kernel -(i/4)H0), the Dyson
equation for the total dyad reads G = G_ref - k0^2 G_ref (deps) G, so the
system matrix is M = I + k0^2 G_ref diag(deps_j A_j) and the guide part is
dG = -k0^2 sum_j G_ref(r, r_j) deps_j A_j X_j with M X = G_ref(r_j, r_obs).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, NumericalError
from .green import ReflectedKernel, dyad_hom_pairs, self_term
from .model import Background, Mesh, SpectralPoint


@dataclass
class ScatterSystem:
    """Factorized dense system for one (k_z, lambda); reusable across emitters."""

    kz: float
    sp: SpectralPoint
    mesh: Mesh
    bg: Background
    lu: tuple
    refl_kernel: Optional[ReflectedKernel] = None
    matrix: Optional[np.ndarray] = None

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells


def _ref_blocks(P, Q, kz, bg, sp, kernel):
    """Reference dyad blocks between point sets (hom + reflected)."""
    G = dyad_hom_pairs(P, Q, kz, bg.eps1, sp.k0)
    if bg.kind == "two_layer":
        P2, Q2 = np.atleast_2d(P), np.atleast_2d(Q)
        if np.any(P2[:, 1] <= 0) or np.any(Q2[:, 1] <= 0):
            raise DomainError("two-layer evaluation points must have y > 0")
        needed = float(np.min(P2[:, 1]) + np.min(Q2[:, 1]))
        if kernel is None or needed < kernel.y_min * (1 - 1e-12):
            kernel = ReflectedKernel(bg, sp, kz, y_min=needed)
        G = G + kernel.eval_pairs(P, Q)
    return G


def assemble(mesh: Mesh, bg: Background, kz: float, sp: SpectralPoint,
             keep_matrix: bool = False, y_min: float = None) -> ScatterSystem:
    """Build and factorize M = I + k0^2 G_ref diag(deps A) over the mesh cells.

    y_min optionally widens the reflected-kernel validity down to a smaller
    y+y' offset than the cell pairs need (e.g. for low-lying emitters).
    """
    N = mesh.n_cells
    if N < 1:
        raise DomainError("mesh has no cells")
    k0 = sp.k0
    pts = mesh.centers
    kernel = None
    if bg.kind == "two_layer":
        ymin = 2.0 * float(np.min(pts[:, 1]))
        if y_min is not None:
            ymin = min(ymin, float(y_min))
        kernel = ReflectedKernel(bg, sp, kz, y_min=ymin)

    G = dyad_hom_pairs(pts, pts, kz, bg.eps1, k0)
    idx = np.arange(N)
    G[idx, idx] = self_term(mesh.h, kz, bg.eps1, sp)
    if kernel is not None:
        G = G + kernel.eval_pairs(pts, pts)

    scale = k0**2 * mesh.delta_eps * mesh.areas       # per source cell j
    M = np.transpose(G * scale[None, :, None, None], (0, 2, 1, 3)).reshape(3 * N, 3 * N)
    M[np.arange(3 * N), np.arange(3 * N)] += 1.0
    kept = M.copy() if keep_matrix else None
    try:
        lu = sla.lu_factor(M, overwrite_a=True, check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericalError(f"singular factorization at kz={kz:.6g}: {exc}") from exc
    if not np.all(np.isfinite(lu[0])):
        raise NumericalError(f"non-finite factorization at kz={kz:.6g}")
    return ScatterSystem(kz=kz, sp=sp, mesh=mesh, bg=bg, lu=lu,
                         refl_kernel=kernel, matrix=kept)


@dataclass(frozen=True)
class DeltaGreen:
    """Guide contribution dG(r_obs, r_obs; k_z), with a near-mesh accuracy flag."""

    tensor: np.ndarray
    r_obs: tuple
    kz: float
    mesh_limited: bool = False


def delta_green_many(sys: ScatterSystem, obs_points) -> list:
    """dG(r, r; k_z) for many observation points, reusing one factorization."""
    pts = sys.mesh.centers
    N = sys.n_cells
    k0 = sys.sp.k0
    obs = np.atleast_2d(np.asarray(obs_points, dtype=float))
    scale = (k0**2) * sys.mesh.delta_eps * sys.mesh.areas

    B_all = _ref_blocks(pts, obs, sys.kz, sys.bg, sys.sp, sys.refl_kernel)  # (N, m, 3, 3)
    Gob_all = _ref_blocks(obs, pts, sys.kz, sys.bg, sys.sp, sys.refl_kernel)  # (m, N, 3, 3)

    out = []
    for m, r_obs in enumerate(obs):
        dmin = np.min(np.hypot(*(pts - r_obs).T))
        if dmin == 0:
            raise DomainError(f"observation point {tuple(r_obs)} lies on a mesh cell")
        B = B_all[:, m].reshape(3 * N, 3)
        X = sla.lu_solve(sys.lu, B, check_finite=False).reshape(N, 3, 3)
        dG = -np.einsum("nab,n,nbc->ac", Gob_all[m], scale, X)
        out.append(DeltaGreen(tensor=dG, r_obs=tuple(r_obs), kz=sys.kz,
                              mesh_limited=bool(dmin < sys.mesh.h)))
    return out


def delta_green(sys: ScatterSystem, r_obs) -> DeltaGreen:
    """Guide contribution at a single observation point outside the mesh."""
    r_obs = np.asarray(r_obs, dtype=float)
    dmin = np.min(np.hypot(*(sys.mesh.centers - r_obs).T))
    if dmin < sys.mesh.h:
        raise DomainError(
            f"observation point within one cell of the mesh (distance {dmin:.4g}); "
            "use delta_green_many for flagged mesh-limited output")
    return delta_green_many(sys, r_obs[None, :])[0]


def ldos_map(mesh: Mesh, bg: Background, kz: float, sp: SpectralPoint,
             grid_points, u) -> np.ndarray:
    """Partial 2D-LDOS at fixed k_z over a grid; interior points return NaN."""
    from .ldos import delta_rho2d  # local import; ldos builds on this module

    grid = np.atleast_2d(np.asarray(grid_points, dtype=float))
    pts = mesh.centers
    dmin = np.min(np.hypot(grid[:, None, 0] - pts[None, :, 0],
                           grid[:, None, 1] - pts[None, :, 1]), axis=1)
    ok = dmin >= mesh.h
    if bg.kind == "two_layer":
        ok &= grid[:, 1] > 0
    vals = np.full(len(grid), np.nan)
    if np.any(ok):
        y_min = None
        if bg.kind == "two_layer":
            y_min = float(np.min(grid[ok][:, 1]) + np.min(pts[:, 1]))
        sys = assemble(mesh, bg, kz, sp, y_min=y_min)
        dgs = delta_green_many(sys, grid[ok])
        eps_em = bg.eps_ref_at(grid[ok])
        vals[ok] = [delta_rho2d(dg.tensor, kz, eps_em[i], u)
                    for i, dg in enumerate(dgs)]
    return vals
