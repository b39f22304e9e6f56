"""Domain model: spectral point, materials, background stratification, cross-sections, meshes, emitters.

Internal length unit is the micrometre; every rate produced downstream is
normalized to the free-space rate, so no SI constants enter the numerics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, GeometryError, RangeError

C_UM_PER_S = 2.99792458e14     # speed of light in um/s
EV_TO_RAD_S = 1.519267447e15   # 1 eV as an angular frequency


@dataclass(frozen=True)
class SpectralPoint:
    """Vacuum wavelength with derived wavenumber and angular frequency."""

    lambda_um: float

    def __post_init__(self):
        if not self.lambda_um > 0:
            raise ValueError(f"vacuum wavelength must be positive, got {self.lambda_um}")

    @property
    def k0(self) -> float:
        """Vacuum wavenumber 2*pi/lambda in rad/um."""
        return 2.0 * np.pi / self.lambda_um

    @property
    def omega(self) -> float:
        """Angular frequency c*k0 in rad/s."""
        return C_UM_PER_S * self.k0


@dataclass(frozen=True)
class Material:
    """Dispersive or constant permittivity model.

    Passivity (Im eps >= 0) is required at construction for the constant and
    table models and is guaranteed by gamma_d >= 0 for the Drude model.
    """

    kind: str                      # "constant" | "drude" | "table"
    eps: complex = 0j              # constant model
    eps_inf: float = 1.0           # drude model
    omega_p: float = 0.0           # drude plasma frequency, rad/s
    gamma_d: float = 0.0           # drude damping rate, rad/s
    table_lambda: tuple = ()       # table model: sorted wavelengths (um)
    table_eps: tuple = ()          # table model: permittivities

    def __post_init__(self):
        if self.kind == "constant":
            if self.eps.imag < 0:
                raise ValueError(f"passive medium requires Im eps >= 0, got {self.eps}")
        elif self.kind == "drude":
            if self.gamma_d < 0:
                raise ValueError("Drude damping must be >= 0")
        elif self.kind == "table":
            lam = np.asarray(self.table_lambda, dtype=float)
            if len(lam) < 2 or np.any(np.diff(lam) <= 0):
                raise ValueError("table must have >= 2 strictly increasing wavelengths")
            if np.any(np.asarray(self.table_eps).imag < -1e-300):
                raise ValueError("passive medium requires Im eps >= 0 at every table point")
        else:
            raise ValueError(f"unknown material kind {self.kind!r}")

    @staticmethod
    def constant(eps) -> "Material":
        return Material(kind="constant", eps=complex(eps))

    @staticmethod
    def drude(eps_inf, omega_p, gamma_d) -> "Material":
        return Material(kind="drude", eps_inf=float(eps_inf), omega_p=float(omega_p),
                        gamma_d=float(gamma_d))

    @staticmethod
    def table(lambdas_um, eps_values) -> "Material":
        return Material(kind="table", table_lambda=tuple(float(x) for x in lambdas_um),
                        table_eps=tuple(complex(e) for e in eps_values))


def permittivity(material: Material, sp: SpectralPoint) -> complex:
    """Permittivity eps(lambda). Pure: identical inputs give identical outputs."""
    if material.kind == "constant":
        return material.eps
    if material.kind == "drude":
        w = sp.omega
        return material.eps_inf - material.omega_p**2 / (w * (w + 1j * material.gamma_d))
    lam = np.asarray(material.table_lambda)
    if not (lam[0] <= sp.lambda_um <= lam[-1]):
        raise RangeError(
            f"lambda={sp.lambda_um} um outside table range [{lam[0]}, {lam[-1]}]")
    eps = np.asarray(material.table_eps)
    er = np.interp(sp.lambda_um, lam, eps.real)
    ei = np.interp(sp.lambda_um, lam, eps.imag)
    return complex(er, ei)


def lossless_variant(material: Material) -> Material:
    """Same material with Im eps forced to zero at every wavelength."""
    if material.kind == "constant":
        return Material.constant(material.eps.real)
    if material.kind == "drude":
        return Material.drude(material.eps_inf, material.omega_p, 0.0)
    return Material.table(material.table_lambda,
                          [e.real for e in material.table_eps])


@dataclass(frozen=True)
class Background:
    """Reference medium: homogeneous, or superstrate/substrate split at y = 0.

    The superstrate (y > 0) hosts the emitter and, in the two-layer case, the
    whole waveguide cross-section.
    """

    kind: str                # "homogeneous" | "two_layer"
    eps1: complex            # host / superstrate permittivity
    eps3: complex = 1.0 + 0j  # substrate permittivity (two_layer only)

    def __post_init__(self):
        if self.kind not in ("homogeneous", "two_layer"):
            raise ValueError(f"unknown background kind {self.kind!r}")
        if abs(self.eps1.imag) > 1e-9:
            raise ValueError("host medium must be lossless (Im eps1 = 0)")

    @staticmethod
    def homogeneous(eps1) -> "Background":
        return Background(kind="homogeneous", eps1=complex(eps1))

    @staticmethod
    def two_layer(eps1, eps3) -> "Background":
        return Background(kind="two_layer", eps1=complex(eps1), eps3=complex(eps3))

    @property
    def n1(self) -> float:
        return float(np.sqrt(self.eps1.real))

    @property
    def n_max(self) -> float:
        """Largest refractive index over the open half-spaces."""
        if self.kind == "homogeneous":
            return self.n1
        return float(max(self.n1, np.sqrt(self.eps3.real)))

    def eps_ref_at(self, points) -> np.ndarray:
        """Reference permittivity at transverse points (..., 2)."""
        pts = np.asarray(points, dtype=float)
        if self.kind == "homogeneous":
            return np.full(pts.shape[:-1], self.eps1, dtype=complex)
        return np.where(pts[..., 1] > 0, self.eps1, self.eps3)


def _polygon_vertices_regular(center, circumradius, n_sides, rotation):
    ang = rotation + 2 * np.pi * np.arange(n_sides) / n_sides
    return np.stack([center[0] + circumradius * np.cos(ang),
                     center[1] + circumradius * np.sin(ang)], axis=-1)


def _segments_intersect(p1, p2, p3, p4):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass(frozen=True)
class CrossSection:
    """Waveguide cross-section: a simple closed shape filled with one material."""

    shape: str               # "circle" | "regular_polygon" | "polygon"
    material: Material
    center: tuple = (0.0, 0.0)
    radius: float = 0.0          # circle
    circumradius: float = 0.0    # regular polygon
    n_sides: int = 0
    rotation: float = 0.0
    vertices: tuple = ()         # polygon: ((x, y), ...)

    def __post_init__(self):
        if self.shape == "circle":
            if not self.radius > 0:
                raise GeometryError("circle radius must be positive")
        elif self.shape == "regular_polygon":
            if self.n_sides < 3 or not self.circumradius > 0:
                raise GeometryError("regular polygon needs n_sides >= 3 and positive circumradius")
        elif self.shape == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or len(v) < 3:
                raise GeometryError("polygon needs >= 3 vertices")
            n = len(v)
            area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
            if abs(area2) < 1e-18:
                raise GeometryError("polygon has zero area")
            for i in range(n):
                for j in range(i + 1, n):
                    if j == i or (j + 1) % n == i or (i + 1) % n == j:
                        continue
                    if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                        raise GeometryError("polygon boundary self-intersects")
        else:
            raise GeometryError(f"unknown shape {self.shape!r}")

    @staticmethod
    def circle(material, radius, center=(0.0, 0.0)) -> "CrossSection":
        return CrossSection(shape="circle", material=material, radius=float(radius),
                            center=(float(center[0]), float(center[1])))

    @staticmethod
    def regular_polygon(material, circumradius, n_sides, rotation=0.0,
                        center=(0.0, 0.0)) -> "CrossSection":
        return CrossSection(shape="regular_polygon", material=material,
                            circumradius=float(circumradius), n_sides=int(n_sides),
                            rotation=float(rotation),
                            center=(float(center[0]), float(center[1])))

    @staticmethod
    def polygon(material, vertices) -> "CrossSection":
        return CrossSection(shape="polygon", material=material,
                            vertices=tuple((float(x), float(y)) for x, y in vertices))

    def _poly_vertices(self) -> np.ndarray:
        if self.shape == "regular_polygon":
            return _polygon_vertices_regular(self.center, self.circumradius,
                                             self.n_sides, self.rotation)
        return np.asarray(self.vertices, dtype=float)

    def contains(self, points) -> np.ndarray:
        """Vectorized point-in-shape test for points of shape (..., 2)."""
        pts = np.asarray(points, dtype=float)
        if self.shape == "circle":
            dx = pts[..., 0] - self.center[0]
            dy = pts[..., 1] - self.center[1]
            return dx * dx + dy * dy <= self.radius**2
        v = self._poly_vertices()
        x, y = pts[..., 0], pts[..., 1]
        inside = np.zeros(pts.shape[:-1], dtype=bool)
        n = len(v)
        for i in range(n):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % n]
            cond = (y1 > y) != (y2 > y)
            xint = (x2 - x1) * (y - y1) / (y2 - y1 + 1e-300) + x1
            inside ^= cond & (x < xint)
        return inside

    def area(self) -> float:
        if self.shape == "circle":
            return float(np.pi * self.radius**2)
        v = self._poly_vertices()
        return float(0.5 * abs(np.sum(v[:, 0] * np.roll(v[:, 1], -1)
                                      - np.roll(v[:, 0], -1) * v[:, 1])))

    def perimeter(self) -> float:
        if self.shape == "circle":
            return float(2 * np.pi * self.radius)
        v = self._poly_vertices()
        return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))

    def surface_distance(self, point) -> float:
        """Distance from an exterior point to the shape boundary."""
        p = np.asarray(point, dtype=float)
        if self.shape == "circle":
            return float(np.hypot(*(p - self.center)) - self.radius)
        v = self._poly_vertices()
        best = np.inf
        n = len(v)
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            ab = b - a
            t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
            best = min(best, float(np.hypot(*(p - (a + t * ab)))))
        return best if not self.contains(p) else -best

    def feature_size(self) -> float:
        """Smallest geometric feature, used for the mesh-pitch precondition."""
        if self.shape == "circle":
            return self.radius
        v = self._poly_vertices()
        edges = np.hypot(*(np.roll(v, -1, axis=0) - v).T)
        return float(min(edges.min(), np.sqrt(self.area())))


@dataclass(frozen=True)
class Mesh:
    """Square-cell discretization of a cross-section.

    centers: (N, 2) cell centers on a lattice of pitch h, midpoint-clipped to
    the shape; delta_eps: per-cell eps_guide - eps_ref.
    """

    h: float
    centers: np.ndarray
    areas: np.ndarray
    delta_eps: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.centers)

    def with_delta_eps(self, delta_eps) -> "Mesh":
        return Mesh(h=self.h, centers=self.centers, areas=self.areas,
                    delta_eps=np.asarray(delta_eps, dtype=complex))


def build_mesh(cs: CrossSection, background: Background, h: float,
               sp: Optional[SpectralPoint] = None) -> Mesh:
    """Mesh a cross-section with square cells of pitch h (midpoint in/out rule).

    sp is required when the guide material is dispersive; for constant
    materials it may be omitted.
    """
    if not h > 0:
        raise GeometryError("mesh pitch must be positive")
    if h > cs.feature_size() / 4:
        raise GeometryError(
            f"mesh pitch h={h} exceeds a quarter of the smallest feature "
            f"{cs.feature_size():.4g}")
    if cs.material.kind != "constant" and sp is None:
        raise ValueError("dispersive guide material requires a SpectralPoint")

    v = (cs._poly_vertices() if cs.shape != "circle"
         else np.array(cs.center) + np.array([[cs.radius, 0], [-cs.radius, 0],
                                              [0, cs.radius], [0, -cs.radius]]))
    lo = v.min(axis=0) - h
    hi = v.max(axis=0) + h
    i0 = np.floor(lo / h).astype(int)
    i1 = np.ceil(hi / h).astype(int)
    xs = (np.arange(i0[0], i1[0] + 1) + 0.5) * h
    ys = (np.arange(i0[1], i1[1] + 1) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    pts = pts[cs.contains(pts)]
    if len(pts) == 0:
        raise GeometryError("mesh produced no cells; shape degenerate at this pitch")

    if background.kind == "two_layer" and np.any(pts[:, 1] <= 0):
        raise GeometryError("cross-section must lie entirely inside the superstrate (y > 0)")

    eps_g = (cs.material.eps if cs.material.kind == "constant"
             else permittivity(cs.material, sp))
    deps = eps_g - background.eps_ref_at(pts)
    return Mesh(h=float(h), centers=pts, areas=np.full(len(pts), h * h),
                delta_eps=np.asarray(deps, dtype=complex))


@dataclass(frozen=True)
class EmitterSpec:
    """Point dipole: transverse position (um) and unit orientation 3-vector."""

    position: tuple
    u: tuple
    surface_distance: Optional[float] = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (3,) or abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise ValueError("orientation must be a unit 3-vector")

    @property
    def r(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @property
    def u_vec(self) -> np.ndarray:
        return np.asarray(self.u, dtype=float)


def orientation_vector(name: str, position=None, center=(0.0, 0.0)) -> np.ndarray:
    """Resolve an orientation name to a unit 3-vector in the local frame."""
    if name == "x":
        return np.array([1.0, 0.0, 0.0])
    if name == "y":
        return np.array([0.0, 1.0, 0.0])
    if name == "z":
        return np.array([0.0, 0.0, 1.0])
    if name == "radial":
        if position is None:
            raise ValueError("radial orientation needs the emitter position")
        d = np.asarray(position, dtype=float) - np.asarray(center, dtype=float)
        nrm = np.linalg.norm(d)
        if nrm == 0:
            raise ValueError("radial orientation undefined at the shape center")
        return np.array([d[0] / nrm, d[1] / nrm, 0.0])
    raise ValueError(f"unknown orientation {name!r}")


def emitter_at_distance(cs: CrossSection, d: float, direction_rad: float,
                        orientation: str = "radial") -> EmitterSpec:
    """Emitter at distance d from the surface along a ray from the shape center."""
    if not d > 0:
        raise DomainError("emitter surface distance must be positive")
    c = np.asarray(cs.center if cs.shape != "polygon"
                   else np.mean(cs._poly_vertices(), axis=0))
    ray = np.array([np.cos(direction_rad), np.sin(direction_rad)])
    # walk outward from the boundary along the ray
    if cs.shape == "circle":
        pos = c + (cs.radius + d) * ray
    else:
        # bisect for the boundary crossing on the ray
        lo, hi = 0.0, 4 * (cs.feature_size() + np.max(np.abs(cs._poly_vertices() - c)))
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if cs.contains(c + mid * ray):
                lo = mid
            else:
                hi = mid
        pos = c + (0.5 * (lo + hi) + d) * ray
    u = orientation_vector(orientation, pos, c)
    return EmitterSpec(position=(float(pos[0]), float(pos[1])),
                       u=(float(u[0]), float(u[1]), float(u[2])),
                       surface_distance=float(d))


def validate_emitter(emitter: EmitterSpec, cs: CrossSection, mesh: Mesh) -> None:
    """Reject emitters inside the guide or closer than one cell to any cell center."""
    if cs.contains(emitter.r):
        raise DomainError("emitter position lies inside the cross-section")
    dmin = np.min(np.hypot(*(mesh.centers - emitter.r).T))
    if dmin < mesh.h:
        raise DomainError(
            f"emitter within one cell of the mesh (min distance {dmin:.4g} < h={mesh.h}); "
            "results would be mesh-limited")
