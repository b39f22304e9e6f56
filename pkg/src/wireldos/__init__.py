"""wireldos: spontaneous-emission channels of a dipole near a 2D plasmonic waveguide.

The library meshes a translation-invariant waveguide cross-section, solves
the discretized Lippmann-Schwinger equation at each longitudinal wavenumber
k_z, and converts the resulting k_z-resolved density of modes into the
guided-plasmon, radiative, and non-radiative decay rates of a nearby dipole,
all normalized to the free-space rate.
"""

from .circular import (CircularModeField, circular_dispersion_root,
                       gamma_pl_lossless, mode_fields)
from .errors import (ConfigError, DomainError, GeometryError, NoModeError,
                     NumericalError, RangeError, SingularityError, UsageError,
                     WireldosError)
from .green import (GreenSample, ReflectedKernel, dyad_hom, dyad_reflected,
                    scalar_g2, self_term, transverse_wavenumber)
from .ldos import (LdosSpectrum, RateBreakdown, delta_rho2d, gamma_nonradiative,
                   gamma_plasmon, gamma_radiative, rate_breakdown, rate_sweep,
                   reference_band_integral, reference_rho, spectra_for_emitters,
                   spectrum)
from .model import (Background, CrossSection, EmitterSpec, Material, Mesh,
                    SpectralPoint, build_mesh, emitter_at_distance,
                    lossless_variant, orientation_vector, permittivity,
                    validate_emitter)
from .modes import ModeInfo, fit_lorentzian, leaky_mode_split
from .scatter import (DeltaGreen, ScatterSystem, assemble, delta_green,
                      delta_green_many, ldos_map)

__version__ = "0.1.0"
