"""Exception types shared across the package."""


class WireldosError(Exception):
    """Base class for all package errors."""


class GeometryError(WireldosError):
    """Degenerate or inconsistent geometry (zero area, self-intersection, ...)."""


class RangeError(WireldosError):
    """Argument outside the supported numeric range of a special function or table."""


class SingularityError(WireldosError):
    """Evaluation requested exactly on a singular point (rho = 0, z = 0)."""


class DomainError(WireldosError):
    """Observation or emitter point placed where the operation is not defined."""


class NumericalError(WireldosError):
    """Quadrature/factorization failed to converge; carries diagnostics in args."""


class NoModeError(WireldosError):
    """No resolved guided-mode peak in the spectrum."""


class UsageError(WireldosError):
    """Operation called with inconsistent inputs (e.g. missing mode info)."""


class ConfigError(WireldosError):
    """Invalid or unknown configuration content."""
