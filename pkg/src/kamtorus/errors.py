"""Exception hierarchy shared across the package."""


class KamtorusError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(KamtorusError):
    """Scenario/configuration files that do not validate."""


class DimensionMismatchError(KamtorusError):
    pass


class UnimodularityError(KamtorusError):
    """Integer matrix whose determinant is not +-1."""


class JordanCaseError(KamtorusError):
    """Non-semisimple (or numerically inseparable) linear part."""


class OrbitScanError(KamtorusError):
    """Dual-orbit scan exceeded its search bound."""


class SupportEscapeError(KamtorusError):
    """Affine composition pushed coefficients beyond the working box."""


class TruncationError(KamtorusError):
    """Truncation level incompatible with the stored box."""


class GridSizeError(KamtorusError):
    """Grid too small for the dealiasing rule."""


class SmallDivisorError(KamtorusError):
    """|lambda - e^{2 pi i <m, phi>}| below the certified threshold."""


class ObstructionError(KamtorusError):
    """Right-hand side with non-vanishing obstructions fed to the solver."""


class CommutationError(KamtorusError):
    """Input pair violates the commutation identity beyond tolerance."""


class InversionError(KamtorusError):
    """Near-identity inversion precondition or convergence failure."""


class MonotonicityError(KamtorusError):
    """Frequency family not monotone on the exclusion interval."""


class CertificationError(KamtorusError):
    """A certificate (Diophantine, measure, Pyartli) failed to verify."""
