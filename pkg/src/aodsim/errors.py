"""Exception types shared across the package."""


class AodsimError(Exception):
    """Base class for all package-specific errors."""


class CalibrationError(AodsimError):
    """Degenerate channel calibration (e.g. identical reference frequencies)."""


class ToneBudgetError(AodsimError):
    """Tone set violates the RF saturation budget or an individual tone cap."""


class NormalizationError(AodsimError):
    """Zero (or negative) intensity at a site used for normalization."""


class AmbiguityError(AodsimError):
    """Data cannot pin down an oscillation frequency (span below half a period)."""


class GeometryError(AodsimError):
    """Incompatible or degenerate image geometry (grids, borders, section lines)."""


class DetectorRangeError(AodsimError):
    """Magnified ion image falls outside the detector extent."""


class ConfigError(AodsimError):
    """Scenario configuration is missing keys, malformed, or inconsistent."""
