"""1-D Gaussian intensity fields at the ion plane.

A beam profile is a sum of Gaussian spots A*exp(-2*((x-x0)/w)^2) — principal
addressing spots plus optional low-amplitude ghost spots and a constant
pedestal. Waists are 1/e^2 intensity radii. Positions and waists in um,
intensities dimensionless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GaussianSpot",
    "BeamProfile",
    "OpticsConstants",
    "intensity_at",
    "diffraction_limit",
    "profile_extremum",
]


@dataclass(frozen=True)
class GaussianSpot:
    """One Gaussian spot: peak intensity, center position and 1/e^2 waist."""

    amplitude: float
    center_um: float
    waist_um: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"spot amplitude must be >= 0, got {self.amplitude}")
        if self.waist_um <= 0:
            raise ValueError(f"spot waist must be > 0, got {self.waist_um}")

    def intensity(self, x_um):
        """Intensity at x_um; exactly `amplitude` at the center."""
        u = (np.asarray(x_um, dtype=float) - self.center_um) / self.waist_um
        return self.amplitude * np.exp(-2.0 * u * u)

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "center_um": self.center_um,
            "waist_um": self.waist_um,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianSpot":
        return cls(float(d["amplitude"]), float(d["center_um"]), float(d["waist_um"]))


@dataclass(frozen=True)
class BeamProfile:
    """Principal spots + ghost spots + constant pedestal of one Raman arm."""

    spots: tuple[GaussianSpot, ...]
    stray_spots: tuple[GaussianSpot, ...] = ()
    floor: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "spots", tuple(self.spots))
        object.__setattr__(self, "stray_spots", tuple(self.stray_spots))
        if self.floor < 0:
            raise ValueError(f"pedestal floor must be >= 0, got {self.floor}")

    def all_spots(self) -> tuple[GaussianSpot, ...]:
        return self.spots + self.stray_spots

    def to_dict(self) -> dict:
        return {
            "spots": [s.to_dict() for s in self.spots],
            "stray_spots": [s.to_dict() for s in self.stray_spots],
            "floor": self.floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BeamProfile":
        return cls(
            spots=tuple(GaussianSpot.from_dict(s) for s in d.get("spots", [])),
            stray_spots=tuple(GaussianSpot.from_dict(s) for s in d.get("stray_spots", [])),
            floor=float(d.get("floor", 0.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BeamProfile":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class OpticsConstants:
    """Laser wavelength (nm) and numerical aperture of the focusing objective."""

    wavelength_nm: float
    numerical_aperture: float

    def __post_init__(self):
        if self.wavelength_nm <= 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength_nm}")
        if not 0.0 < self.numerical_aperture < 1.0:
            raise ValueError(
                f"numerical aperture must be in (0, 1), got {self.numerical_aperture}"
            )


def intensity_at(profile: BeamProfile, x_um):
    """Total intensity of the profile at x_um (scalar or array).

    Sum over principal and ghost spots plus the pedestal; always >= floor.
    """
    x = np.asarray(x_um, dtype=float)
    total = np.full_like(x, profile.floor, dtype=float)
    for spot in profile.all_spots():
        total += spot.intensity(x)
    if np.ndim(x_um) == 0:
        return float(total)
    return total


def diffraction_limit(constants: OpticsConstants) -> float:
    """Diffraction-limited spot radius in um, Rayleigh form 0.61*lambda/NA."""
    return 0.61 * constants.wavelength_nm * 1e-3 / constants.numerical_aperture


def profile_extremum(
    profile: BeamProfile,
    window_um: tuple[float, float],
    step_um: float = 0.01,
) -> tuple[float, float]:
    """Grid position and value of the intensity maximum inside a window.

    Uniform grid search (multi-spot profiles have no closed-form argmax);
    ties break toward smaller x. Raises ValueError on an empty window.
    """
    lo, hi = window_um
    if not hi >= lo:
        raise ValueError(f"empty search window [{lo}, {hi}]")
    if step_um <= 0:
        raise ValueError(f"grid step must be > 0, got {step_um}")
    n = int(np.floor((hi - lo) / step_um)) + 1
    grid = lo + step_um * np.arange(n)
    if grid[-1] < hi:
        grid = np.append(grid, hi)
    values = intensity_at(profile, grid)
    k = int(np.argmax(values))  # argmax returns the first (smallest-x) maximum
    return float(grid[k]), float(values[k])
