"""AOD drive tones to focal-plane beam spots.

The deflector maps drive frequency to focal position through an affine
relation (small-angle regime, two-point calibrated). Optical intensity of a
diffracted spot scales as the square of the RF tone amplitude; tone phases
are carried for schedule completeness but spots at distinct positions add
incoherently, so phases never enter the intensity profile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .beams import BeamProfile, GaussianSpot
from .errors import CalibrationError, ToneBudgetError

__all__ = [
    "AodChannel",
    "DriveTone",
    "ToneSet",
    "GhostSpotModel",
    "tone_to_position",
    "position_to_frequency",
    "calibrate_channel",
    "toneset_to_profile",
    "equalize_amplitudes",
]


@dataclass(frozen=True)
class AodChannel:
    """Affine drive-frequency -> focal-position map of one deflector."""

    center_frequency_mhz: float
    position_coefficient_um_per_mhz: float
    center_position_um: float
    nominal_waist_um: float

    def __post_init__(self):
        if self.position_coefficient_um_per_mhz == 0:
            raise ValueError("position coefficient must be nonzero")
        if self.nominal_waist_um <= 0:
            raise ValueError(f"nominal waist must be > 0, got {self.nominal_waist_um}")

    def to_dict(self) -> dict:
        return {
            "center_frequency_mhz": self.center_frequency_mhz,
            "position_coefficient_um_per_mhz": self.position_coefficient_um_per_mhz,
            "center_position_um": self.center_position_um,
            "nominal_waist_um": self.nominal_waist_um,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AodChannel":
        return cls(
            float(d["center_frequency_mhz"]),
            float(d["position_coefficient_um_per_mhz"]),
            float(d["center_position_um"]),
            float(d["nominal_waist_um"]),
        )


@dataclass(frozen=True)
class DriveTone:
    """One RF tone of the waveform generator driving the deflector."""

    frequency_mhz: float
    amplitude: float
    phase_rad: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError(f"tone amplitude must be in [0, 1], got {self.amplitude}")

    def to_dict(self) -> dict:
        return {
            "frequency_mhz": self.frequency_mhz,
            "amplitude": self.amplitude,
            "phase_rad": self.phase_rad,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriveTone":
        return cls(
            float(d["frequency_mhz"]),
            float(d["amplitude"]),
            float(d.get("phase_rad", 0.0)),
        )


@dataclass(frozen=True)
class ToneSet:
    """Simultaneous drive tones; sum of amplitudes capped by the RF budget.

    budget=None disables the saturation check (per-tone [0, 1] cap remains).
    """

    tones: tuple[DriveTone, ...]
    budget: float | None = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(self.tones))
        freqs = [t.frequency_mhz for t in self.tones]
        if len(set(freqs)) != len(freqs):
            raise ValueError("tone frequencies must be pairwise distinct")
        if self.budget is not None:
            total = sum(t.amplitude for t in self.tones)
            if total > self.budget + 1e-12:
                raise ToneBudgetError(
                    f"sum of tone amplitudes {total:.6f} exceeds budget {self.budget}"
                )

    def to_dict(self) -> dict:
        return {"tones": [t.to_dict() for t in self.tones], "budget": self.budget}

    @classmethod
    def from_dict(cls, d: dict) -> "ToneSet":
        return cls(
            tones=tuple(DriveTone.from_dict(t) for t in d["tones"]),
            budget=d.get("budget", 1.0),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ToneSet":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GhostSpotModel:
    """Deterministic ghost spots trailing each principal tone spot.

    For every principal spot of amplitude A at x, appends ghosts of amplitude
    relative_amplitude*A at x + offset for each configured offset. Stands in
    for the stray light that optical aberrations scatter along the chain axis;
    deliberately agnostic about where in the train the ghosts originate.
    """

    offsets_um: tuple[float, ...]
    relative_amplitude: float
    waist_um: float | None = None  # None: inherit the principal spot waist

    def __post_init__(self):
        object.__setattr__(self, "offsets_um", tuple(self.offsets_um))
        if self.relative_amplitude < 0:
            raise ValueError("ghost relative amplitude must be >= 0")

    def ghosts(self, principal: GaussianSpot) -> list[GaussianSpot]:
        w = self.waist_um if self.waist_um is not None else principal.waist_um
        return [
            GaussianSpot(self.relative_amplitude * principal.amplitude,
                         principal.center_um + off, w)
            for off in self.offsets_um
        ]


def tone_to_position(channel: AodChannel, frequency_mhz: float) -> float:
    """Focal position (um) of the diffracted beam for a drive frequency."""
    return channel.center_position_um + channel.position_coefficient_um_per_mhz * (
        frequency_mhz - channel.center_frequency_mhz
    )


def position_to_frequency(channel: AodChannel, position_um: float) -> float:
    """Drive frequency (MHz) that places the beam at a focal position."""
    return channel.center_frequency_mhz + (
        position_um - channel.center_position_um
    ) / channel.position_coefficient_um_per_mhz


def calibrate_channel(
    center_frequency_mhz: float,
    ref1: tuple[float, float],
    ref2: tuple[float, float],
    waist_um: float,
) -> AodChannel:
    """Two-point calibration of the frequency -> position map.

    ref1, ref2 are (frequency MHz, position um) pairs, e.g. measured on two
    reference ions. Raises CalibrationError when the reference frequencies
    coincide.
    """
    f1, x1 = ref1
    f2, x2 = ref2
    if f1 == f2:
        raise CalibrationError(
            f"degenerate calibration: both references at {f1} MHz"
        )
    coeff = (x2 - x1) / (f2 - f1)
    center_pos = x1 + coeff * (center_frequency_mhz - f1)
    return AodChannel(center_frequency_mhz, coeff, center_pos, waist_um)


def toneset_to_profile(
    channel: AodChannel,
    tones: ToneSet,
    stray_model: GhostSpotModel | None = None,
    floor: float = 0.0,
) -> BeamProfile:
    """Beam profile produced by a tone set: one spot per tone.

    Spot intensity is amplitude^2 (linear diffraction regime), waist is the
    channel's nominal focal waist. The stray model, when given, appends its
    ghosts for every principal spot.
    """
    principals = [
        GaussianSpot(t.amplitude**2, tone_to_position(channel, t.frequency_mhz),
                     channel.nominal_waist_um)
        for t in tones.tones
    ]
    ghosts: list[GaussianSpot] = []
    if stray_model is not None:
        for spot in principals:
            ghosts.extend(stray_model.ghosts(spot))
    return BeamProfile(spots=tuple(principals), stray_spots=tuple(ghosts), floor=floor)


def equalize_amplitudes(
    channel: AodChannel,
    targets: list[tuple[float, float]],
    mode: str = "DSA",
    budget: float = 1.0,
) -> ToneSet:
    """Tone set whose per-target Rabi rates are proportional to the requests.

    targets are (position um, desired relative Rabi rate) pairs. With both
    arms driven by the same tone set the rate at a target scales with the
    spot intensity (amplitude^2), so DSA amplitudes go as sqrt(rate); with a
    uniform second arm (SSA) the rate scales as sqrt(intensity) = amplitude,
    so amplitudes go as the rate itself. Amplitudes are rescaled to exhaust
    the saturation budget.
    """
    if not targets:
        raise ValueError("no equalization targets given")
    if any(rate <= 0 for _, rate in targets):
        raise ValueError("desired rates must be > 0")
    if mode not in ("SSA", "DSA"):
        raise ValueError(f"mode must be 'SSA' or 'DSA', got {mode!r}")

    rates = [rate for _, rate in targets]
    if mode == "DSA":
        raw = [rate**0.5 for rate in rates]
    else:
        raw = list(rates)
    scale = budget / sum(raw)
    amplitudes = [a * scale for a in raw]
    worst = max(range(len(amplitudes)), key=lambda i: amplitudes[i])
    if amplitudes[worst] > 1.0 + 1e-12:
        raise ToneBudgetError(
            f"infeasible budget {budget}: tone for target at "
            f"{targets[worst][0]} um would need amplitude {amplitudes[worst]:.4f} > 1"
        )
    tones = tuple(
        DriveTone(position_to_frequency(channel, pos), min(amp, 1.0))
        for (pos, _), amp in zip(targets, amplitudes)
    )
    return ToneSet(tones=tones, budget=budget)
