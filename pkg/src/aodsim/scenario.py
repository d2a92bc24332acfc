"""Scenario configuration: one JSON document wiring optics, AOD calibration,
ion chain, addressing mode, stray model, timings and the sampling seed.

Physical constants (wavelength, NA, calibration, waist, rates) are always
explicit in the file; only the sequence-stage timings have defaults, and the
resolved values are echoed into every report for provenance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .aod import AodChannel, DriveTone, GhostSpotModel, ToneSet, calibrate_channel, position_to_frequency, toneset_to_profile
from .beams import OpticsConstants
from .crosstalk import AddressingSystem, IonChain
from .dynamics import DecayModel, ScanSystemTemplate, SequenceTiming
from .errors import ConfigError

__all__ = ["ImagingConfig", "ScenarioConfig", "load_scenario", "builtin_scenario_path"]

_TOP_KEYS = {
    "name", "optics", "channel", "chain", "mode", "peak_rabi_khz", "stray",
    "floor", "timing", "decay_rate_per_s", "seed", "output_dir", "imaging",
}


@dataclass(frozen=True)
class ImagingConfig:
    """Synthetic-camera settings for the image pipeline."""

    pixel_pitch_um: float = 0.1
    height_px: int = 51
    margin_um: float = 3.0
    background: float = 1e-4
    noise_sigma: float = 0.0
    transverse_waist_um: float = 0.95
    maxval: int = 65535

    def __post_init__(self):
        if self.pixel_pitch_um <= 0:
            raise ConfigError("imaging.pixel_pitch_um must be > 0")
        if self.height_px < 5 or self.height_px % 2 == 0:
            raise ConfigError("imaging.height_px must be odd and >= 5")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    optics: OpticsConstants
    channel: AodChannel
    chain: IonChain
    mode: str
    peak_rabi_rad_s: tuple[float, ...]
    stray: GhostSpotModel | None
    floor: float
    timing: SequenceTiming
    decay: DecayModel
    seed: int | None
    output_dir: str
    imaging: ImagingConfig

    # -- builders -----------------------------------------------------------

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("scenario has no 'seed'; one is mandatory for sampling runs")
        return self.seed

    def ion_index(self, ion: str) -> int:
        if ion in self.chain.labels:
            return self.chain.labels.index(ion)
        try:
            idx = int(ion)
        except ValueError:
            raise ConfigError(f"unknown ion {ion!r}; labels are {list(self.chain.labels)}")
        if not 0 <= idx < len(self.chain):
            raise ConfigError(f"ion index {idx} outside the {len(self.chain)}-ion chain")
        return idx

    def tone_for_ion(self, i: int, amplitude: float = 1.0) -> DriveTone:
        freq = position_to_frequency(self.channel, self.chain.positions_um[i])
        return DriveTone(freq, amplitude)

    def profile_for_tones(self, tones: ToneSet):
        return toneset_to_profile(self.channel, tones, self.stray, self.floor)

    def system_addressing(
        self, i: int, amplitude: float = 1.0, mode: str | None = None
    ) -> AddressingSystem:
        """Addressing system for ion i driven by a single tone.

        The dead-on rate scales with the tone's optical intensity: amplitude^2
        when both arms are focused, amplitude when the second arm is uniform.
        """
        mode = self.mode if mode is None else mode
        profile = self.profile_for_tones(ToneSet((self.tone_for_ion(i, amplitude),)))
        if mode == "DSA":
            peak = self.peak_rabi_rad_s[i] * amplitude**2
            return AddressingSystem(profile, profile, "DSA", peak)
        peak = self.peak_rabi_rad_s[i] * amplitude
        return AddressingSystem(profile, None, "SSA", peak)

    def scan_template(
        self, scan_both_arms: bool = True, mode: str | None = None
    ) -> ScanSystemTemplate:
        return ScanSystemTemplate(
            mode=self.mode if mode is None else mode,
            peak_rabi_rad_s=self.peak_rabi_rad_s,
            tone_amplitude=1.0,
            stray_model=self.stray,
            floor=self.floor,
            scan_both_arms=scan_both_arms,
        )

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "optics": {
                "wavelength_nm": self.optics.wavelength_nm,
                "numerical_aperture": self.optics.numerical_aperture,
            },
            "channel": self.channel.to_dict(),
            "chain": {
                "positions_um": list(self.chain.positions_um),
                "labels": list(self.chain.labels),
            },
            "mode": self.mode,
            "peak_rabi_khz": [w / (2 * math.pi) / 1e3 for w in self.peak_rabi_rad_s],
            "floor": self.floor,
            "timing": {
                "doppler_us": self.timing.doppler_us,
                "eit_us": self.timing.eit_us,
                "pump_us": self.timing.pump_us,
                "detect_us": self.timing.detect_us,
                "repetitions": self.timing.repetitions,
            },
            "decay_rate_per_s": self.decay.rate_per_s,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }
        if self.stray is not None:
            d["stray"] = {
                "relative_amplitude": self.stray.relative_amplitude,
                "offsets_um": list(self.stray.offsets_um),
            }
        return d


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return d[key]


def scenario_from_dict(cfg: dict, name_fallback: str = "scenario") -> ScenarioConfig:
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")

    opt = _require(cfg, "optics", "scenario")
    optics = OpticsConstants(
        float(_require(opt, "wavelength_nm", "optics")),
        float(_require(opt, "numerical_aperture", "optics")),
    )

    ch = _require(cfg, "channel", "scenario")
    waist = float(_require(ch, "nominal_waist_um", "channel"))
    fc = float(_require(ch, "center_frequency_mhz", "channel"))
    if "reference_points" in ch:
        refs = ch["reference_points"]
        if len(refs) != 2:
            raise ConfigError("channel.reference_points needs exactly two [MHz, um] pairs")
        channel = calibrate_channel(fc, tuple(refs[0]), tuple(refs[1]), waist)
    else:
        channel = AodChannel(
            fc,
            float(_require(ch, "position_coefficient_um_per_mhz", "channel")),
            float(_require(ch, "center_position_um", "channel")),
            waist,
        )

    chain_cfg = _require(cfg, "chain", "scenario")
    chain = IonChain(
        tuple(_require(chain_cfg, "positions_um", "chain")),
        tuple(chain_cfg["labels"]) if "labels" in chain_cfg else None,
    )

    mode = _require(cfg, "mode", "scenario")
    if mode not in ("SSA", "DSA"):
        raise ConfigError(f"mode must be 'SSA' or 'DSA', got {mode!r}")

    rates_khz = _require(cfg, "peak_rabi_khz", "scenario")
    if len(rates_khz) != len(chain):
        raise ConfigError(
            f"peak_rabi_khz has {len(rates_khz)} entries for a {len(chain)}-ion chain"
        )
    rates = tuple(2 * math.pi * 1e3 * float(r) for r in rates_khz)

    stray = None
    if cfg.get("stray") is not None:
        s = cfg["stray"]
        stray = GhostSpotModel(
            offsets_um=tuple(_require(s, "offsets_um", "stray")),
            relative_amplitude=float(_require(s, "relative_amplitude", "stray")),
            waist_um=s.get("waist_um"),
        )

    timing_cfg = cfg.get("timing", {})
    timing = SequenceTiming(
        doppler_us=float(timing_cfg.get("doppler_us", 1000.0)),
        eit_us=float(timing_cfg.get("eit_us", 1000.0)),
        pump_us=float(timing_cfg.get("pump_us", 20.0)),
        detect_us=float(timing_cfg.get("detect_us", 1000.0)),
        repetitions=int(timing_cfg.get("repetitions", 100)),
    )

    img_cfg = cfg.get("imaging", {})
    imaging = ImagingConfig(
        pixel_pitch_um=float(img_cfg.get("pixel_pitch_um", 0.1)),
        height_px=int(img_cfg.get("height_px", 51)),
        margin_um=float(img_cfg.get("margin_um", 3.0)),
        background=float(img_cfg.get("background", 1e-4)),
        noise_sigma=float(img_cfg.get("noise_sigma", 0.0)),
        transverse_waist_um=float(img_cfg.get("transverse_waist_um", waist)),
        maxval=int(img_cfg.get("maxval", 65535)),
    )

    try:
        return ScenarioConfig(
            name=str(cfg.get("name", name_fallback)),
            optics=optics,
            channel=channel,
            chain=chain,
            mode=mode,
            peak_rabi_rad_s=rates,
            stray=stray,
            floor=float(cfg.get("floor", 0.0)),
            timing=timing,
            decay=DecayModel(float(cfg.get("decay_rate_per_s", 0.0))),
            seed=None if cfg.get("seed") is None else int(cfg["seed"]),
            output_dir=str(cfg.get("output_dir", "aodsim-out")),
            imaging=imaging,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def builtin_scenario_path(name: str = "paper") -> Path:
    """Path of a bundled scenario file (currently just 'paper')."""
    ref = resources.files("aodsim").joinpath(f"data/{name}.scenario")
    with resources.as_file(ref) as p:
        return Path(p)


def load_scenario(path_or_name) -> ScenarioConfig:
    """Load a scenario JSON file; bare names resolve to bundled scenarios."""
    path = Path(path_or_name)
    if not path.exists() and not path.suffix:
        ref = resources.files("aodsim").joinpath(f"data/{path_or_name}.scenario")
        if not ref.is_file():
            raise ConfigError(f"scenario file {path_or_name!r} not found")
        text, stem = ref.read_text(), str(path_or_name)
    elif path.exists():
        text, stem = path.read_text(), path.stem
    else:
        raise ConfigError(f"scenario file {path_or_name!r} not found")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path_or_name}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return scenario_from_dict(cfg, name_fallback=stem)
