"""Resonant carrier Rabi evolution, experiment shapes and shot sampling.

The excited-state probability of an ion driven at rate Omega for time t is
P = (1 - exp(-gamma*t)*cos(Omega*t))/2 with an optional exponential contrast
decay gamma (default 0). Frequency scans and time scans evaluate this per ion
and draw finite-shot Bernoulli outcomes from seeded, per-point substreams, so
results are bit-identical regardless of evaluation order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .aod import AodChannel, DriveTone, GhostSpotModel, ToneSet, tone_to_position, toneset_to_profile
from .crosstalk import AddressingSystem, IonChain, rabi_rate_at

__all__ = [
    "QubitSpec",
    "SequenceTiming",
    "DecayModel",
    "excitation_probability",
    "sequence_duration",
    "substream",
    "ScanSystemTemplate",
    "ScanResult",
    "frequency_scan",
    "time_scan",
    "write_scan_csv",
]


@dataclass(frozen=True)
class QubitSpec:
    """Hyperfine qubit metadata; ions start in the lower state (P = 0)."""

    hyperfine_splitting_ghz: float = 12.64


@dataclass(frozen=True)
class SequenceTiming:
    """Per-shot stage durations (us) and the shot count of one data point."""

    doppler_us: float = 1000.0
    eit_us: float = 1000.0
    pump_us: float = 20.0
    detect_us: float = 1000.0
    repetitions: int = 100

    def __post_init__(self):
        for name in ("doppler_us", "eit_us", "pump_us", "detect_us"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass(frozen=True)
class DecayModel:
    """Exponential contrast decay rate (1/s) of the Rabi oscillation."""

    rate_per_s: float = 0.0

    def __post_init__(self):
        if self.rate_per_s < 0:
            raise ValueError("decay rate must be >= 0")


def excitation_probability(rabi_rad_s: float, t_s, decay: DecayModel | None = None):
    """Excited-state probability after driving for t_s seconds.

    (1 - exp(-gamma*t)*cos(Omega*t))/2, clipped against float round-off so the
    result stays in [0, 1]. Accepts scalar or array times.
    """
    t = np.asarray(t_s, dtype=float)
    if np.any(t < 0):
        raise ValueError("interaction time must be >= 0")
    gamma = 0.0 if decay is None else decay.rate_per_s
    if gamma == 0.0:
        # sin^2(x/2) == (1-cos x)/2 without the cancellation at small x,
        # keeping the slow-rate inversion exact to machine precision
        p = np.sin(0.5 * rabi_rad_s * t) ** 2
    else:
        p = 0.5 * (1.0 - np.exp(-gamma * t) * np.cos(rabi_rad_s * t))
    p = np.clip(p, 0.0, 1.0)
    if np.ndim(t_s) == 0:
        return float(p)
    return p


def sequence_duration(timing: SequenceTiming, raman_us: float) -> tuple[float, float]:
    """(per-shot, total) duration in us of one data point's sequence.

    Cooling and pumping stages enter the accounting only; they never degrade
    the simulated state.
    """
    if raman_us < 0:
        raise ValueError("raman duration must be >= 0")
    per_shot = (
        timing.doppler_us + timing.eit_us + timing.pump_us + raman_us + timing.detect_us
    )
    return per_shot, per_shot * timing.repetitions


def substream(seed: int, ion_index: int, point_index: int) -> np.random.Generator:
    """Independent RNG substream for one (ion, scan point) pair.

    Splitting rule: the substream is seeded with the entropy tuple
    (master seed, ion index, point index) via numpy's SeedSequence, so the
    draw for any pair is independent of evaluation order and parallelism.
    """
    return np.random.default_rng(np.random.SeedSequence((seed, ion_index, point_index)))


@dataclass(frozen=True)
class ScanSystemTemplate:
    """How to turn a drive frequency into an addressing system during a scan.

    Per-ion peak rates are the dead-on Rabi rates (rad/s) when the beam sits
    exactly on that ion at the given tone amplitude. With scan_both_arms both
    focused arms follow the common drive frequency (Rabi rate tracks the
    intensity); with one arm scanning the fixed arm contributes a constant
    factor and the rate tracks sqrt(intensity), as it always does in SSA mode.
    """

    mode: str  # "SSA" | "DSA"
    peak_rabi_rad_s: tuple[float, ...]
    tone_amplitude: float = 1.0
    stray_model: GhostSpotModel | None = None
    floor: float = 0.0
    scan_both_arms: bool = True

    def __post_init__(self):
        object.__setattr__(self, "peak_rabi_rad_s", tuple(self.peak_rabi_rad_s))
        if self.mode not in ("SSA", "DSA"):
            raise ValueError(f"mode must be 'SSA' or 'DSA', got {self.mode!r}")

    def profile_at(self, channel: AodChannel, frequency_mhz: float):
        tones = ToneSet((DriveTone(frequency_mhz, self.tone_amplitude),))
        return toneset_to_profile(channel, tones, self.stray_model, self.floor)

    def system_at(self, channel: AodChannel, frequency_mhz: float):
        """Unit-peak system for one scan point and its beam-center position."""
        profile = self.profile_at(channel, frequency_mhz)
        center = tone_to_position(channel, frequency_mhz)
        if self.mode == "DSA" and self.scan_both_arms:
            return AddressingSystem(profile, profile, "DSA", 1.0), center
        # one focused arm moves; the other arm is uniform at the ions
        return AddressingSystem(profile, None, "SSA", 1.0), center

    def relative_rate(self, channel: AodChannel, frequency_mhz: float, x_um: float) -> float:
        """Rabi rate at x relative to the beam-center (dead-on) rate."""
        system, center = self.system_at(channel, frequency_mhz)
        return rabi_rate_at(system, x_um, center)


@dataclass
class ScanResult:
    """Per-ion scan curves: estimated and exact probabilities per point."""

    variable_name: str          # CSV column name for the scanned variable
    values: np.ndarray          # scanned variable, shape (npoints,)
    ion_labels: tuple[str, ...]
    p_estimate: np.ndarray      # shape (nions, npoints)
    p_exact: np.ndarray         # shape (nions, npoints)
    shots: int
    rabi_rad_s: np.ndarray      # per-ion rate, (nions,) for time scans or (nions, npoints)

    def per_ion(self, i: int) -> list[tuple[float, float, int]]:
        """(scan value, estimated P, shot count) rows for ion i."""
        return [(float(v), float(p), self.shots)
                for v, p in zip(self.values, self.p_estimate[i])]


def write_scan_csv(path, result: ScanResult) -> None:
    """Write a scan as CSV: scan variable, ion label, estimate, shots, exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [result.variable_name, "ion_label", "p_estimate", "shots", "p_exact"]
        )
        for i, label in enumerate(result.ion_labels):
            for k, v in enumerate(result.values):
                writer.writerow([
                    f"{v:.9g}", label,
                    f"{result.p_estimate[i, k]:.9g}",
                    result.shots,
                    f"{result.p_exact[i, k]:.12g}",
                ])


def frequency_scan(
    template: ScanSystemTemplate,
    channel: AodChannel,
    chain: IonChain,
    freqs_mhz,
    t_fixed_us: float,
    timing: SequenceTiming,
    seed: int,
    decay: DecayModel | None = None,
    shots: int | None = None,
) -> ScanResult:
    """Sweep the drive frequency and sample each ion's excitation.

    For every frequency the beam position follows the channel map, each ion's
    Rabi rate is its dead-on peak rate scaled by the template's relative-rate
    law, and `shots` (default: timing.repetitions) Bernoulli samples are drawn
    from the (ion, point) substream of the master seed.
    """
    freqs = np.asarray(list(freqs_mhz), dtype=float)
    if freqs.size == 0:
        raise ValueError("frequency list must be nonempty")
    if t_fixed_us <= 0:
        raise ValueError("fixed interaction time must be > 0")
    if len(template.peak_rabi_rad_s) != len(chain):
        raise ValueError("template needs one peak rate per ion")
    n_shots = timing.repetitions if shots is None else int(shots)

    t_s = t_fixed_us * 1e-6
    n_ions = len(chain)
    rabi = np.zeros((n_ions, freqs.size))
    p_exact = np.zeros_like(rabi)
    p_est = np.zeros_like(rabi)
    for k, f in enumerate(freqs):
        system, center = template.system_at(channel, f)
        for i, x in enumerate(chain.positions_um):
            rel = rabi_rate_at(system, x, center)
            rabi[i, k] = template.peak_rabi_rad_s[i] * rel
            p_exact[i, k] = excitation_probability(rabi[i, k], t_s, decay)
            rng = substream(seed, i, k)
            p_est[i, k] = rng.binomial(n_shots, p_exact[i, k]) / n_shots
    return ScanResult(
        variable_name="scan_variable_mhz",
        values=freqs,
        ion_labels=chain.labels,
        p_estimate=p_est,
        p_exact=p_exact,
        shots=n_shots,
        rabi_rad_s=rabi,
    )


def time_scan(
    system: AddressingSystem,
    chain: IonChain,
    x_addressed_um: float,
    times_us,
    timing: SequenceTiming,
    decay: DecayModel | None = None,
    seed: int = 0,
    shots: int | None = None,
) -> ScanResult:
    """Vary the interaction time at a fixed beam position.

    The addressed ion evolves at the system's peak rate; every other ion at
    its crosstalk rate from the same beam profiles.
    """
    times = np.asarray(list(times_us), dtype=float)
    if times.size == 0:
        raise ValueError("time list must be nonempty")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted ascending")
    n_shots = timing.repetitions if shots is None else int(shots)

    n_ions = len(chain)
    rates = np.array([
        rabi_rate_at(system, x, x_addressed_um) for x in chain.positions_um
    ])
    p_exact = np.zeros((n_ions, times.size))
    p_est = np.zeros_like(p_exact)
    for i in range(n_ions):
        p_exact[i] = excitation_probability(rates[i], times * 1e-6, decay)
        for k in range(times.size):
            rng = substream(seed, i, k)
            p_est[i, k] = rng.binomial(n_shots, p_exact[i, k]) / n_shots
    return ScanResult(
        variable_name="scan_variable_us",
        values=times,
        ion_labels=chain.labels,
        p_estimate=p_est,
        p_exact=p_exact,
        shots=n_shots,
        rabi_rad_s=rates,
    )
