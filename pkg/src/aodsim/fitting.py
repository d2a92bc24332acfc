"""Inverse procedures: multi-Gaussian profile fits and Rabi-rate extraction.

The least-squares fits run on a small damped (Levenberg-Marquardt style)
solver with analytic Jacobians; the problems are smooth and low-dimensional,
so no external optimizer is needed. Slow crosstalk-driven rates are extracted
by inverting the excitation probability with arccos, valid while the victim
has not passed half a flop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .beams import GaussianSpot
from .errors import AmbiguityError

__all__ = [
    "FitResult",
    "RabiFit",
    "fit_multi_gaussian",
    "extract_spacing_and_waist",
    "fit_rabi_flopping",
    "extract_slow_rabi",
    "rabi_crosstalk",
]

# FWHM of A*exp(-2(x/w)^2) is w*sqrt(2 ln 2); its inverse seeds waists from
# measured full widths at half maximum.
FWHM_TO_WAIST = 1.0 / math.sqrt(2.0 * math.log(2.0))

_MAX_ITER = 500
_RTOL = 1e-9
_GTOL = 1e-9


@dataclass
class FitResult:
    """Converged (or best-effort) multi-Gaussian fit, spots sorted by center."""

    spots: list[GaussianSpot]
    residual_norm: float
    iterations: int
    converged: bool
    residual_sensitivity: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "spots": [s.to_dict() for s in self.spots],
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            # linearized residual-norm response to a 100% relative change of
            # each parameter (Jacobian column norm x parameter magnitude)
            "residual_sensitivity": self.residual_sensitivity,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class RabiFit:
    """Fitted Rabi rate (rad/s) and contrast decay rate (1/s)."""

    omega_rad_s: float
    decay_rate_per_s: float
    residual_norm: float

    @property
    def period_us(self) -> float:
        return 2.0 * math.pi / self.omega_rad_s * 1e6

    def to_dict(self) -> dict:
        return {
            "omega_rad_s": self.omega_rad_s,
            "rabi_frequency_khz": self.omega_rad_s / (2.0 * math.pi) / 1e3,
            "period_us": self.period_us,
            "decay_rate_per_s": self.decay_rate_per_s,
            "residual_norm": self.residual_norm,
        }


def _damped_least_squares(residual_fn, jacobian_fn, p0, max_iter=_MAX_ITER):
    """Minimize ||residual(p)|| with a Marquardt-damped Gauss-Newton loop.

    Accepts only improving steps, so the returned residual norm never exceeds
    the initialization's. Converged when the relative residual-norm change or
    the gradient infinity-norm drops below 1e-9 within the iteration cap.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = residual_fn(p)
    rnorm = float(np.linalg.norm(r))
    lam = 1e-3
    iterations = 0
    for iterations in range(1, max_iter + 1):
        J = jacobian_fn(p)
        g = J.T @ r
        if np.max(np.abs(g)) < _GTOL:
            return p, rnorm, iterations - 1, True
        JtJ = J.T @ J
        diag = np.diag(JtJ).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        while lam <= 1e12:
            try:
                step = np.linalg.solve(JtJ + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = residual_fn(p + step)
            rnorm_new = float(np.linalg.norm(r_new))
            if rnorm_new < rnorm:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            return p, rnorm, iterations, False
        p = p + step
        change = (rnorm - rnorm_new) / max(rnorm, 1e-300)
        r, rnorm = r_new, rnorm_new
        lam = max(lam / 3.0, 1e-12)
        if change < _RTOL:
            return p, rnorm, iterations, True
    return p, rnorm, max_iter, False


def _gauss_sum(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = np.zeros_like(x)
    for a, c, w in params.reshape(-1, 3):
        w = max(abs(w), 1e-9)
        y += a * np.exp(-2.0 * ((x - c) / w) ** 2)
    return y


def _gauss_sum_jacobian(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = params.size // 3
    J = np.zeros((x.size, params.size))
    for i in range(n):
        a, c, w = params[3 * i: 3 * i + 3]
        sw = max(abs(w), 1e-9) * (1.0 if w >= 0 else -1.0)
        u = (x - c) / sw
        e = np.exp(-2.0 * u * u)
        J[:, 3 * i] = e
        J[:, 3 * i + 1] = a * e * 4.0 * u / sw
        J[:, 3 * i + 2] = a * e * 4.0 * u * u / sw
    return J


def _initial_spots(x: np.ndarray, y: np.ndarray, n_spots: int) -> np.ndarray:
    """Seed parameters from peak detection (maxima above 5x the MAD)."""
    med = float(np.median(y))
    mad = float(np.median(np.abs(y - med)))
    # the distance floor keeps noise wiggles on one apex from eating two seeds
    idx, props = find_peaks(y, height=med + 5.0 * mad,
                            distance=max(1, x.size // (2 * (n_spots + 1))))
    order = np.argsort(props["peak_heights"])[::-1]
    idx = idx[order][:n_spots]

    span = float(x.max() - x.min())
    fallback_w = max(span / (6.0 * max(n_spots, 1)), 1e-6)
    params = []
    for p in idx:
        amp = y[p] - med
        half = med + 0.5 * amp
        left = p
        while left > 0 and y[left] > half:
            left -= 1
        right = p
        while right < y.size - 1 and y[right] > half:
            right += 1
        fwhm = x[right] - x[left]
        w = fwhm * FWHM_TO_WAIST if fwhm > 0 else fallback_w
        params.extend([max(amp, 0.0), x[p], w])
    while len(params) < 3 * n_spots:
        # not enough detected peaks: seed the remainder at the data maximum
        k = int(np.argmax(y))
        params.extend([max(y[k] - med, 0.0), x[k], fallback_w])
    return np.asarray(params, dtype=float)


def _canonical_spots(params: np.ndarray) -> list[GaussianSpot]:
    triples = [(a, c, abs(w)) for a, c, w in params.reshape(-1, 3)]
    triples.sort(key=lambda t: t[1])
    return [GaussianSpot(max(a, 0.0), c, max(w, 1e-9)) for a, c, w in triples]


def fit_multi_gaussian(x, y, n_spots: int, init=None) -> FitResult:
    """Least-squares fit of a sum of n_spots Gaussians to (x, y) data.

    init may give seed spots as GaussianSpot instances or (amplitude, center,
    waist) triples; otherwise seeds come from peak detection. Divergence is
    not an error: the best iterate is returned with converged=False.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if n_spots < 1:
        raise ValueError("n_spots must be >= 1")
    if x.size < 3 * n_spots:
        raise ValueError(
            f"need at least {3 * n_spots} points for {n_spots} spots, got {x.size}"
        )
    if np.unique(x).size != x.size:
        raise ValueError("x values must be distinct")

    if init is None:
        p0 = _initial_spots(x, y, n_spots)
    else:
        rows = []
        for s in init:
            if isinstance(s, GaussianSpot):
                rows.extend([s.amplitude, s.center_um, s.waist_um])
            else:
                rows.extend([float(v) for v in s])
        p0 = np.asarray(rows, dtype=float)
        if p0.size != 3 * n_spots:
            raise ValueError(f"init must provide {n_spots} (amplitude, center, waist) seeds")

    residual = lambda p: _gauss_sum(p, x) - y
    jacobian = lambda p: _gauss_sum_jacobian(p, x)
    p, rnorm, iters, converged = _damped_least_squares(residual, jacobian, p0)

    J = jacobian(p)
    sens = {}
    spots_sorted = _canonical_spots(p)
    # map sorted spot order back onto parameter columns for the sensitivities
    order = np.argsort(p.reshape(-1, 3)[:, 1])
    for rank, i in enumerate(order):
        for j, name in enumerate(("amplitude", "center_um", "waist_um")):
            col = 3 * i + j
            sens[f"spot{rank}.{name}"] = float(
                np.linalg.norm(J[:, col]) * abs(p[col])
            )
    return FitResult(spots_sorted, rnorm, iters, converged, sens)


def extract_spacing_and_waist(fit: FitResult) -> tuple[np.ndarray, float]:
    """Adjacent-center spacings and the mean waist of a fit.

    A single-spot fit has no spacing; the returned spacing array is empty.
    """
    if not fit.spots:
        raise ValueError("fit contains no spots")
    centers = np.array([s.center_um for s in fit.spots])
    waists = np.array([s.waist_um for s in fit.spots])
    return np.diff(centers), float(np.mean(waists))


def _dominant_frequency(t: np.ndarray, s: np.ndarray) -> float:
    """Peak of the discrete spectrum of s(t); works on non-uniform grids."""
    span = float(t.max() - t.min())
    dt = np.min(np.diff(np.sort(t)))
    f_lo = 0.25 / span
    f_hi = 0.5 / dt
    freqs = np.linspace(f_lo, f_hi, 4000)
    phase = -2j * np.pi * np.outer(freqs, t)
    power = np.abs(np.exp(phase) @ (s - s.mean())) ** 2
    return float(freqs[int(np.argmax(power))])


def fit_rabi_flopping(t_s, p, init_omega: float | None = None) -> RabiFit:
    """Fit P(t) = (1 - exp(-gamma t) cos(Omega t))/2 to flopping data.

    Times in seconds. Without init_omega the rate is seeded from the dominant
    spectral peak of 2P-1. Data that never completes half a flop cannot pin
    the rate down and raises AmbiguityError (use extract_slow_rabi on the
    final point instead).
    """
    t = np.asarray(t_s, dtype=float)
    p = np.asarray(p, dtype=float)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError("t and p must be 1-D arrays of equal length")
    if t.size < 5:
        raise ValueError(f"need at least 5 points, got {t.size}")
    span = float(t.max() - t.min())
    if span <= 0:
        raise ValueError("time values must span a nonzero interval")

    s = 2.0 * p - 1.0
    if init_omega is None:
        if float(np.std(s)) < 1e-12:
            raise AmbiguityError(
                "flat flopping data; rate is unconstrained "
                "(for sub-half-flop data use extract_slow_rabi)"
            )
        omega0 = 2.0 * math.pi * _dominant_frequency(t, s)
    else:
        omega0 = float(init_omega)

    def residual(q):
        om, ga = q
        return 0.5 * (1.0 - np.exp(-ga * t) * np.cos(om * t)) - p

    def jacobian(q):
        om, ga = q
        e = np.exp(-ga * t)
        J = np.empty((t.size, 2))
        J[:, 0] = 0.5 * e * t * np.sin(om * t)
        J[:, 1] = 0.5 * t * e * np.cos(om * t)
        return J

    q, rnorm, _, _ = _damped_least_squares(residual, jacobian, [omega0, 0.0])
    omega = abs(float(q[0]))
    gamma = max(float(q[1]), 0.0)
    if omega * span < math.pi * (1.0 - 1e-9):
        raise AmbiguityError(
            f"data spans {omega * span / math.pi:.3f} half-periods (< 1); "
            "use extract_slow_rabi on the final point instead"
        )
    return RabiFit(omega, gamma, rnorm)


def extract_slow_rabi(p_final: float, t_s: float) -> float:
    """Rabi rate (rad/s) from one long-time probability, assuming Omega*t <= pi.

    Inverts P = (1 - cos(Omega*t))/2. Evaluated as 2*asin(sqrt(P))/t (and its
    reflection above P = 1/2), which equals acos(1-2P)/t but keeps full float
    precision toward both ends of the branch.
    """
    if t_s <= 0:
        raise ValueError(f"interaction time must be > 0, got {t_s}")
    if not 0.0 <= p_final <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p_final}")
    if p_final <= 0.5:
        return 2.0 * math.asin(math.sqrt(p_final)) / t_s
    return (math.pi - 2.0 * math.asin(math.sqrt(1.0 - p_final))) / t_s


def rabi_crosstalk(p_final: float, t_s: float, omega_reference_rad_s: float) -> float:
    """Rabi-rate crosstalk: extracted slow rate over a reference rate."""
    if omega_reference_rad_s <= 0:
        raise ValueError("reference rate must be > 0")
    return extract_slow_rabi(p_final, t_s) / omega_reference_rad_s
