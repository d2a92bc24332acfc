"""Figure rendering for the report paths.

Every CLI command drops a PNG next to its CSV/JSON output. Figures are
rendered with the Agg backend and saved without a date stamp so repeated runs
are byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dynamics import ScanResult

__all__ = [
    "save_scan_figure",
    "save_rabi_figure",
    "save_crosstalk_figure",
    "save_compare_modes_figure",
    "save_image_figure",
    "save_profile_fit_figure",
]

_SAVE_KW = dict(dpi=150, metadata={"Date": None})


def _fit_curve(spots, x):
    y = np.zeros_like(x)
    for s in spots:
        y += s.amplitude * np.exp(-2.0 * ((x - s.center_um) / s.waist_um) ** 2)
    return y


def save_scan_figure(path, result: ScanResult, fits: dict | None = None) -> None:
    """Frequency-scan responses per ion with their Gaussian fits."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    xs = result.values
    dense = np.linspace(xs.min(), xs.max(), 600)
    for i, label in enumerate(result.ion_labels):
        (line,) = ax.plot(xs, result.p_estimate[i], "o", ms=3, label=f"ion {label}")
        if fits and label in fits and fits[label] is not None:
            ax.plot(dense, _fit_curve(fits[label].spots, dense), "--",
                    color=line.get_color(), lw=1.2)
    ax.set_xlabel("AOD drive frequency (MHz)")
    ax.set_ylabel("excitation probability")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_rabi_figure(path, result: ScanResult, addressed_label: str,
                     fit=None) -> None:
    """Rabi flopping of the addressed ion and the victims' responses."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for i, label in enumerate(result.ion_labels):
        marker = "o" if label == addressed_label else "s"
        ax.plot(result.values, result.p_estimate[i], marker, ms=3,
                label=f"ion {label}" + (" (addressed)" if label == addressed_label else ""))
    if fit is not None:
        t = np.linspace(result.values.min(), result.values.max(), 800)
        curve = 0.5 * (1 - np.exp(-fit.decay_rate_per_s * t * 1e-6)
                       * np.cos(fit.omega_rad_s * t * 1e-6))
        ax.plot(t, curve, "k--", lw=1.0,
                label=f"fit: period {fit.period_us:.2f} us")
    ax.set_xlabel("interaction time (us)")
    ax.set_ylabel("excitation probability")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_crosstalk_figure(path, scans: dict[str, ScanResult],
                          matrix: np.ndarray, labels) -> None:
    """Long-time victim flopping per addressed ion plus the analytic matrix."""
    n = len(scans)
    fig, axes = plt.subplots(1, n + 1, figsize=(4.2 * (n + 1), 3.6))
    axes = np.atleast_1d(axes)
    for ax, (addressed, result) in zip(axes, scans.items()):
        for i, label in enumerate(result.ion_labels):
            ax.plot(result.values / 1000.0, result.p_estimate[i], "o", ms=2.5,
                    label=f"ion {label}")
        ax.set_title(f"addressing ion {addressed}", fontsize=10)
        ax.set_xlabel("interaction time (ms)")
        ax.set_ylabel("excitation probability")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(frameon=False, fontsize=8)
    ax = axes[-1]
    im = ax.imshow(np.maximum(matrix, 1e-12), cmap="viridis",
                   norm=matplotlib.colors.LogNorm())
    ax.set_xticks(range(len(labels)), labels)
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("victim ion")
    ax.set_ylabel("addressed ion")
    ax.set_title("analytic Rabi-rate crosstalk", fontsize=10)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_compare_modes_figure(path, pair_rows: list[dict],
                              reference_rows: list[dict]) -> None:
    """Rabi crosstalk vs intensity crosstalk for both addressing schemes."""
    fig, ax = plt.subplots(figsize=(6, 4.4))
    eps = np.logspace(-6.5, -1, 200)
    ax.loglog(eps, np.sqrt(eps), "-", color="tab:orange", lw=1.2,
              label="single-side: sqrt(intensity crosstalk)")
    ax.loglog(eps, eps, "-", color="tab:blue", lw=1.2,
              label="double-side: linear")
    for row in pair_rows:
        e = row["intensity_crosstalk"]
        ax.plot(e, row["rabi_crosstalk_ssa"], "^", color="tab:orange", ms=7)
        ax.plot(e, row["rabi_crosstalk_dsa"], "v", color="tab:blue", ms=7)
    for ref in reference_rows:
        marker = "*" if ref["sides"] == 2 else "x"
        rabi = ref["rabi_crosstalk"]
        lo = float(rabi.split("%")[0].split("-")[0]) / 100.0
        ax.plot(ref["intensity_crosstalk"], lo, marker, color="gray", ms=8)
        ax.annotate(ref["system"].split(" ")[0], (ref["intensity_crosstalk"], lo),
                    textcoords="offset points", xytext=(4, 4), fontsize=7, color="gray")
    ax.set_xlabel("intensity crosstalk")
    ax.set_ylabel("Rabi-rate crosstalk")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_image_figure(path, image, positions, values, markers_um=None) -> None:
    """Composite spot image and its chain-axis cross section (log scale)."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6),
                                   gridspec_kw={"height_ratios": [1, 1.4]})
    x = image.x_coords()
    y = image.y_coords()
    ax1.imshow(image.pixels, origin="lower", aspect="equal", cmap="inferno",
               extent=[x[0], x[-1], y[0], y[-1]])
    ax1.set_xlabel("x (um)")
    ax1.set_ylabel("y (um)")
    floor = max(values[values > 0].min() if np.any(values > 0) else 1e-12, 1e-12)
    ax2.semilogy(positions, np.clip(values, floor, None), "-", lw=1.0)
    if markers_um:
        for m in markers_um:
            ax2.axvline(m, color="gray", ls=":", lw=0.8)
    ax2.set_xlabel("position along chain (um)")
    ax2.set_ylabel("intensity")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_profile_fit_figure(path, x, y, fit) -> None:
    """Measured profile samples with the fitted Gaussian sum."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(x, y, "o", ms=3, label="data")
    dense = np.linspace(np.min(x), np.max(x), 600)
    ax.plot(dense, _fit_curve(fit.spots, dense), "--", lw=1.2,
            label=f"fit ({len(fit.spots)} spots)")
    ax.set_xlabel("position (um)")
    ax.set_ylabel("intensity")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
