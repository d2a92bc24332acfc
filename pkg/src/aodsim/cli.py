"""Command-line front end.

Subcommands reproduce the desk-scale experiments: scan-frequency, rabi,
crosstalk, compare-modes, image-pipeline and fit-profile. Each command reads
one scenario JSON, writes CSV/JSON reports plus a PNG figure into the
scenario's output directory (override with AODSIM_OUTPUT_DIR), and is
bit-reproducible for a fixed seed. Exit codes: 0 success, 2 configuration
error, 3 numeric nonconvergence/ambiguity, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import plots
from .aod import ToneSet, equalize_amplitudes, tone_to_position
from .beams import diffraction_limit
from .crosstalk import (REPORTED_SYSTEMS, compare_ssa_dsa, crosstalk_matrix,
                        write_matrix_csv)
from .dynamics import frequency_scan, sequence_duration, time_scan, write_scan_csv
from .errors import AmbiguityError, AodsimError, ConfigError
from .fitting import extract_slow_rabi, fit_multi_gaussian, fit_rabi_flopping
from .imaging import (cross_section, intensity_crosstalk_at, read_pgm,
                      render_image, stitch_images, subtract_background,
                      write_pgm, write_section_csv)
from .scenario import ScenarioConfig, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENT = 3
EXIT_IO = 4

# lowest per-ion response still treated as a resolvable scan peak
MIN_PEAK_RESPONSE = 0.05


class NonConvergentError(AodsimError):
    """A fit failed to converge or the data left it ambiguous."""


def _outdir(scenario: ScenarioConfig) -> Path:
    d = Path(os.environ.get("AODSIM_OUTPUT_DIR", scenario.output_dir))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _atomic(path: Path, write_fn, companions: tuple[str, ...] = ()) -> None:
    """Write via a temp file and rename; companions are extra suffixes the
    writer produces alongside (e.g. the '.json' sidecar of a graymap)."""
    tmp = path.with_name(path.stem + ".__tmp__" + path.suffix)
    write_fn(tmp)
    for extra in companions:
        os.replace(str(tmp) + extra, str(path) + extra)
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict) -> None:
    _atomic(path, lambda p: Path(p).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"))


def _equalized_amplitudes(scn: ScenarioConfig, mode: str) -> list[float]:
    """Per-ion tone amplitudes that level the dead-on Rabi rates.

    Feeds the per-ion correction factors (target over measured rate) through
    the equalizer, then rescales so the largest tone uses the full budget
    (ions are addressed one at a time here, not simultaneously).
    """
    target = min(scn.peak_rabi_rad_s)
    corrections = [
        (x, target / rate)
        for x, rate in zip(scn.chain.positions_um, scn.peak_rabi_rad_s)
    ]
    tones = equalize_amplitudes(scn.channel, corrections, mode=mode)
    amps = [t.amplitude for t in tones.tones]
    peak = max(amps)
    return [a / peak for a in amps]


# ---------------------------------------------------------------- commands


def cmd_scan_frequency(args) -> int:
    scn = load_scenario(args.config)
    seed = scn.require_seed()
    outdir = _outdir(scn)
    freqs = np.arange(args.freq_start, args.freq_stop + 1e-9, args.freq_step)
    if freqs.size == 0:
        raise ConfigError("empty frequency grid")
    template = scn.scan_template(scan_both_arms=(args.scan_arms == "both"))
    result = frequency_scan(
        template, scn.channel, scn.chain, freqs, args.raman_time,
        scn.timing, seed, scn.decay, shots=args.shots,
    )
    _atomic(outdir / "scan_frequency.csv", lambda p: write_scan_csv(p, result))

    coeff = abs(scn.channel.position_coefficient_um_per_mhz)
    fits, fit_rows, failures = {}, [], []
    for i, label in enumerate(scn.chain.labels):
        response = result.p_estimate[i]
        if response.max() < MIN_PEAK_RESPONSE:
            fits[label] = None
            failures.append(f"ion {label}: no resolvable response peak in the scan range")
            continue
        fit = fit_multi_gaussian(freqs, response, n_spots=1)
        fits[label] = fit
        if not fit.converged:
            failures.append(f"ion {label}: fit did not converge")
        spot = fit.spots[0]
        fit_rows.append({
            "ion": label,
            "center_mhz": spot.center_um,  # fit ran in MHz units
            "center_um": tone_to_position(scn.channel, spot.center_um),
            "height": spot.amplitude,
            "waist_mhz": spot.waist_um,
            "waist_um_direct": spot.waist_um * coeff,
            "waist_um_if_intensity_squared": spot.waist_um * coeff * math.sqrt(2.0),
            "residual_norm": fit.residual_norm,
            "iterations": fit.iterations,
            "converged": fit.converged,
        })

    report = {
        "command": "scan-frequency",
        "raman_time_us": args.raman_time,
        "scan_arms": args.scan_arms,
        "shots": result.shots,
        "sequence_per_shot_us": sequence_duration(scn.timing, args.raman_time)[0],
        "diffraction_limit_um": diffraction_limit(scn.optics),
        "fits": fit_rows,
        "waist_note": ("direct interpretation assumes the response follows the "
                       "intensity; the *_if_intensity_squared value applies when "
                       "both focused arms scan together"),
        "scenario": scn.to_dict(),
    }
    if len(fit_rows) >= 2:
        centers_um = sorted(r["center_um"] for r in fit_rows)
        report["fitted_spacings_um"] = [
            b - a for a, b in zip(centers_um, centers_um[1:])
        ]
        report["mean_waist_um_direct"] = float(
            np.mean([r["waist_um_direct"] for r in fit_rows])
        )
    if failures:
        report["failures"] = failures
    _write_json(outdir / "scan_frequency_fit.json", report)
    _atomic(outdir / "scan_frequency.png",
            lambda p: plots.save_scan_figure(p, result, fits))

    for row in fit_rows:
        print(f"ion {row['ion']}: center {row['center_mhz']:.4f} MHz "
              f"({row['center_um']:.3f} um), waist {row['waist_um_direct']:.3f} um (direct)")
    if failures:
        raise NonConvergentError("; ".join(failures))
    print(f"wrote {outdir}/scan_frequency.{{csv,png}} and scan_frequency_fit.json")
    return EXIT_OK


def cmd_rabi(args) -> int:
    scn = load_scenario(args.config)
    seed = scn.require_seed()
    outdir = _outdir(scn)
    idx = scn.ion_index(args.ion)
    label = scn.chain.labels[idx]
    system = scn.system_addressing(idx)
    times = np.linspace(0.0, args.t_max, args.points)
    result = time_scan(system, scn.chain, scn.chain.positions_um[idx], times,
                       scn.timing, scn.decay, seed, shots=args.shots)
    stem = f"rabi_ion_{label}"
    _atomic(outdir / f"{stem}.csv", lambda p: write_scan_csv(p, result))

    report = {
        "command": "rabi",
        "addressed_ion": label,
        "t_max_us": args.t_max,
        "points": args.points,
        "shots": result.shots,
        "configured_rate_khz": system.peak_rabi / (2 * math.pi) / 1e3,
        "scenario": scn.to_dict(),
    }
    fit = None
    failure = None
    try:
        fit = fit_rabi_flopping(times * 1e-6, result.p_estimate[idx])
        report["fit"] = fit.to_dict()
        print(f"ion {label}: fitted Rabi period {fit.period_us:.3f} us "
              f"({fit.omega_rad_s / (2 * math.pi) / 1e3:.3f} kHz)")
    except AmbiguityError as exc:
        failure = f"ion {label}: {exc}"
        report["failures"] = [failure]
    _write_json(outdir / f"{stem}_fit.json", report)
    _atomic(outdir / f"{stem}.png",
            lambda p: plots.save_rabi_figure(p, result, label, fit))
    if failure:
        raise NonConvergentError(failure)
    print(f"wrote {outdir}/{stem}.{{csv,png}} and {stem}_fit.json")
    return EXIT_OK


def cmd_crosstalk(args) -> int:
    scn = load_scenario(args.config)
    seed = scn.require_seed()
    outdir = _outdir(scn)
    if len(scn.chain) < 2:
        raise ConfigError("crosstalk needs a chain of at least two ions")
    mode = args.mode or scn.mode
    if args.equalize:
        amps = _equalized_amplitudes(scn, mode)
    else:
        amps = [1.0] * len(scn.chain)

    systems = [
        scn.system_addressing(i, amplitude=amps[i], mode=mode)
        for i in range(len(scn.chain))
    ]
    times = np.linspace(0.0, args.t_long, args.points)
    t_final_s = args.t_long * 1e-6

    scans, pair_rows = {}, []
    for i, label in enumerate(scn.chain.labels):
        result = time_scan(systems[i], scn.chain, scn.chain.positions_um[i],
                           times, scn.timing, scn.decay, seed + i, shots=args.shots)
        scans[label] = result
        _atomic(outdir / f"crosstalk_addressing_{label}.csv",
                lambda p, r=result: write_scan_csv(p, r))
        for j, victim in enumerate(scn.chain.labels):
            if i == j:
                continue
            p_final = float(result.p_estimate[j, -1])
            omega_victim = extract_slow_rabi(p_final, t_final_s)
            pair_rows.append({
                "addressed": label,
                "victim": victim,
                "p_final": p_final,
                "extracted_rate_rad_s": omega_victim,
                # default normalization: victim's own addressed rate
                "crosstalk_victim_normalized": omega_victim / systems[j].peak_rabi,
                "crosstalk_addressed_normalized": omega_victim / systems[i].peak_rabi,
            })

    matrix = crosstalk_matrix(lambda i: systems[i], scn.chain)
    _atomic(outdir / "crosstalk_matrix.csv",
            lambda p: write_matrix_csv(p, matrix, scn.chain.labels))
    report = {
        "command": "crosstalk",
        "mode": mode,
        "equalized": bool(args.equalize),
        "tone_amplitudes": amps,
        "addressed_rates_khz": [s.peak_rabi / (2 * math.pi) / 1e3 for s in systems],
        "t_long_us": args.t_long,
        "shots": args.shots or scn.timing.repetitions,
        "extraction_note": ("rates from the final-time arccos inversion; valid "
                            "while the victim stays below half a flop"),
        "pairs": pair_rows,
        "analytic_matrix": matrix.tolist(),
        "scenario": scn.to_dict(),
    }
    _write_json(outdir / "crosstalk_report.json", report)
    _atomic(outdir / "crosstalk.png",
            lambda p: plots.save_crosstalk_figure(p, scans, matrix, scn.chain.labels))
    for row in pair_rows:
        print(f"addressing {row['addressed']} -> ion {row['victim']}: "
              f"victim-normalized {row['crosstalk_victim_normalized']:.3e}, "
              f"addressed-normalized {row['crosstalk_addressed_normalized']:.3e}")
    print(f"wrote {outdir}/crosstalk_report.json, crosstalk_matrix.csv, crosstalk.png")
    return EXIT_OK


def cmd_compare_modes(args) -> int:
    scn = load_scenario(args.config)
    outdir = _outdir(scn)
    rows = []
    for i, label in enumerate(scn.chain.labels):
        profile = scn.system_addressing(i, mode="DSA").arm1
        for j in (i - 1, i + 1):
            if not 0 <= j < len(scn.chain):
                continue
            cmp_ = compare_ssa_dsa(profile, scn.chain.positions_um[i],
                                   scn.chain.positions_um[j])
            rows.append({
                "addressed": label,
                "victim": scn.chain.labels[j],
                "intensity_crosstalk": cmp_.intensity_crosstalk,
                "rabi_crosstalk_ssa": cmp_.rabi_crosstalk_ssa,
                "rabi_crosstalk_dsa": cmp_.rabi_crosstalk_dsa,
            })

    def write_csv(path):
        import csv as _csv
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["addressed_ion", "victim_ion", "intensity_crosstalk",
                        "rabi_crosstalk_ssa", "rabi_crosstalk_dsa"])
            for r in rows:
                w.writerow([r["addressed"], r["victim"],
                            f"{r['intensity_crosstalk']:.6e}",
                            f"{r['rabi_crosstalk_ssa']:.6e}",
                            f"{r['rabi_crosstalk_dsa']:.6e}"])

    _atomic(outdir / "compare_modes.csv", write_csv)
    _write_json(outdir / "compare_modes.json", {
        "command": "compare-modes",
        "pairs": rows,
        "reference_systems": list(REPORTED_SYSTEMS),
        "scenario": scn.to_dict(),
    })
    _atomic(outdir / "compare_modes.png",
            lambda p: plots.save_compare_modes_figure(p, rows, list(REPORTED_SYSTEMS)))
    for r in rows:
        print(f"{r['addressed']} -> {r['victim']}: intensity {r['intensity_crosstalk']:.3e}, "
              f"SSA {r['rabi_crosstalk_ssa']:.3e}, DSA {r['rabi_crosstalk_dsa']:.3e}")
    print(f"wrote {outdir}/compare_modes.{{csv,json,png}}")
    return EXIT_OK


def _render_tone_images(scn: ScenarioConfig, per_tone: bool):
    img = scn.imaging
    x_lo = min(scn.chain.positions_um) - img.margin_um
    x_hi = max(scn.chain.positions_um) + img.margin_um
    nx = int(round((x_hi - x_lo) / img.pixel_pitch_um)) + 1
    ny = img.height_px
    origin = (x_lo, -(ny - 1) / 2 * img.pixel_pitch_um)
    shape = (ny, nx)
    images, names = [], []
    if per_tone:
        for i, label in enumerate(scn.chain.labels):
            profile = scn.profile_for_tones(ToneSet((scn.tone_for_ion(i),)))
            images.append(render_image(
                profile, img.transverse_waist_um, shape, img.pixel_pitch_um,
                origin, img.background, img.noise_sigma,
                seed=None if img.noise_sigma == 0 else scn.require_seed() + i))
            names.append(f"beam_tone_{label}")
    else:
        n = len(scn.chain)
        tones = ToneSet(tuple(scn.tone_for_ion(i, amplitude=1.0 / n) for i in range(n)))
        profile = scn.profile_for_tones(tones)
        images.append(render_image(
            profile, img.transverse_waist_um, shape, img.pixel_pitch_um,
            origin, img.background, img.noise_sigma,
            seed=None if img.noise_sigma == 0 else scn.require_seed()))
        names.append("beam_composite_exposure")
    return images, names


def cmd_image_pipeline(args) -> int:
    scn = load_scenario(args.config)
    outdir = _outdir(scn)
    per_tone = not args.composite

    if args.inputs:
        images = [read_pgm(p) for p in args.inputs]
        names = [Path(p).stem for p in args.inputs]
        for im in images[1:]:
            if not images[0].same_grid(im):
                raise ConfigError("input images do not share grid geometry")
    else:
        images, names = _render_tone_images(scn, per_tone)
        for im, name in zip(images, names):
            _atomic(outdir / f"{name}.pgm",
                    lambda p, im=im: write_pgm(im, p, maxval=scn.imaging.maxval),
                    companions=(".json",))

    cleaned = [subtract_background(im) for im in images]
    composite = stitch_images(cleaned)
    positions, values = cross_section(composite, axis_angle_rad=0.0, offset_um=0.0)
    _atomic(outdir / "section.csv", lambda p: write_section_csv(p, positions, values))

    crosstalk_rows = []
    if per_tone and len(images) > 1:
        # leakage onto neighbor sites, read per single-tone exposure
        for im, name in zip(cleaned, names):
            pos, val = cross_section(im, 0.0, 0.0)
            k = int(np.argmax(val))
            addressed_idx = int(np.argmin(np.abs(
                np.asarray(scn.chain.positions_um) - pos[k])))
            for j, victim in enumerate(scn.chain.labels):
                if j == addressed_idx or abs(j - addressed_idx) != 1:
                    continue
                ratio = intensity_crosstalk_at(
                    (pos, val), scn.chain.positions_um[addressed_idx],
                    scn.chain.positions_um[j])
                crosstalk_rows.append({
                    "image": name,
                    "addressed": scn.chain.labels[addressed_idx],
                    "victim": victim,
                    "intensity_crosstalk": ratio,
                })
    else:
        for i, label in enumerate(scn.chain.labels):
            for j in (i - 1, i + 1):
                if not 0 <= j < len(scn.chain):
                    continue
                ratio = intensity_crosstalk_at(
                    (positions, values), scn.chain.positions_um[i],
                    scn.chain.positions_um[j])
                crosstalk_rows.append({
                    "image": "composite",
                    "addressed": label,
                    "victim": scn.chain.labels[j],
                    "site_intensity_ratio": ratio,
                })

    report = {
        "command": "image-pipeline",
        "per_tone": per_tone,
        "images": names,
        "neighbor_crosstalk": crosstalk_rows,
        "scenario": scn.to_dict(),
    }
    _write_json(outdir / "image_report.json", report)
    _atomic(outdir / "image_pipeline.png",
            lambda p: plots.save_image_figure(
                p, composite, positions, values,
                markers_um=list(scn.chain.positions_um)))
    for row in crosstalk_rows:
        key = "intensity_crosstalk" if "intensity_crosstalk" in row else "site_intensity_ratio"
        print(f"{row['addressed']} -> {row['victim']}: {key.replace('_', ' ')} {row[key]:.3e}")
    print(f"wrote {outdir}/section.csv, image_report.json, image_pipeline.png")
    return EXIT_OK


def cmd_fit_profile(args) -> int:
    path = Path(args.input)
    rows = []
    with open(path, newline="") as fh:
        import csv as _csv
        for row in _csv.reader(fh):
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                continue  # header or blank
    if len(rows) < 3 * args.n_spots:
        raise ConfigError(
            f"{path} holds {len(rows)} samples; need >= {3 * args.n_spots} "
            f"for {args.n_spots} spots")
    x = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    fit = fit_multi_gaussian(x, y, n_spots=args.n_spots)
    outdir = Path(os.environ.get("AODSIM_OUTPUT_DIR", path.parent))
    outdir.mkdir(parents=True, exist_ok=True)
    report = {"command": "fit-profile", "input": str(path), **fit.to_dict()}
    _write_json(outdir / f"{path.stem}_fit.json", report)
    _atomic(outdir / f"{path.stem}_fit.png",
            lambda p: plots.save_profile_fit_figure(p, x, y, fit))
    for k, s in enumerate(fit.spots):
        print(f"spot {k}: amplitude {s.amplitude:.4g}, center {s.center_um:.4f} um, "
              f"waist {s.waist_um:.4f} um")
    if not fit.converged:
        raise NonConvergentError("profile fit did not converge")
    print(f"wrote {outdir}/{path.stem}_fit.{{json,png}}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aodsim",
        description="Desk-scale simulator for AOD-based individual addressing "
                    "of trapped-ion qubits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("config", help="scenario JSON file, or 'paper' for the bundled one")

    p = sub.add_parser("scan-frequency", help="sweep the AOD drive and fit the response")
    add_config(p)
    p.add_argument("--freq-start", type=float, required=True, help="MHz")
    p.add_argument("--freq-stop", type=float, required=True, help="MHz")
    p.add_argument("--freq-step", type=float, default=0.02, help="MHz")
    p.add_argument("--raman-time", type=float, required=True, help="fixed interaction time (us)")
    p.add_argument("--shots", type=int, default=None, help="override shots per point")
    p.add_argument("--scan-arms", choices=("both", "one"), default="both",
                   help="move both focused arms together or only one")
    p.set_defaults(fn=cmd_scan_frequency)

    p = sub.add_parser("rabi", help="time-scan one addressed ion and fit the flopping")
    add_config(p)
    p.add_argument("--ion", required=True, help="ion label or index")
    p.add_argument("--t-max", type=float, default=100.0, help="us")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--shots", type=int, default=None)
    p.set_defaults(fn=cmd_rabi)

    p = sub.add_parser("crosstalk", help="long-time scans addressing each ion in turn")
    add_config(p)
    p.add_argument("--t-long", type=float, default=5000.0, help="us")
    p.add_argument("--points", type=int, default=26)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--equalize", action="store_true",
                   help="level the addressed rates via drive amplitudes first")
    p.add_argument("--mode", choices=("SSA", "DSA"), default=None,
                   help="override the scenario's addressing mode")
    p.set_defaults(fn=cmd_crosstalk)

    p = sub.add_parser("compare-modes", help="single- vs double-side crosstalk scaling")
    add_config(p)
    p.set_defaults(fn=cmd_compare_modes)

    p = sub.add_parser("image-pipeline", help="render/ingest spot images and read crosstalk")
    add_config(p)
    p.add_argument("inputs", nargs="*", help="PGM images to ingest (default: synthesize)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--per-tone", dest="composite", action="store_false",
                       help="one exposure per tone, stitched (default)")
    group.add_argument("--composite", dest="composite", action="store_true",
                       help="single exposure with all tones")
    p.set_defaults(composite=False, fn=cmd_image_pipeline)

    p = sub.add_parser("fit-profile", help="multi-Gaussian fit of a profile CSV")
    p.add_argument("input", help="CSV with position_um,intensity columns")
    p.add_argument("--n-spots", type=int, required=True)
    p.set_defaults(fn=cmd_fit_profile)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergentError, AmbiguityError) as exc:
        print(f"nonconvergent: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
