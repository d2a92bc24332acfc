import json
import math

import numpy as np
import pytest

from aodsim import cli
from aodsim.scenario import builtin_scenario_path


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("AODSIM_OUTPUT_DIR", str(out))
    return out


def run(*argv):
    return cli.main(list(argv))


class TestScanFrequency:
    def test_round_trip(self, outdir):
        code = run("scan-frequency", "paper", "--freq-start", "76.6",
                   "--freq-stop", "78.4", "--freq-step", "0.04",
                   "--raman-time", "3.4", "--shots", "2000", "--scan-arms", "one")
        assert code == 0
        report = json.loads((outdir / "scan_frequency_fit.json").read_text())
        centers = {r["ion"]: r["center_mhz"] for r in report["fits"]}
        assert centers["A"] == pytest.approx(77.07, abs=0.02)
        assert centers["B"] == pytest.approx(78.03, abs=0.02)
        assert report["fitted_spacings_um"][0] == pytest.approx(5.5, rel=0.02)
        # plumbing-level bound; the 5% physics tolerance is exercised by the
        # acceptance suite at its stated 1e4 shots and 0.02 MHz grid
        for r in report["fits"]:
            assert r["waist_um_direct"] == pytest.approx(0.95, rel=0.10)
            assert r["waist_um_if_intensity_squared"] == pytest.approx(
                r["waist_um_direct"] * math.sqrt(2), rel=1e-12)
        assert (outdir / "scan_frequency.csv").exists()
        assert (outdir / "scan_frequency.png").exists()

    def test_empty_range_is_nonconvergent(self, outdir):
        code = run("scan-frequency", "paper", "--freq-start", "80.0",
                   "--freq-stop", "80.5", "--freq-step", "0.05",
                   "--raman-time", "3.4")
        assert code == cli.EXIT_NONCONVERGENT
        # outputs are still written for inspection
        assert (outdir / "scan_frequency.csv").exists()

    def test_csv_header_names_units(self, outdir):
        run("scan-frequency", "paper", "--freq-start", "77.0",
            "--freq-stop", "77.2", "--freq-step", "0.05", "--raman-time", "3.4")
        header = (outdir / "scan_frequency.csv").read_text().splitlines()[0]
        assert header == "scan_variable_mhz,ion_label,p_estimate,shots,p_exact"

    def test_single_ion_scan_one_peak(self, outdir, tmp_path):
        cfg = json.loads(builtin_scenario_path("paper").read_text())
        cfg["chain"] = {"positions_um": [0.0], "labels": ["A"]}
        cfg["peak_rabi_khz"] = [43.78]
        path = tmp_path / "single.scenario"
        path.write_text(json.dumps(cfg))
        code = run("scan-frequency", str(path), "--freq-start", "76.6",
                   "--freq-stop", "77.5", "--freq-step", "0.04",
                   "--raman-time", "3.4", "--shots", "1000", "--scan-arms", "one")
        assert code == 0
        report = json.loads((outdir / "scan_frequency_fit.json").read_text())
        assert len(report["fits"]) == 1
        assert report["fits"][0]["center_mhz"] == pytest.approx(77.07, abs=0.02)


class TestRabi:
    def test_ion_a_period(self, outdir):
        code = run("rabi", "paper", "--ion", "A", "--t-max", "100",
                   "--points", "201", "--shots", "2000")
        assert code == 0
        report = json.loads((outdir / "rabi_ion_A_fit.json").read_text())
        assert report["fit"]["period_us"] == pytest.approx(22.84, rel=1e-3)

    def test_ion_b_period(self, outdir):
        code = run("rabi", "paper", "--ion", "B", "--t-max", "100",
                   "--points", "201", "--shots", "2000")
        assert code == 0
        report = json.loads((outdir / "rabi_ion_B_fit.json").read_text())
        assert report["fit"]["period_us"] == pytest.approx(30.85, rel=1e-3)

    def test_zero_peak_rate_flags_ambiguity(self, outdir, tmp_path):
        cfg = json.loads(builtin_scenario_path("paper").read_text())
        cfg["peak_rabi_khz"] = [0.0, 32.42]
        path = tmp_path / "flat.scenario"
        path.write_text(json.dumps(cfg))
        code = run("rabi", str(path), "--ion", "A", "--t-max", "100",
                   "--points", "60")
        assert code == cli.EXIT_NONCONVERGENT
        report = json.loads((outdir / "rabi_ion_A_fit.json").read_text())
        assert "failures" in report

    def test_unknown_ion_is_config_error(self, outdir):
        assert run("rabi", "paper", "--ion", "Z") == cli.EXIT_CONFIG


class TestCrosstalk:
    def test_equalized_dsa(self, outdir):
        code = run("crosstalk", "paper", "--t-long", "5000", "--points", "11",
                   "--shots", "4000", "--equalize")
        assert code == 0
        report = json.loads((outdir / "crosstalk_report.json").read_text())
        assert report["equalized"]
        rates = report["addressed_rates_khz"]
        assert rates[0] == pytest.approx(rates[1], rel=1e-9)
        for pair in report["pairs"]:
            assert pair["crosstalk_victim_normalized"] == pytest.approx(9.5e-4, rel=0.1)
        # analytic matrix off-diagonal equals the configured intensity ratio
        m = np.array(report["analytic_matrix"])
        assert m[0, 1] == pytest.approx(9.5e-4, rel=1e-3)
        assert (outdir / "crosstalk_matrix.csv").exists()

    def test_ssa_mode_square_root_scaling(self, outdir):
        code = run("crosstalk", "paper", "--t-long", "400", "--points", "11",
                   "--shots", "4000", "--equalize", "--mode", "SSA")
        assert code == 0
        report = json.loads((outdir / "crosstalk_report.json").read_text())
        m = np.array(report["analytic_matrix"])
        assert m[0, 1] == pytest.approx(math.sqrt(9.5e-4), rel=1e-3)
        for pair in report["pairs"]:
            assert pair["crosstalk_victim_normalized"] == pytest.approx(
                math.sqrt(9.5e-4), rel=0.1)

    def test_both_normalizations_reported(self, outdir):
        code = run("crosstalk", "paper", "--t-long", "5000", "--points", "6",
                   "--shots", "2000")
        assert code == 0
        report = json.loads((outdir / "crosstalk_report.json").read_text())
        pair = report["pairs"][0]  # addressing A, victim B, unequalized
        assert pair["crosstalk_victim_normalized"] == pytest.approx(
            9.5e-4 * 43.78 / 32.42, rel=0.1)
        assert pair["crosstalk_addressed_normalized"] == pytest.approx(
            9.5e-4, rel=0.1)

    def test_single_ion_chain_rejected(self, outdir, tmp_path):
        cfg = json.loads(builtin_scenario_path("paper").read_text())
        cfg["chain"] = {"positions_um": [0.0], "labels": ["A"]}
        cfg["peak_rabi_khz"] = [43.78]
        path = tmp_path / "single.scenario"
        path.write_text(json.dumps(cfg))
        assert run("crosstalk", str(path)) == cli.EXIT_CONFIG


class TestCompareModes:
    def test_scaling_rows(self, outdir):
        assert run("compare-modes", "paper") == 0
        report = json.loads((outdir / "compare_modes.json").read_text())
        row = report["pairs"][0]
        assert row["intensity_crosstalk"] == pytest.approx(9.5e-4, rel=1e-3)
        assert row["rabi_crosstalk_ssa"] == pytest.approx(
            math.sqrt(9.5e-4), rel=1e-3)
        assert row["rabi_crosstalk_dsa"] == row["intensity_crosstalk"]
        assert len(report["reference_systems"]) == 5
        header = (outdir / "compare_modes.csv").read_text().splitlines()[0]
        assert header == ("addressed_ion,victim_ion,intensity_crosstalk,"
                          "rabi_crosstalk_ssa,rabi_crosstalk_dsa")


class TestImagePipeline:
    def test_synthetic_per_tone(self, outdir):
        assert run("image-pipeline", "paper") == 0
        report = json.loads((outdir / "image_report.json").read_text())
        rows = report["neighbor_crosstalk"]
        assert len(rows) == 2
        for row in rows:
            assert row["intensity_crosstalk"] < 1e-3
            assert row["intensity_crosstalk"] > 5e-4
        assert (outdir / "beam_tone_A.pgm").exists()
        assert (outdir / "beam_tone_A.pgm.json").exists()
        assert (outdir / "section.csv").exists()

    def test_ingest_written_exposures(self, outdir):
        run("image-pipeline", "paper")
        code = run("image-pipeline", "paper",
                   str(outdir / "beam_tone_A.pgm"), str(outdir / "beam_tone_B.pgm"))
        assert code == 0
        report = json.loads((outdir / "image_report.json").read_text())
        for row in report["neighbor_crosstalk"]:
            assert row["intensity_crosstalk"] == pytest.approx(9.5e-4, rel=0.05)

    def test_composite_mode(self, outdir):
        assert run("image-pipeline", "paper", "--composite") == 0
        report = json.loads((outdir / "image_report.json").read_text())
        assert report["per_tone"] is False
        # both principal spots present: site ratios near the rate imbalance of 1
        for row in report["neighbor_crosstalk"]:
            assert row["site_intensity_ratio"] == pytest.approx(1.0, rel=0.05)

    def test_zero_stray_readout_at_float_floor(self, outdir, tmp_path):
        cfg = json.loads(builtin_scenario_path("paper").read_text())
        cfg["stray"] = None
        cfg["imaging"]["background"] = 0.0
        path = tmp_path / "clean.scenario"
        path.write_text(json.dumps(cfg))
        assert run("image-pipeline", str(path)) == 0
        report = json.loads((outdir / "image_report.json").read_text())
        for row in report["neighbor_crosstalk"]:
            assert row["intensity_crosstalk"] < 1e-20


class TestFitProfile:
    def test_fit_section(self, outdir):
        run("image-pipeline", "paper")
        code = run("fit-profile", str(outdir / "section.csv"), "--n-spots", "2")
        assert code == 0
        report = json.loads((outdir / "section_fit.json").read_text())
        centers = sorted(s["center_um"] for s in report["spots"])
        assert centers[0] == pytest.approx(0.0, abs=0.01)
        assert centers[1] == pytest.approx(5.5, abs=0.01)
        assert report["spots"][0]["waist_um"] == pytest.approx(0.95, rel=0.01)

    def test_too_few_rows(self, outdir, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("position_um,intensity\n0,1\n1,2\n")
        assert run("fit-profile", str(path), "--n-spots", "1") == cli.EXIT_CONFIG


class TestErrorPathsAndDeterminism:
    def test_missing_config(self, outdir):
        assert run("rabi", "nonexistent.scenario", "--ion", "A") == cli.EXIT_CONFIG

    def test_malformed_config(self, outdir, tmp_path):
        bad = tmp_path / "bad.scenario"
        bad.write_text("{not json")
        assert run("compare-modes", str(bad)) == cli.EXIT_CONFIG

    def test_seedless_scenario_rejected_for_sampling(self, outdir, tmp_path):
        cfg = json.loads(builtin_scenario_path("paper").read_text())
        cfg["seed"] = None
        path = tmp_path / "seedless.scenario"
        path.write_text(json.dumps(cfg))
        assert run("rabi", str(path), "--ion", "A") == cli.EXIT_CONFIG

    def test_bit_reproducible_outputs(self, tmp_path, monkeypatch):
        args = ("scan-frequency", "paper", "--freq-start", "76.9",
                "--freq-stop", "77.3", "--freq-step", "0.05",
                "--raman-time", "3.4", "--shots", "500", "--scan-arms", "one")
        blobs = []
        for name in ("first", "second"):
            out = tmp_path / name
            monkeypatch.setenv("AODSIM_OUTPUT_DIR", str(out))
            assert run(*args) in (0, cli.EXIT_NONCONVERGENT)
            blobs.append({
                p.name: p.read_bytes() for p in sorted(out.iterdir())
            })
        assert blobs[0].keys() == blobs[1].keys()
        for name in blobs[0]:
            assert blobs[0][name] == blobs[1][name], f"{name} differs between runs"
