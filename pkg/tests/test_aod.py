import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aodsim.aod import (DriveTone, GhostSpotModel, ToneSet,
                        calibrate_channel, equalize_amplitudes,
                        position_to_frequency, tone_to_position,
                        toneset_to_profile)
from aodsim.beams import intensity_at
from aodsim.errors import CalibrationError, ToneBudgetError

FC = 77.5
F_A, F_B = 77.07, 78.03
X_A, X_B = 0.0, 5.5
WAIST = 0.95


CHANNEL = calibrate_channel(FC, (F_A, X_A), (F_B, X_B), WAIST)


@pytest.fixture
def channel():
    return CHANNEL


class TestPositionMap:
    def test_reference_sites(self, channel):
        assert tone_to_position(channel, F_A) == pytest.approx(X_A, abs=1e-12)
        assert tone_to_position(channel, F_B) == pytest.approx(X_B, abs=1e-12)

    def test_center_anchor(self, channel):
        assert tone_to_position(channel, FC) == channel.center_position_um

    def test_calibrated_coefficient(self, channel):
        assert channel.position_coefficient_um_per_mhz == pytest.approx(
            5.5 / 0.96, rel=1e-12)
        # matches the two-point arithmetic to the quoted 4 decimals
        assert channel.position_coefficient_um_per_mhz == pytest.approx(5.7292, abs=5e-5)

    def test_unit_coefficient_calibration(self):
        ch = calibrate_channel(77.5, (77.5, 0.0), (78.5, 1.0), WAIST)
        assert ch.position_coefficient_um_per_mhz == pytest.approx(1.0)
        assert ch.center_position_um == pytest.approx(0.0)

    def test_degenerate_references(self):
        with pytest.raises(CalibrationError):
            calibrate_channel(77.5, (77.0, 0.0), (77.0, 1.0), WAIST)

    def test_inverse_map(self, channel):
        assert position_to_frequency(channel, X_B) == pytest.approx(F_B, abs=1e-12)

    @given(f1=st.floats(60.0, 95.0), f2=st.floats(60.0, 95.0))
    def test_affinity(self, f1, f2):
        lhs = tone_to_position(CHANNEL, f1) - tone_to_position(CHANNEL, f2)
        rhs = CHANNEL.position_coefficient_um_per_mhz * (f1 - f2)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    @given(fc=st.floats(60.0, 95.0), fa=st.floats(60.0, 95.0),
           fb=st.floats(60.0, 95.0), xa=st.floats(-40.0, 40.0),
           xb=st.floats(-40.0, 40.0))
    def test_calibration_round_trip(self, fc, fa, fb, xa, xb):
        if abs(fa - fb) < 1e-3 or abs(xa - xb) < 1e-6:
            return
        ch = calibrate_channel(fc, (fa, xa), (fb, xb), WAIST)
        scale = max(1.0, abs(xa), abs(xb))
        assert abs(tone_to_position(ch, fa) - xa) <= 1e-10 * scale
        assert abs(tone_to_position(ch, fb) - xb) <= 1e-10 * scale


class TestToneSet:
    def test_budget_violation(self):
        with pytest.raises(ToneBudgetError):
            ToneSet((DriveTone(77.0, 0.7), DriveTone(78.0, 0.7)))

    def test_budget_disabled(self):
        ts = ToneSet((DriveTone(77.0, 0.9), DriveTone(78.0, 0.9)), budget=None)
        assert len(ts.tones) == 2

    def test_duplicate_frequencies(self):
        with pytest.raises(ValueError):
            ToneSet((DriveTone(77.0, 0.4), DriveTone(77.0, 0.4)))

    def test_amplitude_range(self):
        with pytest.raises(ValueError):
            DriveTone(77.0, 1.2)

    def test_json_round_trip(self):
        ts = ToneSet((DriveTone(77.07, 0.5, 0.3), DriveTone(78.03, 0.5)))
        assert ToneSet.from_json(ts.to_json()) == ts


class TestTonesetToProfile:
    def test_single_full_tone(self, channel):
        profile = toneset_to_profile(channel, ToneSet((DriveTone(F_A, 1.0),)))
        assert len(profile.spots) == 1
        spot = profile.spots[0]
        assert spot.center_um == pytest.approx(X_A, abs=1e-12)
        assert spot.amplitude == 1.0
        assert spot.waist_um == WAIST

    def test_amplitude_squared_law(self, channel):
        ts = ToneSet((DriveTone(F_A, 0.5), DriveTone(F_B, 0.5)))
        profile = toneset_to_profile(channel, ts)
        assert intensity_at(profile, X_A) == pytest.approx(0.25, rel=1e-12)
        assert intensity_at(profile, X_B) == pytest.approx(0.25, rel=1e-12)

    def test_ten_even_tones(self, channel):
        freqs = F_A + 0.96 * np.arange(10)
        ts = ToneSet(tuple(DriveTone(f, 0.1) for f in freqs))
        profile = toneset_to_profile(channel, ts)
        centers = sorted(s.center_um for s in profile.spots)
        assert np.allclose(np.diff(centers), 5.5, atol=1e-9)

    def test_stray_model_appends_ghosts(self, channel):
        stray = GhostSpotModel(offsets_um=(-5.5, 5.5), relative_amplitude=1e-3)
        profile = toneset_to_profile(channel, ToneSet((DriveTone(F_A, 1.0),)), stray)
        assert len(profile.stray_spots) == 2
        assert {g.center_um for g in profile.stray_spots} == {X_A - 5.5, X_A + 5.5}
        assert all(g.amplitude == 1e-3 for g in profile.stray_spots)

    def test_single_tone_peak_intensity_is_amp_squared(self, channel):
        for amp in (1.0, 0.6, 0.25):
            profile = toneset_to_profile(channel, ToneSet((DriveTone(F_A, amp),)))
            assert intensity_at(profile, X_A) == pytest.approx(amp**2, rel=1e-12)


class TestEqualizeAmplitudes:
    def test_equal_rates_equal_amplitudes(self, channel):
        ts = equalize_amplitudes(channel, [(X_A, 1.0), (X_B, 1.0)])
        amps = [t.amplitude for t in ts.tones]
        assert amps[0] == pytest.approx(amps[1], rel=1e-12)
        assert sum(amps) == pytest.approx(1.0, rel=1e-12)

    def test_measured_rate_compensation(self, channel):
        # leveling the 43.78 kHz site down to the 32.42 kHz one scales its
        # intensity by the rate ratio, i.e. its amplitude by the square root
        ts = equalize_amplitudes(
            channel, [(X_A, 32.42 / 43.78), (X_B, 1.0)], mode="DSA")
        a_a, a_b = (t.amplitude for t in ts.tones)
        assert a_a / a_b == pytest.approx(math.sqrt(32.42 / 43.78), rel=1e-12)
        assert (a_a / a_b) == pytest.approx(0.8605, abs=5e-5)
        assert (a_a / a_b) ** 2 == pytest.approx(32.42 / 43.78, rel=1e-12)

    def test_single_target_exhausts_budget(self, channel):
        ts = equalize_amplitudes(channel, [(X_A, 0.7)])
        assert len(ts.tones) == 1
        assert ts.tones[0].amplitude == pytest.approx(1.0)

    def test_ssa_mode_amplitude_linear_in_rate(self, channel):
        ts = equalize_amplitudes(channel, [(X_A, 0.5), (X_B, 1.0)], mode="SSA")
        a_a, a_b = (t.amplitude for t in ts.tones)
        assert a_a / a_b == pytest.approx(0.5, rel=1e-12)

    def test_frequencies_hit_targets(self, channel):
        ts = equalize_amplitudes(channel, [(X_A, 1.0), (X_B, 2.0)])
        positions = [tone_to_position(channel, t.frequency_mhz) for t in ts.tones]
        assert positions == pytest.approx([X_A, X_B], abs=1e-9)

    def test_nonpositive_rate(self, channel):
        with pytest.raises(ValueError):
            equalize_amplitudes(channel, [(X_A, 0.0)])

    def test_infeasible_budget_names_limiting_tone(self, channel):
        with pytest.raises(ToneBudgetError, match="5.5"):
            equalize_amplitudes(channel, [(X_A, 1e-8), (X_B, 1.0)], budget=1.5)

    @given(r1=st.floats(0.1, 3.0), r2=st.floats(0.1, 3.0), r3=st.floats(0.1, 3.0))
    def test_rates_proportional_to_requests(self, r1, r2, r3):
        # through the profile and the two-arm Rabi map (rate ~ intensity),
        # well-separated targets come out proportional to the requests
        targets = [(X_A, r1), (X_B, r2), (2 * X_B, r3)]
        ts = equalize_amplitudes(CHANNEL, targets, mode="DSA")
        profile = toneset_to_profile(CHANNEL, ts)
        ratios = [intensity_at(profile, x) / rate for x, rate in targets]
        for r in ratios[1:]:
            assert r == pytest.approx(ratios[0], rel=1e-6)
