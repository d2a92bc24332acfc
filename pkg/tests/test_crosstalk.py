import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aodsim.beams import BeamProfile, GaussianSpot
from aodsim.crosstalk import (REPORTED_SYSTEMS, AddressingSystem, IonChain,
                              compare_ssa_dsa, crosstalk_matrix,
                              crosstalk_ratio, rabi_rate_at, write_matrix_csv)
from aodsim.errors import NormalizationError

WAIST = 0.95
SPACING = 5.5
PEAK = 2 * math.pi * 43.78e3


def leaky_profile(eps, x0=0.0, x1=SPACING):
    """Principal spot at x0 plus a ghost holding the intensity ratio eps at x1."""
    return BeamProfile(
        spots=(GaussianSpot(1.0, x0, WAIST),),
        stray_spots=(GaussianSpot(eps, x1, WAIST),),
    )


def dsa(profile, peak=PEAK):
    return AddressingSystem(profile, profile, "DSA", peak)


def ssa(profile, peak=PEAK):
    return AddressingSystem(profile, None, "SSA", peak)


class TestRabiRateAt:
    def test_self_normalization(self):
        for system in (dsa(leaky_profile(1e-3)), ssa(leaky_profile(1e-3))):
            assert rabi_rate_at(system, 0.0, 0.0) == pytest.approx(PEAK, rel=1e-12)

    def test_dsa_linear_in_intensity_ratio(self):
        system = dsa(leaky_profile(1e-3))
        assert rabi_rate_at(system, SPACING, 0.0) == pytest.approx(
            1e-3 * PEAK, rel=1e-9)

    def test_ssa_square_root_of_intensity_ratio(self):
        system = ssa(leaky_profile(1e-3))
        assert rabi_rate_at(system, SPACING, 0.0) == pytest.approx(
            math.sqrt(1e-3) * PEAK, rel=1e-9)

    def test_zero_intensity_at_addressed_site(self):
        system = dsa(leaky_profile(1e-3))
        with pytest.raises(NormalizationError):
            rabi_rate_at(system, 0.0, 1e6)

    def test_mode_invariants(self):
        profile = leaky_profile(1e-3)
        with pytest.raises(ValueError):
            AddressingSystem(profile, profile, "SSA", PEAK)
        with pytest.raises(ValueError):
            AddressingSystem(profile, None, "DSA", PEAK)


class TestCrosstalkRatio:
    def test_identity(self):
        assert crosstalk_ratio(dsa(leaky_profile(1e-3)), 0.0, 0.0) == 1.0

    def test_table_pairings(self):
        assert crosstalk_ratio(dsa(leaky_profile(4e-6)), SPACING, 0.0) == pytest.approx(
            4e-6, rel=1e-6)
        assert crosstalk_ratio(ssa(leaky_profile(4e-6)), SPACING, 0.0) == pytest.approx(
            2e-3, rel=1e-6)

    def test_geometric_mean_of_unequal_arms(self):
        system = AddressingSystem(
            leaky_profile(1e-3), leaky_profile(4e-3), "DSA", PEAK)
        assert crosstalk_ratio(system, SPACING, 0.0) == pytest.approx(
            2e-3, rel=1e-6)

    def test_arm_swap_symmetry(self):
        a1, a2 = leaky_profile(1e-3), leaky_profile(4e-3)
        r1 = rabi_rate_at(AddressingSystem(a1, a2, "DSA", PEAK), SPACING, 0.0)
        r2 = rabi_rate_at(AddressingSystem(a2, a1, "DSA", PEAK), SPACING, 0.0)
        assert r1 == pytest.approx(r2, rel=1e-12)

    @given(eps=st.floats(1e-8, 1.0), x=st.floats(0.5, 8.0))
    def test_square_law(self, eps, x):
        profile = leaky_profile(eps, x1=SPACING)
        s = crosstalk_ratio(ssa(profile), x, 0.0)
        d = crosstalk_ratio(dsa(profile), x, 0.0)
        assert s**2 == pytest.approx(d, rel=1e-9)

    def test_monotone_decay_for_single_spot(self):
        profile = BeamProfile(spots=(GaussianSpot(1.0, 0.0, WAIST),))
        system = dsa(profile)
        seps = np.linspace(0.2, 4.0, 12)
        ratios = [crosstalk_ratio(system, s, 0.0) for s in seps]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))


class TestCrosstalkMatrix:
    def test_single_ion(self):
        chain = IonChain((0.0,))
        m = crosstalk_matrix(lambda i: dsa(leaky_profile(1e-3)), chain)
        assert m.shape == (1, 1) and m[0, 0] == 1.0

    def test_two_ion_off_diagonals(self):
        chain = IonChain((0.0, SPACING))
        profiles = [leaky_profile(1e-3, x0=x, x1=SPACING - x) for x in chain.positions_um]
        m = crosstalk_matrix(lambda i: dsa(profiles[i]), chain)
        assert np.allclose(np.diag(m), 1.0)
        assert m[0, 1] == pytest.approx(1e-3, rel=1e-6)
        assert m[1, 0] == pytest.approx(1e-3, rel=1e-6)

    def test_translation_invariant_chain_symmetry(self):
        # evenly spaced ions with the same profile shape at each site:
        # the matrix is symmetric about its anti-diagonal
        chain = IonChain((0.0, SPACING, 2 * SPACING))

        def builder(i):
            x = chain.positions_um[i]
            return dsa(BeamProfile(
                spots=(GaussianSpot(1.0, x, WAIST),),
                stray_spots=(GaussianSpot(1e-3, x - SPACING, WAIST),
                             GaussianSpot(1e-3, x + SPACING, WAIST)),
            ))

        m = crosstalk_matrix(builder, chain)
        n = len(chain)
        for i in range(n):
            for j in range(n):
                assert m[i, j] == pytest.approx(m[n - 1 - j, n - 1 - i], rel=1e-9)

    def test_entries_bounded_for_site_maximal_profiles(self):
        chain = IonChain((0.0, SPACING))
        profiles = [leaky_profile(1e-3, x0=x, x1=SPACING - x) for x in chain.positions_um]
        m = crosstalk_matrix(lambda i: dsa(profiles[i]), chain)
        assert np.all(m >= 0.0) and np.all(m <= 1.0)

    def test_error_carries_pair_context(self):
        chain = IonChain((0.0, SPACING), labels=("A", "B"))
        empty = BeamProfile(spots=(GaussianSpot(1.0, 0.0, 0.1),))

        def builder(i):
            # waist so small the profile underflows to zero at the other site
            return dsa(BeamProfile(spots=(GaussianSpot(1.0, chain.positions_um[i], 0.1),)),
                       peak=PEAK) if i == 0 else dsa(empty)

        with pytest.raises(NormalizationError, match="B"):
            crosstalk_matrix(builder, chain)


class TestCompareSsaDsa:
    def test_algebraic_rows(self):
        for eps, ssa_pct in ((1e-4, 1e-2), (4e-6, 2e-3)):
            profile = leaky_profile(eps)
            cmp_ = compare_ssa_dsa(profile, 0.0, SPACING)
            assert cmp_.intensity_crosstalk == pytest.approx(eps, rel=1e-6)
            assert cmp_.rabi_crosstalk_ssa == pytest.approx(ssa_pct, rel=1e-6)
            assert cmp_.rabi_crosstalk_dsa == pytest.approx(eps, rel=1e-6)
            assert cmp_.rabi_crosstalk_ssa**2 == pytest.approx(
                cmp_.rabi_crosstalk_dsa, rel=1e-12)

    def test_unity_crosstalk(self):
        profile = BeamProfile(spots=(GaussianSpot(1.0, 0.0, WAIST),), floor=1.0)
        cmp_ = compare_ssa_dsa(profile, 0.0, 1e3)
        assert cmp_.rabi_crosstalk_ssa == pytest.approx(
            math.sqrt(cmp_.intensity_crosstalk), rel=1e-12)

    def test_calibrated_stray_dominates(self):
        cmp_ = compare_ssa_dsa(leaky_profile(1e-3), 0.0, SPACING)
        assert cmp_.intensity_crosstalk == pytest.approx(1e-3, rel=1e-6)
        assert cmp_.rabi_crosstalk_ssa == pytest.approx(0.0316, abs=2e-4)

    @given(eps=st.floats(1e-9, 1.0))
    def test_square_identity(self, eps):
        cmp_ = compare_ssa_dsa(leaky_profile(eps), 0.0, SPACING)
        assert cmp_.rabi_crosstalk_ssa**2 == pytest.approx(
            cmp_.rabi_crosstalk_dsa, rel=1e-9)


class TestChainAndExport:
    def test_chain_validation(self):
        with pytest.raises(ValueError):
            IonChain(())
        with pytest.raises(ValueError):
            IonChain((0.0, 0.0))
        with pytest.raises(ValueError):
            IonChain((1.0, 0.0))
        with pytest.raises(ValueError):
            IonChain((0.0, 1.0), labels=("A",))

    def test_matrix_csv(self, tmp_path):
        chain = IonChain((0.0, SPACING), labels=("A", "B"))
        m = np.array([[1.0, 1e-3], [2e-3, 1.0]])
        path = tmp_path / "matrix.csv"
        write_matrix_csv(path, m, chain.labels)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "addressed_ion,crosstalk_at_A,crosstalk_at_B"
        assert lines[1].startswith("A,1,")
        assert float(lines[2].split(",")[1]) == pytest.approx(2e-3)

    def test_reference_rows_scaling_consistency(self):
        # the published single-side rows follow rabi = sqrt(intensity)
        by_name = {r["system"]: r for r in REPORTED_SYSTEMS}
        assert math.sqrt(by_name["MCAOMs"]["intensity_crosstalk"]) == pytest.approx(0.01)
        assert math.sqrt(by_name["AODs"]["intensity_crosstalk"]) == pytest.approx(0.002)
