import numpy as np
import pytest
from scipy import stats

from formukit.dissolution import (
    derived_metrics,
    mass_transfer_coefficient,
    psd_from_lognormal,
    reynolds_schmidt,
    sherwood,
    shrink_rate,
    simulate,
    simulate_dissolution,
)
from formukit.errors import DomainError, SaturationError, SingularityError
from formukit.types import DissolutionConditions, ParticleMorphology, SizeDistribution

from conftest import analytic_release_pct


class TestSherwood:
    def test_stagnant_limit(self):
        assert sherwood(0.0, 1000.0) == 2.0

    def test_unit_inputs(self):
        assert sherwood(1.0, 1.0) == pytest.approx(2.52, abs=1e-12)

    def test_hand_value(self):
        # 2 + 0.52 * 100^0.52 * 1000^(1/3), recomputed in place
        expected = 2.0 + 0.52 * 100.0 ** 0.52 * 1000.0 ** (1.0 / 3.0)
        got = sherwood(100.0, 1000.0)
        assert got == pytest.approx(expected, rel=1e-14)
        assert got == pytest.approx(59.02, abs=0.005)

    def test_floor_of_two(self):
        rng = np.random.default_rng(7)
        re = rng.uniform(0, 1e4, 200)
        sc = rng.uniform(1e-2, 1e4, 200)
        assert np.all(sherwood(re, sc) >= 2.0)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            sherwood(-1.0, 100.0)
        with pytest.raises(DomainError):
            sherwood(1.0, 0.0)


class TestMassTransfer:
    def test_hand_value(self):
        # Sh=2, D=7.5e-10 m^2/s, x = 97.5 um
        k = mass_transfer_coefficient(2.0, 7.5e-10, 9.75e-5)
        assert k == pytest.approx(1.5e-9 / 9.75e-5, rel=1e-14)
        assert k == pytest.approx(1.538e-5, rel=1e-3)

    def test_inverse_size_scaling(self):
        k1 = mass_transfer_coefficient(2.0, 7.5e-10, 9.75e-5)
        k2 = mass_transfer_coefficient(2.0, 7.5e-10, 9.75e-5 / 2)
        assert k2 == pytest.approx(2 * k1, rel=1e-14)

    def test_sherwood_scaling(self):
        k1 = mass_transfer_coefficient(2.0, 7.5e-10, 9.75e-5)
        k4 = mass_transfer_coefficient(4.0, 7.5e-10, 9.75e-5)
        assert k4 == pytest.approx(2 * k1, rel=1e-14)

    def test_zero_size_is_singular(self):
        with pytest.raises(SingularityError):
            mass_transfer_coefficient(2.0, 7.5e-10, 0.0)


class TestReynoldsSchmidt:
    def test_no_agitation(self, conditions):
        cond = DissolutionConditions(paddle_rpm=0.0)
        re, sc = reynolds_schmidt(cond, 9.75e-5, 7.5e-10)
        assert re == 0.0
        assert sherwood(re, sc) == 2.0

    def test_schmidt_water_at_37(self, conditions):
        _, sc = reynolds_schmidt(conditions, 1e-4, 7.5e-10)
        assert sc == pytest.approx(7.0e-4 / (993.0 * 7.5e-10), rel=1e-14)
        assert sc == pytest.approx(940.0, abs=1.0)

    def test_velocity_factor_linearity(self):
        lo = DissolutionConditions(velocity_factor=0.1)
        hi = DissolutionConditions(velocity_factor=0.2)
        re_lo, sc_lo = reynolds_schmidt(lo, 1e-4, 7.5e-10)
        re_hi, sc_hi = reynolds_schmidt(hi, 1e-4, 7.5e-10)
        assert re_hi == pytest.approx(2 * re_lo, rel=1e-14)
        assert sc_hi == sc_lo


class TestShrinkRate:
    def test_no_driving_force(self, sphere, drug):
        assert shrink_rate(1e-5, 1.5e-5, sphere, drug, drug.c_sat_mg_ml) == 0.0

    def test_hand_value(self, sphere, drug):
        # sphere surface/volume ratio 6, k from the 97.5 um example, sink
        k = 1.5e-9 / 9.75e-5
        rate = shrink_rate(9.75e-5, k, sphere, drug, 0.0)
        expected = -k * 6.0 * 0.45 / 1512.0
        assert rate == pytest.approx(expected, rel=1e-12)
        assert rate == pytest.approx(-2.747e-8, rel=1e-3)

    def test_linear_in_driving_force(self, sphere, drug):
        full = shrink_rate(1e-5, 1e-5, sphere, drug, 0.0)
        half = shrink_rate(1e-5, 1e-5, sphere, drug, drug.c_sat_mg_ml / 2)
        assert half == pytest.approx(full / 2, rel=1e-12)

    def test_saturation_violation(self, sphere, drug):
        with pytest.raises(SaturationError):
            shrink_rate(1e-5, 1e-5, sphere, drug, drug.c_sat_mg_ml * 1.01)

    def test_never_positive(self, sphere, drug):
        rng = np.random.default_rng(3)
        for _ in range(50):
            c_b = rng.uniform(0, drug.c_sat_mg_ml)
            assert shrink_rate(1e-5, 1e-5, sphere, drug, c_b) <= 0.0


class TestLognormalPsd:
    def test_degenerate_sigma(self):
        psd = psd_from_lognormal(97.5, 1.0, 50)
        assert psd.n_bins == 1
        assert psd.sizes_um[0] == 97.5
        assert psd.fractions[0] == 1.0

    def test_reference_case(self):
        psd = psd_from_lognormal(97.5, 1.5, 50)
        assert psd.n_bins == 50
        assert abs(psd.fractions.sum() - 1.0) <= 1e-9
        # Independent oracle: the mass median of the continuous log-normal
        oracle = stats.lognorm.ppf(0.5, s=np.log(1.5), scale=97.5)
        assert oracle == pytest.approx(97.5, rel=1e-12)
        assert 95.6 <= psd.d50_um <= 99.5

    @pytest.mark.parametrize("d50", [20.0, 97.5, 300.0])
    @pytest.mark.parametrize("geo_sigma", [1.2, 1.5, 2.0])
    def test_median_recovery(self, d50, geo_sigma):
        for n_bins in (30, 50, 80):
            psd = psd_from_lognormal(d50, geo_sigma, n_bins)
            assert abs(psd.d50_um - d50) <= 0.02 * d50

    def test_scaling(self):
        small = psd_from_lognormal(45.0, 1.5, 50)
        large = psd_from_lognormal(200.0, 1.5, 50)
        assert np.all(small.sizes_um < large.d50_um)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            psd_from_lognormal(-1.0, 1.5, 50)
        with pytest.raises(DomainError):
            psd_from_lognormal(97.5, 0.9, 50)
        with pytest.raises(DomainError):
            psd_from_lognormal(97.5, 1.5, 0)


class TestDerivedMetrics:
    def test_monodisperse_sphere(self, sphere, drug):
        psd = SizeDistribution([1.0], [1.0])
        ssa, vol_eq = derived_metrics(psd, sphere, drug)
        assert ssa == pytest.approx(6.0 / (1512.0 * 1e-6) / 1000.0, rel=1e-12)
        assert ssa == pytest.approx(3.97, abs=0.01)
        assert vol_eq == pytest.approx(1.0, rel=1e-12)

    def test_inverse_size_scaling(self, sphere, drug):
        ssa1, _ = derived_metrics(SizeDistribution([1.0], [1.0]), sphere, drug)
        ssa2, _ = derived_metrics(SizeDistribution([2.0], [1.0]), sphere, drug)
        assert ssa2 == pytest.approx(ssa1 / 2, rel=1e-12)

    def test_record_fields_stay_independent(self, reference_input):
        # Given SSA/vol-eq fields are carried as-is, not recomputed.
        assert reference_input.ssa_m2_g == 1.07
        assert reference_input.vol_eq_um == 1.85


class TestSimulate:
    def test_first_row_is_zero(self, drug, sphere, conditions, grid):
        psd = psd_from_lognormal(97.5, 1.5, 30)
        profile = simulate_dissolution(drug, sphere, psd, conditions, grid)
        assert profile.times_hr[0] == 0.0
        assert profile.released_pct[0] == 0.0

    def test_matches_analytic_oracle(self, drug, sphere, quiescent_sink):
        # Monodisperse 50 um sphere, sink, Sh pinned at 2 via zero agitation.
        x0 = 50e-6
        psd = SizeDistribution([50.0], [1.0])
        dense_s = np.arange(0.0, 601.0, 30.0)
        result = simulate(drug, sphere, psd, quiescent_sink, dense_s / 3600.0)
        expected, t_d = analytic_release_pct(dense_s, x0, drug)
        assert t_d == pytest.approx(466.667, rel=1e-3)
        t_num = result.complete_dissolution_time_s
        assert abs(t_num - t_d) <= 0.01 * t_d
        assert np.max(np.abs(result.profile.released_pct - expected)) <= 0.5

    def test_reference_input_shape(self, drug, sphere, conditions, grid):
        psd = psd_from_lognormal(97.5, 1.5, 50)
        profile = simulate_dissolution(drug, sphere, psd, conditions, grid)
        assert profile.n_points == 10
        assert tuple(profile.times_hr) == tuple(grid)

    def test_monotone_in_time(self, drug, sphere, conditions, grid):
        psd = psd_from_lognormal(200.0, 1.5, 40)
        profile = simulate_dissolution(drug, sphere, psd, conditions, grid)
        assert np.all(np.diff(profile.released_pct) >= 0.0)

    def test_mass_conservation(self, drug, sphere, conditions, grid):
        psd = psd_from_lognormal(97.5, 1.5, 30)
        result = simulate(drug, sphere, psd, conditions, grid)
        dose = conditions.dose_mg
        x0 = psd.sizes_um * 1e-6
        for state in result.states:
            with np.errstate(invalid="ignore"):
                remaining_frac = np.sum(psd.fractions * (state.sizes_m / x0) ** 3)
            total = state.dissolved_mass_mg + remaining_frac * dose
            assert abs(total - dose) / dose <= 1e-6

    def test_saturation_bound_and_cap(self, drug, sphere, grid):
        # 500 mg into 900 mL of 0.45 mg/mL solubility: capacity 405 mg < dose
        cond = DissolutionConditions(dose_mg=500.0)
        psd = psd_from_lognormal(45.0, 1.5, 30)
        result = simulate(drug, sphere, psd, cond, grid)
        cap = 100.0 * 0.45 * 900.0 / 500.0
        assert result.released_cap_pct == pytest.approx(cap)
        assert np.all(result.profile.released_pct <= cap + 1e-9)
        for state in result.states:
            assert state.bulk_concentration_mg_ml <= drug.c_sat_mg_ml + 1e-12

    def test_sink_override_forces_zero_bulk(self, drug, sphere, grid):
        cond = DissolutionConditions(dose_mg=500.0, sink_override=True)
        psd = psd_from_lognormal(45.0, 1.5, 30)
        result = simulate(drug, sphere, psd, cond, grid)
        for state in result.states:
            assert state.bulk_concentration_mg_ml == 0.0

    def test_monotone_in_size(self, drug, sphere, conditions, grid):
        # A distribution smaller at every quantile dissolves at least as fast.
        fast = simulate_dissolution(drug, sphere, psd_from_lognormal(45.0, 1.5, 40),
                                    conditions, grid)
        slow = simulate_dissolution(drug, sphere, psd_from_lognormal(97.5, 1.5, 40),
                                    conditions, grid)
        assert np.all(fast.released_pct >= slow.released_pct - 1e-9)

    def test_step_halving(self, drug, sphere, conditions):
        psd = psd_from_lognormal(97.5, 1.5, 25)
        grid = (0.0, 0.1, 0.25, 0.5, 1.0)
        coarse = simulate_dissolution(drug, sphere, psd, conditions, grid, max_step=60.0)
        fine = simulate_dissolution(drug, sphere, psd, conditions, grid, max_step=30.0)
        assert np.max(np.abs(coarse.released_pct - fine.released_pct)) <= 0.1

    def test_bins_freeze_at_zero(self, drug, sphere, conditions, grid):
        psd = psd_from_lognormal(45.0, 1.3, 10)
        result = simulate(drug, sphere, psd, conditions, grid)
        assert np.all(np.isfinite(result.extinction_times_s))
        assert result.profile.released_pct[-1] == pytest.approx(100.0, abs=1e-6)
        final_sizes = result.states[-1].sizes_m
        assert np.all(final_sizes == 0.0)

    def test_grid_validation(self, drug, sphere, conditions):
        psd = psd_from_lognormal(97.5, 1.5, 10)
        with pytest.raises(DomainError):
            simulate_dissolution(drug, sphere, psd, conditions, (0.5, 1.0))
        with pytest.raises(DomainError):
            simulate_dissolution(drug, sphere, psd, conditions, (0.0, 1.0, 1.0))

    def test_aspect_ratio_speeds_dissolution(self, drug, conditions, grid):
        # More surface per volume at aspect ratio > 1 must not slow release.
        psd = psd_from_lognormal(97.5, 1.5, 20)
        round_p = simulate_dissolution(drug, ParticleMorphology(), psd, conditions, grid)
        elongated = simulate_dissolution(
            drug, ParticleMorphology(aspect_ratio=2.0), psd, conditions, grid)
        assert np.all(elongated.released_pct >= round_p.released_pct - 1e-9)


def test_degenerate_single_point_grid(drug, sphere, conditions):
    psd = psd_from_lognormal(97.5, 1.5, 10)
    result = simulate(drug, sphere, psd, conditions, (0.0,))
    assert result.profile.points() == [(0.0, 0.0)]
    assert np.all(np.isnan(result.extinction_times_s))


def test_random_sweep_preserves_physical_invariants(drug, sphere):
    # random powders and vessels: curves start at zero, never decrease, never
    # exceed the solubility cap, and the mass balance closes at every state
    rng = np.random.default_rng(42)
    grid = (0.0, 0.1, 0.5, 1.0, 3.0, 6.0)
    for _ in range(8):
        d50 = float(rng.uniform(10, 400))
        sigma = float(rng.uniform(1.0, 2.2))
        n_bins = int(rng.integers(1, 40))
        cond = DissolutionConditions(
            paddle_rpm=float(rng.uniform(0, 150)),
            dose_mg=float(rng.uniform(1, 600)),
            medium_volume_ml=float(rng.uniform(200, 1000)),
            velocity_factor=float(rng.uniform(0.01, 1.0)),
            sink_override=bool(rng.integers(0, 2)),
        )
        psd = psd_from_lognormal(d50, sigma, n_bins)
        result = simulate(drug, sphere, psd, cond, grid)
        released = result.profile.released_pct
        assert released[0] == 0.0
        assert np.all(np.diff(released) >= 0.0)
        assert np.all(released <= result.released_cap_pct + 1e-9)
        x0 = psd.sizes_um * 1e-6
        for state in result.states:
            remaining = np.sum(psd.fractions * (state.sizes_m / x0) ** 3)
            total = state.dissolved_mass_mg + remaining * cond.dose_mg
            assert abs(total - cond.dose_mg) / cond.dose_mg <= 1e-6
            assert state.bulk_concentration_mg_ml <= drug.c_sat_mg_ml + 1e-12
