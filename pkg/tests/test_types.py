import math

import numpy as np
import pytest

from formukit.errors import DomainError, DuplicateTimeError, ValidationError
from formukit.types import (
    DissolutionConditions,
    DissolutionProfile,
    DrugSubstance,
    FormulationInput,
    ParticleMorphology,
    SizeDistribution,
)


class TestDrugSubstance:
    def test_positive_constants_required(self):
        with pytest.raises(DomainError):
            DrugSubstance("x", c_sat_mg_ml=0.0, diffusivity_m2_s=1e-9, true_density_g_ml=1.5)
        with pytest.raises(DomainError):
            DrugSubstance("x", c_sat_mg_ml=0.45, diffusivity_m2_s=-1e-9, true_density_g_ml=1.5)


class TestParticleMorphology:
    def test_sphere_defaults(self):
        sphere = ParticleMorphology()
        assert sphere.psi_a == pytest.approx(math.pi)
        assert sphere.psi_v == pytest.approx(math.pi / 6)
        assert sphere.surface_to_volume_ratio == pytest.approx(6.0)

    def test_convexity_bound(self):
        # more volume per surface than a sphere is geometrically impossible
        with pytest.raises(DomainError):
            ParticleMorphology(psi_a=1.0, psi_v=0.2)

    def test_prolate_correction_increases_area(self):
        sphere = ParticleMorphology()
        elongated = ParticleMorphology(aspect_ratio=2.0)
        assert elongated.psi_a_effective > sphere.psi_a_effective
        barely = ParticleMorphology(aspect_ratio=1.0 + 1e-9)
        assert barely.psi_a_effective == pytest.approx(sphere.psi_a_effective, rel=1e-6)

    def test_invalid_shape_parameters(self):
        with pytest.raises(DomainError):
            ParticleMorphology(aspect_ratio=0.5)
        with pytest.raises(DomainError):
            ParticleMorphology(roundness=0.0)
        with pytest.raises(DomainError):
            ParticleMorphology(psi_a=-1.0)


class TestSizeDistribution:
    def test_fraction_sum_enforced(self):
        with pytest.raises(DomainError):
            SizeDistribution([1.0, 2.0], [0.6, 0.399])

    def test_strictly_increasing_sizes(self):
        with pytest.raises(DomainError):
            SizeDistribution([2.0, 1.0], [0.5, 0.5])
        with pytest.raises(DomainError):
            SizeDistribution([1.0, 1.0], [0.5, 0.5])

    def test_nonnegative_fractions(self):
        with pytest.raises(DomainError):
            SizeDistribution([1.0, 2.0], [1.2, -0.2])

    def test_d50_interpolation_symmetric(self):
        psd = SizeDistribution([90.0, 100.0, 110.0], [0.25, 0.5, 0.25])
        assert psd.d50_um == pytest.approx(100.0)


class TestDissolutionConditions:
    def test_velocity_factor_range(self):
        with pytest.raises(DomainError):
            DissolutionConditions(velocity_factor=0.0)
        with pytest.raises(DomainError):
            DissolutionConditions(velocity_factor=1.5)

    def test_slip_velocity(self):
        cond = DissolutionConditions(paddle_rpm=50.0, velocity_factor=0.1)
        tip = 2 * math.pi * 50 / 60 * 0.037
        assert cond.slip_velocity_m_s == pytest.approx(0.1 * tip)


class TestDissolutionProfile:
    def test_sorts_points(self):
        profile = DissolutionProfile(np.array([1.0, 0.0]), np.array([50.0, 0.0]))
        assert profile.times_hr.tolist() == [0.0, 1.0]
        assert profile.starts_at_zero

    def test_duplicate_times_raise(self):
        with pytest.raises(DuplicateTimeError):
            DissolutionProfile(np.array([0.0, 1.0, 1.0]), np.array([0.0, 10.0, 20.0]))

    def test_range_enforced(self):
        with pytest.raises(DomainError):
            DissolutionProfile(np.array([0.0, 1.0]), np.array([0.0, 120.0]))

    def test_interpolation(self):
        profile = DissolutionProfile(np.array([0.0, 1.0, 2.0]), np.array([0.0, 50.0, 100.0]))
        assert profile.released_at(0.5) == 25.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            DissolutionProfile(np.array([]), np.array([]))


class TestFormulationInput:
    def test_defaults_carry_reference_drug(self):
        features = FormulationInput(d50_um=97.5)
        assert features.solubility_mg_ml == 0.45
        assert features.diffusivity_m2_s == 7.5e-10
        assert features.true_density_g_ml == 1.512

    def test_feature_vector_order(self):
        features = FormulationInput(d50_um=45.0, ssa_m2_g=1.7, vol_eq_um=1.17)
        vec = features.feature_vector()
        assert vec[0] == 45.0
        assert vec[-1] == 1.17

    def test_positive_fields(self):
        with pytest.raises(DomainError):
            FormulationInput(d50_um=-1.0)
        with pytest.raises(DomainError):
            FormulationInput(d50_um=45.0, ssa_m2_g=0.0)
