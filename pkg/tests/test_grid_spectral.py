"""
Spectral grid properties: Parseval, norms, multipliers and derivatives
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import DomainError, InvalidFieldError, ParameterError, ShapeError
from src.modules.grid_spectral import (
    GridSpec, NormSpec, SpectralField, VectorField, chi_profile, cutoff_high, cutoff_low,
    dealias, divergence, gradient, hs_norm, inner_product, laplacian, lebesgue_norm,
    parseval_defect, sobolev_norm,
)
from src.modules.initial_data import gaussian

GRID = GridSpec(2, 32, 20.0)

sigma_strategy = st.floats(min_value=-1.5, max_value=2.5, allow_nan=False, allow_infinity=False)
scale_strategy = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
seed_strategy = st.integers(min_value=0, max_value=2 ** 32 - 1)


def random_field(seed: int, grid: GridSpec = GRID) -> SpectralField:
    rng = np.random.default_rng(seed)
    return SpectralField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def plane_wave(grid: GridSpec, m: int) -> SpectralField:
    k0 = grid.frequency_spacing * m
    return SpectralField.from_function(grid, lambda x, y: np.exp(1j * k0 * x) + 0 * y)


class TestGridSpec:

    @pytest.mark.parametrize("points", [12, 7, 100])
    def test_rejects_non_power_of_two(self, points):
        with pytest.raises(ParameterError):
            GridSpec(2, points, 20.0)

    def test_rejects_bad_dimension_and_box(self):
        with pytest.raises(ParameterError) as info:
            GridSpec(1, 32, -1.0)
        assert len(info.value.violations) == 2

    def test_axis_is_centered(self):
        axis = GRID.axis
        assert axis[0] == pytest.approx(-10.0)
        assert axis[16] == pytest.approx(0.0)
        assert np.diff(axis) == pytest.approx(np.full(31, GRID.spacing))

    def test_refined_keeps_box(self):
        fine = GRID.refined()
        assert fine.points_per_dim == 64
        assert fine.box_length == GRID.box_length

    def test_dealias_keeps_two_thirds(self):
        mask = GRID.dealias_mask
        assert mask[0, 0]
        assert not mask[16, 0]
        assert mask.sum() < mask.size


class TestSpectralField:

    def test_rejects_non_finite(self):
        values = np.zeros(GRID.shape, dtype=complex)
        values[3, 4] = np.nan
        with pytest.raises(InvalidFieldError):
            SpectralField(GRID, values)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ShapeError):
            SpectralField(GRID, np.zeros((16, 16)))

    def test_values_are_read_only(self):
        u = SpectralField.zeros(GRID)
        with pytest.raises(ValueError):
            u.values[0, 0] = 1.0

    def test_grid_mismatch_in_arithmetic(self):
        with pytest.raises(ShapeError):
            SpectralField.zeros(GRID) + SpectralField.zeros(GRID.refined())

    @given(seed=seed_strategy)
    @settings(max_examples=30, deadline=None)
    def test_parseval(self, seed):
        u = random_field(seed)
        assert parseval_defect(u) < 1e-12

    @given(seed=seed_strategy)
    @settings(max_examples=30, deadline=None)
    def test_coefficient_round_trip(self, seed):
        u = random_field(seed)
        back = SpectralField.from_coefficients(GRID, u.coefficients)
        assert np.max(np.abs(back.values - u.values)) < 1e-12

    def test_inner_product_conjugates_first_argument(self):
        u, w = random_field(1), random_field(2)
        assert inner_product(u, w) == pytest.approx(np.conj(inner_product(w, u)), rel=1e-12)
        assert inner_product(u, u).real == pytest.approx(u.l2_norm() ** 2, rel=1e-12)

    def test_lebesgue_two_matches_l2(self):
        u = random_field(3)
        assert lebesgue_norm(u, 2) == pytest.approx(u.l2_norm(), rel=1e-12)
        assert lebesgue_norm(u, np.inf) == pytest.approx(u.max_abs())
        with pytest.raises(DomainError):
            lebesgue_norm(u, 0.5)


class TestNorms:

    @given(sigma=sigma_strategy, c=scale_strategy, seed=seed_strategy)
    @settings(max_examples=40, deadline=None)
    def test_homogeneity(self, sigma, c, seed):
        u = random_field(seed)
        spec = NormSpec(sigma)
        assert sobolev_norm(u * c, spec) == pytest.approx(abs(c) * sobolev_norm(u, spec), rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("m", [0, 1, 3])
    @pytest.mark.parametrize("sigma", [0.0, 0.95, 2.0])
    def test_plane_wave_hs_norm(self, m, sigma):
        u = plane_wave(GRID, m)
        k0 = GRID.frequency_spacing * m
        expected = (1.0 + k0 ** 2) ** (sigma / 2.0) * GRID.box_length
        assert hs_norm(u, sigma) == pytest.approx(expected, rel=1e-10)

    def test_homogeneous_norm_drops_zero_mode(self):
        u = SpectralField.constant(GRID, 2.0)
        assert sobolev_norm(u, NormSpec(0.5)) == pytest.approx(0.0, abs=1e-12)
        assert sobolev_norm(u, NormSpec(0.0)) == pytest.approx(u.l2_norm())

    def test_pm_norm_is_geometric_mean(self):
        u = gaussian(GRID)
        upper = sobolev_norm(u, NormSpec(1.05))
        lower = sobolev_norm(u, NormSpec(0.95))
        assert sobolev_norm(u, NormSpec(1.0, pm=True)) == pytest.approx(np.sqrt(upper * lower), rel=1e-12)

    def test_vector_norm_is_root_sum_square(self):
        u = gaussian(GRID)
        s = gradient(u)
        spec = NormSpec(0.5)
        expected = np.sqrt(sum(sobolev_norm(c, spec) ** 2 for c in s.components))
        assert sobolev_norm(s, spec) == pytest.approx(expected, rel=1e-12)

    def test_norm_spec_validation(self):
        with pytest.raises(ParameterError):
            NormSpec(1.0, pm=True, pm_epsilon=0.0)
        assert NormSpec(-1.1).label == "omega^-1.1"
        assert NormSpec(1.0, pm=True, pm_epsilon=0.25).label == "omega^1±0"

    @pytest.mark.parametrize("sigma, epsilon", [(1.0, 0.5), (1.0, 0.8), (0.2, 0.3), (0.0, 0.05), (-0.5, 0.5)])
    def test_pm_epsilon_must_be_small(self, sigma, epsilon):
        with pytest.raises(ParameterError) as info:
            NormSpec(sigma, pm=True, pm_epsilon=epsilon)
        assert "pm_epsilon" in str(info.value)
        # only the bracketing norm constrains epsilon
        assert NormSpec(sigma, pm_epsilon=epsilon).sigma == sigma

    def test_norm_spec_lists_every_violation(self):
        with pytest.raises(ParameterError) as info:
            NormSpec(float("nan"), pm=True, pm_epsilon=-1.0)
        assert len(info.value.violations) == 2
        assert NormSpec(0.95, homogeneous=False).label == "<omega>^0.95"


class TestMultipliers:

    def test_chi_profile_shape(self):
        ell = np.linspace(0.0, 3.0, 301)
        chi = chi_profile(ell)
        assert np.all((chi >= 0) & (chi <= 1))
        assert np.all(chi[ell <= 1.0] == 1.0)
        assert np.all(chi[ell >= 2.0] == 0.0)
        assert np.all(np.diff(chi) <= 1e-15)

    @given(t=st.floats(min_value=1e-6, max_value=1.0), seed=seed_strategy)
    @settings(max_examples=25, deadline=None)
    def test_cutoffs_partition(self, t, seed):
        u = random_field(seed)
        total = cutoff_low(u, t) + cutoff_high(u, t)
        assert np.max(np.abs(total.values - u.values)) < 1e-12

    def test_cutoff_needs_positive_time(self):
        with pytest.raises(DomainError):
            cutoff_low(gaussian(GRID), 0.0)

    def test_dealias_idempotent(self):
        u = random_field(5)
        once = dealias(u)
        assert np.max(np.abs(dealias(once).values - once.values)) < 1e-12


class TestDerivatives:

    def test_gradient_of_plane_wave(self):
        u = plane_wave(GRID, 2)
        k0 = GRID.frequency_spacing * 2
        grad = gradient(u)
        assert np.max(np.abs(grad.components[0].values - 1j * k0 * u.values)) < 1e-10
        assert np.max(np.abs(grad.components[1].values)) < 1e-10

    def test_divergence_of_gradient_is_laplacian(self):
        u = gaussian(GRID, 1.5)
        lhs = divergence(gradient(u))
        assert np.max(np.abs(lhs.values - laplacian(u).values)) < 1e-10

    def test_gradient_is_curl_free(self):
        assert gradient(gaussian(GRID, 1.2, momentum=[0.3, -0.2])).is_curl_free()

    def test_rotation_field_is_not_curl_free(self):
        u = gaussian(GRID).real_part()
        dx, dy = gradient(u).components
        rotated = VectorField((dy * -1.0, dx))
        assert not rotated.is_curl_free()

    def test_vector_components_must_match_dimension(self):
        with pytest.raises(ShapeError):
            VectorField((SpectralField.zeros(GRID),))
