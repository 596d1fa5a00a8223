"""
Model parameters, time exponents and the Hartree potential
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import DomainError, ParameterError
from src.modules.grid_spectral import GridSpec
from src.modules.hartree_core import (
    ExponentTable, ModelParams, fourier_kernel_constant, hartree_potential, interaction_potential,
    riesz_constant, split_potential, unit_sphere_area,
)
from src.modules.initial_data import gaussian
from src.modules.oracles import short_range_mode_oracle

GRID = GridSpec(2, 32, 20.0)

gamma_strategy = st.floats(min_value=0.34, max_value=0.49)


class TestModelParams:

    def test_defaults_are_admissible(self):
        params = ModelParams()
        assert params.validated
        assert params.violations() == []

    def test_gamma_outside_window(self):
        with pytest.raises(ParameterError) as info:
            ModelParams(gamma=0.3)
        assert any("1/3 < γ < 1/2" in v for v in info.value.violations)

    def test_rho_below_lower_bound(self):
        with pytest.raises(ParameterError) as info:
            ModelParams(rho=0.8)
        assert any("2 − 5·gamma/2 = 0.875" in v for v in info.value.violations)

    def test_rho_above_half_dimension(self):
        with pytest.raises(ParameterError) as info:
            ModelParams(rho=1.0)
        assert any("n/2" in v for v in info.value.violations)

    def test_empty_rho_window(self):
        # 2 - 5 * 0.38 / 2 = 1.05 >= n/2 = 1
        with pytest.raises(ParameterError) as info:
            ModelParams(gamma=0.38)
        assert any("is empty" in v for v in info.value.violations)

    def test_unknown_kernel(self):
        with pytest.raises(ParameterError):
            ModelParams(kernel="yukawa")

    @pytest.mark.parametrize("epsilon", [0.0, 0.5, 1.0])
    def test_plus_epsilon_window(self, epsilon):
        with pytest.raises(ParameterError) as info:
            ModelParams(plus_epsilon=epsilon)
        assert any("plus_epsilon" in v for v in info.value.violations)

    def test_unvalidated_gamma_is_allowed_on_request(self):
        params = ModelParams(gamma=0.6, rho=0.95, allow_unvalidated_gamma=True)
        assert not params.validated

    def test_with_kappa(self):
        params = ModelParams().with_kappa(-2.0)
        assert params.kappa == -2.0
        assert params.gamma == 0.45

    def test_higher_dimension_window(self):
        params = ModelParams(gamma=0.45, rho=1.2, n=3)
        assert params.violations() == []


class TestExponents:

    def test_default_values(self):
        table = ExponentTable(0.45, 0.95)
        assert table.lambda_(0) == pytest.approx(0.45)
        assert table.lambda_(1) == pytest.approx(0.175)
        assert table.integrability_exponent == pytest.approx(0.075)
        assert table.holder_exponent(0.95) == pytest.approx(0.35)
        assert table.lambda_star(0.95) == pytest.approx(0.45)
        assert table.ordering_holds()

    def test_bracket_at_zero_uses_epsilon(self):
        table = ExponentTable(0.45, 0.725, plus_epsilon=0.05)
        assert table.bracket_plus(0.0) == 0.05
        assert table.lambda_(0) == pytest.approx(0.45 - 0.025)

    def test_mu_uses_ordinary_positive_part(self):
        table = ExponentTable(0.45, 0.95)
        # j + 1 + gamma - sigma' - 2 rho = 0 at j = 1, sigma' = 0.55
        assert table.mu(1, 0.55) == pytest.approx(0.45)

    @given(gamma=gamma_strategy, rho=st.floats(min_value=0.5, max_value=1.4),
           alpha=st.floats(min_value=0.0, max_value=3.0))
    @settings(max_examples=50, deadline=None)
    def test_lambda_is_nonincreasing(self, gamma, rho, alpha):
        table = ExponentTable(gamma, rho)
        assert table.lambda_(alpha + 0.5) <= table.lambda_(alpha) + 1e-12
        assert table.lambda_(alpha) <= gamma

    @given(gamma=gamma_strategy)
    @settings(max_examples=30, deadline=None)
    def test_ordering_over_admissible_window(self, gamma):
        lower = 2.0 - 2.5 * gamma
        if lower >= 1.0:
            return
        rho = 0.5 * (lower + 1.0)
        assert ExponentTable(gamma, rho).ordering_holds()

    def test_v4_domination(self):
        table = ExponentTable(0.45, 0.95)
        assert table.v4_second_term_dominated(1.2)
        assert isinstance(table.v4_second_term_dominated(0.95), bool)


class TestKernelConstants:

    def test_sphere_areas(self):
        assert unit_sphere_area(2) == pytest.approx(2 * math.pi)
        assert unit_sphere_area(3) == pytest.approx(4 * math.pi)

    @given(gamma=st.floats(min_value=0.1, max_value=1.9))
    @settings(max_examples=30, deadline=None)
    def test_riesz_constant_relation(self, gamma):
        assert riesz_constant(gamma, 2) == pytest.approx(2 * math.pi * fourier_kernel_constant(gamma, 2), rel=1e-12)


class TestHartreePotential:

    def test_potential_is_real_and_gauge_invariant(self, params):
        u = gaussian(GRID, 1.0, momentum=[0.4, 0.1])
        g = hartree_potential(u, params)
        rotated = hartree_potential(u * np.exp(0.7j), params)
        assert np.max(np.abs(g.values.imag)) == 0.0
        assert np.max(np.abs(g.values - rotated.values)) < 1e-12 * g.max_abs()

    def test_linear_in_kappa(self, params):
        u = gaussian(GRID)
        g1 = hartree_potential(u, params)
        g3 = hartree_potential(u, params.with_kappa(3.0))
        assert np.max(np.abs(g3.values - 3.0 * g1.values)) < 1e-10 * g3.max_abs()

    def test_zero_coupling(self, free_params):
        g = interaction_potential(np.ones(GRID.shape), GRID, free_params)
        assert g.max_abs() == 0.0

    def test_potential_is_positive_for_repulsive_kernel(self, params):
        g = hartree_potential(gaussian(GRID), params)
        assert np.min(g.values.real) > 0

    def test_split_partition(self, params):
        u = gaussian(GRID)
        g = hartree_potential(u, params)
        low, high = split_potential(u, 0.01, params)
        assert np.max(np.abs((low + high).values - g.values)) < 1e-12 * g.max_abs()

    def test_split_needs_positive_time(self, params):
        with pytest.raises(DomainError):
            split_potential(gaussian(GRID), 0.0, params)

    @pytest.mark.parametrize("t", [1e-3, 0.05, 0.5])
    def test_short_range_part_matches_mode_sum(self, t):
        params = ModelParams(kernel="riesz")
        grid = GridSpec(2, 16, 20.0)
        u = gaussian(grid, 1.5)
        _, high = split_potential(u, t, params)
        expected = short_range_mode_oracle(u, t, params)
        assert high.l2_norm() == pytest.approx(expected, rel=1e-10, abs=1e-14)

