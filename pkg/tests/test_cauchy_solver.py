"""
Linearized flow, the Gamma fixed point and the calibrated constants
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.config import SolverSection
from src.core.errors import ContractionError, DomainError, ParameterError, ShapeError
from src.modules.asymptotics import iterate_approximation
from src.modules.cauchy_solver import (
    CONTRACTION_LIMIT, SolverConfig, L_terms, apply_L, calibrate_gronwall_constant, calibrate_holder_constant,
    calibrate_smallness_constant, difference_monitor, gronwall_envelope, potential, select_final_time,
    solve_linearized, solve_nonlinear_fixed_point, sup_distance,
)
from src.modules.grid_spectral import hs_norm
from src.modules.initial_data import gaussian, normalize
from src.modules.time_mesh import GradedMesh, Trajectory
from src.modules.transforms import free_propagate


class TestSolverConfig:

    def test_from_section(self):
        section = SolverSection(fixed_point_tol=1e-6, max_iterations=4)
        config = SolverConfig.from_section(section, 0.9, 0.25)
        assert config.T == 0.25
        assert config.rho_prime == 0.9
        assert config.max_iterations == 4
        assert config.fixed_point_tol == 1e-6


class TestOperator:

    def test_terms_sum_to_operator(self, profile, v0, params):
        t = profile.times[30]
        terms = L_terms(v0, v0, profile, t, params)
        assert set(terms) == {"kinetic", "advection", "compression", "short_range",
                              "long_range_difference", "phase_difference"}
        total = apply_L(v0, v0, profile, t, params)
        summed = sum((term.values for term in terms.values()), np.zeros(v0.grid.shape, dtype=complex))
        assert np.max(np.abs(total.values - summed)) < 1e-12 * max(total.max_abs(), 1.0)

    def test_potential_is_real(self, profile, v0, params):
        t = profile.times[20]
        va, s, s0 = profile.fields_at(t)
        V = potential(v0, va, s, s0, t, params)
        assert np.all(V.values.imag == 0)

    def test_free_operator_is_kinetic(self, free_profile, v0, free_params):
        t = free_profile.times[10]
        terms = L_terms(v0, v0, free_profile, t, free_params)
        for name, term in terms.items():
            if name != "kinetic":
                assert term.max_abs() == 0.0

    def test_time_must_be_positive(self, profile, v0, params):
        with pytest.raises(DomainError):
            L_terms(v0, v0, profile, 0.0, params)


class TestLinearized:

    def test_free_flow_matches_propagator(self, free_profile, v0, free_params):
        mesh = free_profile.mesh.truncated(0.1)
        driver = Trajectory.constant(mesh, v0)
        run = solve_linearized(driver, v0, mesh.first, SolverConfig(T=0.1), free_profile, free_params)
        for k in (5, mesh.K // 2, mesh.K - 1):
            expected = free_propagate(v0, mesh.nodes[k] - mesh.first)
            assert np.max(np.abs(run.trajectory.states[k] - expected.values)) < 1e-10
        assert run.rejected_steps == 0

    def test_interacting_flow_conserves_mass(self, profile, v0, params):
        mesh = profile.mesh.truncated(0.05)
        driver = Trajectory.constant(mesh, v0)
        run = solve_linearized(driver, v0, mesh.first, SolverConfig(T=0.05), profile, params)
        assert run.l2_drift < 1e-9
        assert run.substeps >= mesh.K - 1

    def test_backward_from_interior_node(self, free_profile, v0, free_params):
        mesh = free_profile.mesh.truncated(0.1)
        driver = Trajectory.constant(mesh, v0)
        start = mesh.K // 2
        run = solve_linearized(driver, v0, mesh.nodes[start], SolverConfig(T=0.1), free_profile, free_params)
        back = free_propagate(v0, mesh.first - mesh.nodes[start])
        assert np.max(np.abs(run.trajectory.states[0] - back.values)) < 1e-10

    def test_mesh_must_be_profile_prefix(self, profile, v0, params):
        driver = Trajectory.constant(GradedMesh(0.5, 20, 3.0), v0)
        with pytest.raises(ShapeError):
            solve_linearized(driver, v0, driver.mesh.first, SolverConfig(), profile, params)


class TestFixedPoint:

    def test_free_fixed_point_converges_at_once(self, free_profile, v0, free_params):
        result = solve_nonlinear_fixed_point(v0, SolverConfig(T=0.1), free_profile, free_params)
        assert result.converged
        assert result.iterations == 1
        assert result.ratios == []
        assert result.T <= 0.1
        summary = result.summary()
        assert summary["iterations"] == 1
        assert summary["l2_drift"] < 1e-12
        # the free flow preserves every Sobolev norm
        norms = [hs_norm(u, free_params.rho) for u in result.trajectory.fields()]
        assert np.ptp(norms) < 1e-12 * norms[0]

    def test_iteration_budget_exhausted(self, profile, v0, params):
        with pytest.raises(ContractionError) as info:
            solve_nonlinear_fixed_point(v0, SolverConfig(T=0.01, max_iterations=1), profile, params)
        assert info.value.ratio_history == []

    def test_sup_distance(self, v0):
        mesh = GradedMesh(1.0, 8, 2.0)
        a = Trajectory.constant(mesh, v0)
        b = Trajectory.constant(mesh, v0 * 2.0)
        assert sup_distance(a, b, 0.95) == pytest.approx(hs_norm(v0, 0.95), rel=1e-12)


class TestConstants:

    def test_select_final_time(self, params):
        assert select_final_time(0.0, 1.0, params) == 1.0
        T = select_final_time(50.0, 1.0, params)
        assert 0 < T < 1
        product = 50.0 * 1.0 * 2.0 ** 3
        assert product * T ** params.exponents.integrability_exponent == pytest.approx(1.0, rel=1e-10)

    @given(c1=st.floats(min_value=10.0, max_value=1e3), factor=st.floats(min_value=1.1, max_value=10.0))
    @settings(max_examples=30, deadline=None)
    def test_final_time_shrinks_with_constant(self, c1, factor, params):
        assert select_final_time(c1 * factor, 1.0, params) <= select_final_time(c1, 1.0, params)

    def test_gronwall_envelope(self, params):
        assert gronwall_envelope(0.0, 1.0, 1.0, params, 5.0) == 1.0
        assert gronwall_envelope(0.5, 1.0, 1.0, params, 5.0) > gronwall_envelope(0.1, 1.0, 1.0, params, 5.0)

    def test_constant_trajectory_needs_no_constants(self, v0, params):
        trajectory = Trajectory.constant(GradedMesh(1.0, 16, 6.0), v0)
        assert calibrate_holder_constant(trajectory, 0.5, 0.5, params, 0.95) == 0.0
        assert calibrate_gronwall_constant(trajectory, 0.5, 0.5, params, 0.95) == 0.0

    def test_free_flow_gronwall_constant_is_negligible(self, free_profile, v0, free_params):
        result = solve_nonlinear_fixed_point(v0, SolverConfig(T=0.1), free_profile, free_params)
        assert calibrate_gronwall_constant(result.trajectory, 0.5, 0.5, free_params, 0.95) < 1e-8
        assert calibrate_holder_constant(result.trajectory, 0.5, 0.5, free_params, 0.95) > 0

    def test_free_smallness_constant(self, free_profile, v0, free_params):
        assert calibrate_smallness_constant(v0, free_profile, free_params, SolverConfig()) == 0.0

    def test_difference_monitor(self, v0, params):
        mesh = GradedMesh(1.0, 8, 2.0)
        base = Trajectory.constant(mesh, v0)
        shifted = Trajectory.constant(mesh, v0 * 1.5)
        report = difference_monitor(base, shifted, base, shifted, params, 0.95)
        expected = hs_norm(v0 * 0.5, 0.95) / (mesh.nodes ** params.exponents.integrability_exponent
                                              * hs_norm(v0 * 0.5, params.rho))
        assert report.ratios == pytest.approx(expected, rel=1e-10)
        assert report.supremum == pytest.approx(np.max(expected), rel=1e-10)
        with pytest.raises(ShapeError):
            other = Trajectory.constant(GradedMesh(1.0, 9, 2.0), v0)
            difference_monitor(base, shifted, other, other, params, 0.95)


class TestInteracting:
    """kappa = 1 through the potential and transport terms"""

    def test_round_trip_recovers_data(self, profile, v0, params):
        mesh = profile.mesh.truncated(0.05)
        config = SolverConfig(T=0.05)
        # a non-constant driver exercises the time interpolation of v
        driver = solve_linearized(Trajectory.constant(mesh, v0), v0, mesh.first, config, profile, params).trajectory
        forward = solve_linearized(driver, v0, mesh.first, config, profile, params)
        last = forward.trajectory.state(mesh.K - 1)
        assert np.max(np.abs(last.values - v0.values)) > 1e-6

        backward = solve_linearized(driver, last, mesh.nodes[-1], config, profile, params)
        assert np.max(np.abs(backward.trajectory.states[0] - v0.values)) < 1e-8
        assert np.max(np.abs(backward.trajectory.states - forward.trajectory.states)) < 1e-8

    @pytest.fixture(scope="class")
    def small_data(self, small_grid, mesh, params):
        data = normalize(gaussian(small_grid, 1.0, momentum=[0.5, 0.0]), 0.1, params.rho)
        return data, iterate_approximation(1, data, mesh, params)

    @pytest.fixture(scope="class")
    def calibrated(self, small_data, params):
        data, small_profile = small_data
        constant = calibrate_smallness_constant(data, small_profile, params, SolverConfig())
        T = select_final_time(constant, 2.0 * hs_norm(data, params.rho), params)
        result = solve_nonlinear_fixed_point(data, SolverConfig(T=T, max_iterations=40), small_profile, params)
        return constant, T, result

    def test_calibrated_constant(self, calibrated):
        constant, T, result = calibrated
        assert constant > 0
        assert 0 < T <= 1.0
        assert result.T <= T

    def test_calibrated_run_contracts(self, calibrated):
        _, _, result = calibrated
        assert result.converged
        assert result.iterations >= 2
        assert result.ratios
        assert max(result.ratios) < CONTRACTION_LIMIT

    def test_fixed_point_stays_in_ball(self, calibrated, small_data, params):
        data, _ = small_data
        _, _, result = calibrated
        a0 = hs_norm(data, params.rho)
        assert max(hs_norm(u, params.rho) for u in result.trajectory.fields()) <= 2.0 * a0
        assert result.distances[-1] < 1e-8

    @pytest.mark.parametrize("target", [0.0, 0.5, 0.75])
    def test_target_ratio_below_limit(self, target, small_data, params):
        data, small_profile = small_data
        with pytest.raises(ParameterError):
            calibrate_smallness_constant(data, small_profile, params, SolverConfig(), target_ratio=target)
