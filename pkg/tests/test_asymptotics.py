"""
Asymptotic profile: phases, transport amplitude and their diagnostics
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import DomainError, InterpolationError, ShapeError, UnsupportedLevelError
from src.modules.asymptotics import (
    compute_phase, compute_phi0, compute_s0, compute_sb, compute_sc, iterate_approximation,
    mass_drift_series, transport_apply,
)
from src.modules.estimates_lab import fit_decay_exponent, s_norm_series
from src.modules.grid_spectral import GridSpec, SpectralField, VectorField, inner_product
from src.modules.initial_data import gaussian
from src.modules.time_mesh import GradedMesh


class TestTransport:

    @given(seed=st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=20, deadline=None)
    def test_transport_is_skew(self, seed):
        grid = GridSpec(2, 16, 10.0)
        rng = np.random.default_rng(seed)
        s = VectorField.from_arrays(grid, [rng.standard_normal(grid.shape) for _ in range(2)])
        v = SpectralField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
        pairing = inner_product(v, transport_apply(s, v))
        scale = v.l2_norm() ** 2 * max(c.max_abs() for c in s.components) * float(np.max(grid.k_norm))
        assert abs(pairing.real) < 1e-12 * scale

    def test_zero_drift_is_zero(self):
        grid = GridSpec(2, 16, 10.0)
        v = gaussian(grid)
        assert transport_apply(VectorField.zeros(grid), v).max_abs() == 0.0


class TestIterateApproximation:

    def test_unsupported_level(self, v0, mesh, params):
        with pytest.raises(UnsupportedLevelError):
            iterate_approximation(2, v0, mesh, params)

    def test_profile_mesh_must_end_at_one(self, v0, params):
        with pytest.raises(DomainError):
            iterate_approximation(1, v0, GradedMesh(0.5, 16, 6.0), params)

    def test_free_profile_is_trivial(self, free_profile, v0):
        assert np.all(free_profile.phi_0 == 0)
        assert np.all(free_profile.phi_b == 0)
        assert np.all(free_profile.phi_c == 0)
        assert np.array_equal(free_profile.va.state(-1).values, v0.values)

    def test_level_zero_keeps_amplitude(self, v0, params):
        mesh = GradedMesh(1.0, 16, 6.0)
        profile = iterate_approximation(0, v0, mesh, params)
        assert np.all(profile.phi_b == 0)
        assert np.array_equal(profile.va.state(-1).values, v0.values)
        assert np.any(profile.phi_0[0] != 0)

    def test_phase_vanishes_at_final_time(self, profile):
        assert np.max(np.abs(profile.phi_0[-1])) == 0.0
        assert np.max(np.abs(profile.phi_b[-1])) == 0.0
        assert np.max(np.abs(profile.phi_c[-1])) == 0.0

    def test_phase_grows_toward_origin(self, profile):
        spec_series = [np.max(np.abs(profile.phi_0[k])) for k in range(profile.mesh.K)]
        assert spec_series[0] > spec_series[profile.mesh.K // 2] > spec_series[-2]

    def test_transport_conserves_mass(self, profile):
        assert profile.diagnostics["va_mass_drift"] < 1e-9
        assert np.max(np.abs(mass_drift_series(profile))) < 1e-9

    def test_diagnostics_keys(self, profile):
        expected = {"level", "t_1", "initial_condition_error_scale", "a0", "a_a", "va_mass_drift",
                    "va_growth_constant", "phi0_richardson"}
        assert expected <= set(profile.diagnostics)
        assert profile.diagnostics["a0"] == pytest.approx(0.5, rel=1e-12)
        assert profile.diagnostics["t_1"] == pytest.approx(profile.mesh.first)

    def test_amplitude_moves(self, profile, v0):
        change = (profile.va.state(-1) - v0).l2_norm()
        assert change > 0

    def test_s0_decay_exponent(self, profile, params):
        # below t = 1e-3 every resolved frequency sits under the cutoff
        series = s_norm_series(profile, "s0")
        fit = fit_decay_exponent(profile.times, series, (1e-5, 1e-3))
        assert fit.slope == pytest.approx(params.exponents.lambda_(0) - 1.0, abs=0.04)


class TestPointEvaluations:

    def test_compute_phi0_matches_table(self, profile, v0, mesh, params):
        k = 20
        phi = compute_phi0(v0, mesh.nodes[k], mesh, params)
        scale = np.max(np.abs(profile.phi_0[k]))
        assert np.max(np.abs(phi.values.real - profile.phi_0[k])) < 1e-10 * scale

    def test_compute_s0_matches_profile(self, profile, v0, mesh, params):
        k = 30
        s0 = compute_s0(v0, mesh.nodes[k], mesh, params)
        for mine, stored in zip(s0.components, profile.s0(k).components):
            assert np.max(np.abs(mine.values - stored.values)) < 1e-10 * max(stored.max_abs(), 1e-300)

    def test_compute_sb_matches_profile(self, profile, mesh):
        k = 25
        sb = compute_sb(mesh.nodes[k], mesh, profile.s0_squared_series(), profile.grid)
        for mine, stored in zip(sb.components, profile.sb(k).components):
            assert np.max(np.abs(mine.values - stored.values)) < 1e-9 * max(stored.max_abs(), 1e-300)

    def test_compute_sc_matches_profile(self, profile, v0, mesh, params):
        k = 25
        sc = compute_sc(mesh.nodes[k], mesh, profile.va, v0, params)
        for mine, stored in zip(sc.components, profile.sc(k).components):
            assert np.max(np.abs(mine.values - stored.values)) < 1e-9 * max(stored.max_abs(), 1e-300)
        with pytest.raises(ValueError):
            compute_sc(mesh.nodes[k], mesh, profile.va, v0, params, form="other")

    def test_time_domain(self, v0, mesh, params):
        with pytest.raises(DomainError):
            compute_s0(v0, 0.0, mesh, params)
        with pytest.raises(DomainError):
            compute_phi0(v0, 1.5, mesh, params)

    def test_phase_parts_sum(self, profile, mesh):
        k = 12
        phi, parts = compute_phase(mesh.nodes[k], mesh, profile)
        total = parts["phi_0"] + parts["phi_b"] + parts["phi_c"]
        assert np.max(np.abs(total.values - phi.values)) == 0.0
        with pytest.raises(ShapeError):
            compute_phase(mesh.nodes[k], GradedMesh(1.0, 32, 6.0), profile)

    def test_fields_at_nodes_and_between(self, profile, mesh):
        k = 40
        va, s, s0 = profile.fields_at(mesh.nodes[k])
        assert np.array_equal(va.values, profile.va.states[k])
        t = np.sqrt(mesh.nodes[k] * mesh.nodes[k + 1])
        va_mid, _, _ = profile.fields_at(t)
        expected = 0.5 * (profile.va.states[k] + profile.va.states[k + 1])
        assert np.max(np.abs(va_mid.values - expected)) < 1e-12
        with pytest.raises(InterpolationError):
            profile.fields_at(0.5 * mesh.first)

