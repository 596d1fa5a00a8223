"""
Graded mesh, trajectories and the time quadratures
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import DomainError, InterpolationError, ParameterError, ShapeError, StabilityError
from src.modules.grid_spectral import GridSpec, NormSpec, SpectralField
from src.modules.initial_data import gaussian
from src.modules.time_mesh import (
    GradedMesh, Trajectory, cumulative_integral, implicit_midpoint_step, richardson_estimate,
    tail_integral, weighted_tail_integral,
)

GRID = GridSpec(2, 16, 10.0)


class TestGradedMesh:

    def test_nodes(self):
        mesh = GradedMesh(1.0, 64, 6.0)
        nodes = mesh.nodes
        assert nodes[0] == pytest.approx((1 / 64) ** 6)
        assert nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)
        assert mesh.first == nodes[0]

    @pytest.mark.parametrize("kwargs", [{"T": 0.0}, {"T": 1.5}, {"K": 1}, {"p": 0.5}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            GradedMesh(**kwargs)

    @given(T=st.floats(min_value=0.01, max_value=1.0))
    @settings(max_examples=30, deadline=None)
    def test_truncation_is_node_identical_prefix(self, T):
        mesh = GradedMesh(1.0, 128, 6.0)
        prefix = mesh.truncated(T)
        assert prefix.is_prefix_of(mesh)
        assert prefix.T <= T * (1 + 1e-12)
        assert prefix.K == mesh.count_up_to(T)

    def test_truncation_needs_two_nodes(self):
        with pytest.raises(DomainError):
            GradedMesh(1.0, 16, 6.0).truncated(1e-9)

    def test_index_of(self):
        mesh = GradedMesh(1.0, 32, 4.0)
        assert mesh.index_of(mesh.nodes[7]) == 7
        with pytest.raises(InterpolationError):
            mesh.index_of(0.5 * (mesh.nodes[7] + mesh.nodes[8]))

    def test_refined_and_coarsened(self):
        mesh = GradedMesh(1.0, 32, 6.0)
        assert mesh.refined().K == 64
        assert mesh.coarsened().K == 16
        assert not mesh.refined().is_prefix_of(mesh)

    def test_default_power(self):
        assert GradedMesh.default_power(0.175) == 6.0
        assert GradedMesh.default_power(0.5) == 2.0
        assert GradedMesh.default_power(-1.0) == 6.0


class TestTrajectory:

    def setup_method(self):
        self.mesh = GradedMesh(1.0, 16, 3.0)
        self.u = gaussian(GRID)
        self.trajectory = Trajectory.from_fields(
            self.mesh, [self.u * (1.0 + t) for t in self.mesh.nodes], "linear")

    def test_shape_is_checked(self):
        with pytest.raises(ShapeError):
            Trajectory(self.mesh, GRID, np.zeros((3,) + GRID.shape))

    def test_states_are_read_only(self):
        with pytest.raises(ValueError):
            self.trajectory.states[0, 0, 0] = 1.0

    def test_at_nodes_returns_states(self):
        k = 5
        value = self.trajectory.at(self.mesh.nodes[k])
        assert np.array_equal(value.values, self.trajectory.states[k])

    def test_at_between_nodes_is_convex(self):
        t = np.sqrt(self.mesh.nodes[5] * self.mesh.nodes[6])
        value = self.trajectory.at(t)
        expected = 0.5 * (self.trajectory.states[5] + self.trajectory.states[6])
        assert np.max(np.abs(value.values - expected)) < 1e-12

    def test_at_outside_range(self):
        with pytest.raises(InterpolationError):
            self.trajectory.at(0.5 * self.mesh.first)
        with pytest.raises(InterpolationError):
            self.trajectory.at(2.0)

    def test_norm_series_is_cached(self):
        spec = NormSpec(0.95, homogeneous=False)
        first = self.trajectory.norm_series(spec)
        assert self.trajectory.norm_series(spec) is first
        assert self.trajectory.sup_norm(spec) == pytest.approx(first[-1])

    def test_l2_series(self):
        expected = self.u.l2_norm() * (1.0 + self.mesh.nodes)
        assert self.trajectory.l2_series() == pytest.approx(expected, rel=1e-12)

    def test_difference_and_restriction(self):
        constant = Trajectory.constant(self.mesh, self.u)
        difference = self.trajectory.difference(constant)
        assert difference.l2_series() == pytest.approx(self.u.l2_norm() * self.mesh.nodes, rel=1e-10)
        prefix = self.trajectory.restricted(self.mesh.truncated(0.3))
        assert len(prefix) == self.mesh.count_up_to(0.3)
        with pytest.raises(ShapeError):
            self.trajectory.difference(Trajectory.constant(GradedMesh(1.0, 8, 3.0), self.u))


class TestQuadrature:

    nodes = GradedMesh(1.0, 64, 6.0).nodes

    def test_cumulative_integral_exact_for_linear(self):
        values = 1.0 + 2.0 * self.nodes
        result = cumulative_integral(values, self.nodes, include_origin=False)
        t1 = self.nodes[0]
        exact = (self.nodes + self.nodes ** 2) - (t1 + t1 ** 2)
        assert result == pytest.approx(exact, rel=1e-12, abs=1e-15)

    def test_cumulative_integral_origin_piece(self):
        values = np.ones_like(self.nodes)
        assert cumulative_integral(values, self.nodes) == pytest.approx(self.nodes, rel=1e-12)

    def test_tail_integral_exact_for_linear(self):
        values = 3.0 * self.nodes
        assert tail_integral(values, self.nodes) == pytest.approx(1.5 * (1.0 - self.nodes ** 2), abs=1e-13)

    @given(beta=st.floats(min_value=-1.9, max_value=0.5), a=st.floats(-2.0, 2.0), b=st.floats(-2.0, 2.0))
    @settings(max_examples=40, deadline=None)
    def test_weighted_tail_exact_for_linear(self, beta, a, b):
        if abs(beta + 1.0) < 1e-3 or abs(beta + 2.0) < 1e-3:
            return
        t = self.nodes
        result = weighted_tail_integral(a + b * t, t, beta)

        def antiderivative(s):
            return a * s ** (beta + 1) / (beta + 1) + b * s ** (beta + 2) / (beta + 2)

        exact = antiderivative(1.0) - antiderivative(t)
        scale = np.max(np.abs(exact)) + 1.0
        assert np.max(np.abs(result - exact)) < 1e-9 * scale

    def test_weighted_tail_on_fields(self):
        values = np.ones((len(self.nodes), 2, 2))
        result = weighted_tail_integral(values, self.nodes, -0.5)
        assert result.shape == values.shape
        assert result[-1] == pytest.approx(np.zeros((2, 2)))

    def test_richardson_alignment(self):
        fine = np.linspace(0.0, 1.0, 8)
        assert richardson_estimate(fine, fine[1::2]) == 0.0
        with pytest.raises(ShapeError):
            richardson_estimate(fine, fine[:3])


class TestImplicitMidpoint:

    @given(rate=st.floats(min_value=-20.0, max_value=20.0), dt=st.floats(min_value=1e-4, max_value=0.02))
    @settings(max_examples=30, deadline=None)
    def test_skew_generator_preserves_norm(self, rate, dt):
        u = gaussian(GRID, 1.0, momentum=[0.3, 0.0])
        w, iterations = implicit_midpoint_step(lambda v: v * (1j * rate), u, dt)
        assert iterations >= 1
        assert abs(w.l2_norm() - u.l2_norm()) < 1e-11 * u.l2_norm()

    def test_cayley_map_value(self):
        u = SpectralField.constant(GRID, 1.0)
        a, dt = 2.0j, 0.01
        w, _ = implicit_midpoint_step(lambda v: v * a, u, dt)
        expected = (1 + 0.5 * dt * a) / (1 - 0.5 * dt * a)
        assert w.values[0, 0] == pytest.approx(expected, rel=1e-12)

    @given(rate=st.floats(min_value=-20.0, max_value=20.0), dt=st.floats(min_value=1e-4, max_value=0.02))
    @settings(max_examples=30, deadline=None)
    def test_negative_step_is_inverse(self, rate, dt):
        u = gaussian(GRID, 1.0, momentum=[0.3, 0.0])
        generator = lambda v: v * (1j * rate)
        w, _ = implicit_midpoint_step(generator, u, dt)
        back, _ = implicit_midpoint_step(generator, w, -dt)
        assert np.max(np.abs(back.values - u.values)) < 1e-11

    def test_stiff_step_is_rejected(self):
        u = gaussian(GRID)
        with pytest.raises(StabilityError):
            implicit_midpoint_step(lambda v: v * 500.0j, u, 0.1, max_iter=20)
