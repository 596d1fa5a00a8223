"""
Asymptotic Profile
==================

Successive approximation of the phase and amplitude (phi, v_a) near t = 0:

    phi_0 = -int_t^1 t'^(gamma-2) g_L(v_0)          s_0 = grad phi_0
    d_t v_a = s_0.grad v_a + (1/2)(div s_0) v_a      v_a(t_1) = v_0
    phi_b = -(1/2) int_t^1 |s_0|^2                   s_b = grad phi_b
    phi_c = -int_t^1 t'^(gamma-2) (g_L(v_a) - g_L(v_0)), s_c = grad phi_c

Only the phase parts are stored; phase gradients are formed on demand.
The profile lives on a graded mesh ending at T = 1.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..core.errors import DivergenceError, DomainError, InterpolationError, ShapeError, UnsupportedLevelError
from ..core.logger import logger
from .grid_spectral import (
    GridSpec, NormSpec, SpectralField, VectorField, chi_profile, dealias, divergence,
    gradient, hs_norm, low_multiplier, sobolev_norm,
)
from .hartree_core import ModelParams, hartree_potential, interaction_potential
from .time_mesh import (
    GradedMesh, Trajectory, cumulative_integral, implicit_midpoint_step, interval_weights,
    richardson_estimate, tail_integral, weighted_tail_integral,
)

SUPPORTED_LEVELS = (0, 1)
BLOWUP_FACTOR = 1e6


def transport_apply(s: VectorField, v: SpectralField) -> SpectralField:
    """(1/2)[s.grad v + div(s v)] with 2/3-rule projection on both sides"""
    projected = dealias(v)
    advection = s.dot(gradient(projected))
    flux = divergence(VectorField(tuple(c * projected for c in s.components)))
    return dealias((advection + flux) * 0.5)


def _real_gradient(values: np.ndarray, grid: GridSpec) -> VectorField:
    return gradient(SpectralField(grid, values)).real_part()


def _phi0_weights(times: np.ndarray, k_values: np.ndarray, gamma: float) -> np.ndarray:
    """W(t_j, k) = int_{t_j}^{t_last} t'^(gamma-2) chi(k t'^(1/2)) dt'"""
    chi = chi_profile(np.sqrt(times)[:, None] * k_values[None, :])
    return weighted_tail_integral(chi, times, gamma - 2.0)


def _check_time(t: float):
    if not t > 0:
        raise DomainError(f"time must be positive (got {t})")
    if t > 1.0 + 1e-12:
        raise DomainError(f"profile times lie in (0, 1] (got {t})")


def compute_s0(v0: SpectralField, t: float, mesh: GradedMesh, params: ModelParams) -> VectorField:
    """s_0(t) = -grad int_t^1 t'^(gamma-2) g_L(v_0), quadrature on the mesh nodes above t"""
    _check_time(t)
    return _real_gradient(compute_phi0(v0, t, mesh, params).values, v0.grid)


def compute_phi0(v0: SpectralField, t: float, mesh: GradedMesh, params: ModelParams) -> SpectralField:
    _check_time(t)
    grid = v0.grid
    nodes = mesh.nodes
    above = nodes[nodes > t * (1 + 1e-12)]
    if above.size == 0 or math.isclose(t, nodes[-1], rel_tol=1e-12):
        return SpectralField.zeros(grid)
    times = np.concatenate([[t], above])

    k_values, inverse = np.unique(grid.k_norm, return_inverse=True)
    weight = _phi0_weights(times, k_values, params.gamma)[0][inverse].reshape(grid.shape)
    g0 = hartree_potential(v0, params)
    return SpectralField.from_coefficients(grid, -weight * g0.coefficients).real_part()


def compute_sb(t: float, mesh: GradedMesh, s0_squared: np.ndarray, grid: GridSpec) -> VectorField:
    """s_b(t) = -(1/2) grad int_t^1 |s_0|^2 from |s_0|^2 sampled on the mesh"""
    _check_time(t)
    if s0_squared.shape != (mesh.K,) + grid.shape:
        raise ShapeError(f"|s_0|^2 series {s0_squared.shape} does not match mesh and grid")
    k = mesh.index_of(t)
    phi_b = -0.5 * tail_integral(s0_squared[k:], mesh.nodes[k:])[0]
    return _real_gradient(phi_b, grid)


def _low_part(values: np.ndarray, grid: GridSpec, t: float) -> np.ndarray:
    field = SpectralField(grid, values)
    return SpectralField.from_coefficients(grid, low_multiplier(grid, t) * field.coefficients).values.real


def _phi_c_series(va: Trajectory, g0: SpectralField, params: ModelParams) -> np.ndarray:
    nodes = va.mesh.nodes
    integrand = np.empty((va.mesh.K,) + va.grid.shape)
    for k, t in enumerate(nodes):
        difference = hartree_potential(va.state(k), params).values.real - g0.values.real
        integrand[k] = _low_part(difference, va.grid, t)
    return -weighted_tail_integral(integrand, nodes, params.gamma - 2.0)


def _phi_c_double_series(va: Trajectory, s0_nodes, params: ModelParams) -> np.ndarray:
    """phi_c through |v_a|^2 - |v_0|^2 = int_{t_1}^t div(s_0 |v_a|^2)"""
    grid = va.grid
    nodes = va.mesh.nodes
    rate = np.empty((va.mesh.K,) + grid.shape)
    for k in range(va.mesh.K):
        density = va.state(k).abs2()
        rate[k] = divergence(s0_nodes(k) * density).values.real
    density_change = cumulative_integral(rate, nodes, include_origin=False)

    integrand = np.empty_like(rate)
    for k, t in enumerate(nodes):
        potential = interaction_potential(density_change[k], grid, params).values.real
        integrand[k] = _low_part(potential, grid, t)
    return -weighted_tail_integral(integrand, nodes, params.gamma - 2.0)


def compute_sc(t: float, mesh: GradedMesh, va_traj: Trajectory, v0: SpectralField,
               params: ModelParams, form: str = "direct") -> VectorField:
    """s_c(t) from v_a; form "double" integrates the mass flux of v_a instead"""
    _check_time(t)
    if va_traj.mesh != mesh:
        raise ShapeError("v_a trajectory does not live on the given mesh")
    k = mesh.index_of(t)
    if form == "direct":
        series = _phi_c_series(va_traj, hartree_potential(v0, params), params)
    elif form == "double":
        phi0 = _phi0_table(v0, mesh, params)
        series = _phi_c_double_series(
            va_traj, lambda j: _real_gradient(phi0[j], v0.grid), params)
    else:
        raise ValueError(f"unknown s_c form: {form}")
    return _real_gradient(series[k], v0.grid)


def _phi0_table(v0: SpectralField, mesh: GradedMesh, params: ModelParams) -> np.ndarray:
    grid = v0.grid
    k_values, inverse = np.unique(grid.k_norm, return_inverse=True)
    weights = _phi0_weights(mesh.nodes, k_values, params.gamma)
    coefficients = hartree_potential(v0, params).coefficients
    table = np.empty((mesh.K,) + grid.shape)
    for j in range(mesh.K):
        multiplier = weights[j][inverse].reshape(grid.shape)
        table[j] = SpectralField.from_coefficients(grid, -multiplier * coefficients).values.real
    return table


def _midpoint_phi0(v0: SpectralField, mesh: GradedMesh, params: ModelParams) -> np.ndarray:
    """phi_0 at interval midpoints, one product-rule piece added to the node value"""
    grid = v0.grid
    nodes = mesh.nodes
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    k_values, inverse = np.unique(grid.k_norm, return_inverse=True)
    node_weights = _phi0_weights(nodes, k_values, params.gamma)

    A, B = interval_weights(mids, nodes[1:], params.gamma - 2.0)
    chi_mid = chi_profile(np.sqrt(mids)[:, None] * k_values[None, :])
    chi_right = chi_profile(np.sqrt(nodes[1:])[:, None] * k_values[None, :])
    mid_weights = node_weights[1:] + A[:, None] * chi_mid + B[:, None] * chi_right

    coefficients = hartree_potential(v0, params).coefficients
    table = np.empty((mids.size,) + grid.shape)
    for j in range(mids.size):
        multiplier = mid_weights[j][inverse].reshape(grid.shape)
        table[j] = SpectralField.from_coefficients(grid, -multiplier * coefficients).values.real
    return table


@dataclass(eq=False)
class AsymptoticProfile:
    """Phase parts and amplitude of the level-m approximation on a T = 1 mesh"""
    level: int
    params: ModelParams
    mesh: GradedMesh
    v0: SpectralField
    va: Trajectory
    phi_0: np.ndarray
    phi_b: np.ndarray
    phi_c: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    interpolated_lookups: int = 0

    def __post_init__(self):
        expected = (self.mesh.K,) + self.grid.shape
        for name in ("phi_0", "phi_b", "phi_c"):
            part = getattr(self, name)
            if part.shape != expected:
                raise ShapeError(f"{name} has shape {part.shape}, expected {expected}")
            part.setflags(write=False)

    @property
    def grid(self) -> GridSpec:
        return self.v0.grid

    @property
    def times(self) -> np.ndarray:
        return self.mesh.nodes

    def phi_part(self, name: str, k: int) -> SpectralField:
        return SpectralField(self.grid, getattr(self, name)[k])

    def phi(self, k: int) -> SpectralField:
        return SpectralField(self.grid, self.phi_0[k] + self.phi_b[k] + self.phi_c[k])

    def s0(self, k: int) -> VectorField:
        return _real_gradient(self.phi_0[k], self.grid)

    def sb(self, k: int) -> VectorField:
        return _real_gradient(self.phi_b[k], self.grid)

    def sc(self, k: int) -> VectorField:
        return _real_gradient(self.phi_c[k], self.grid)

    def s(self, k: int) -> VectorField:
        return _real_gradient(self.phi_0[k] + self.phi_b[k] + self.phi_c[k], self.grid)

    def _bracket(self, t: float) -> Tuple[int, float]:
        """Left node index and log-t weight of t"""
        nodes = self.mesh.nodes
        if t < nodes[0] * (1 - 1e-12) or t > nodes[-1] * (1 + 1e-12):
            raise InterpolationError(f"t={t:g} outside profile range [{nodes[0]:g}, {nodes[-1]:g}]")
        j = int(np.searchsorted(nodes, t))
        if j < len(nodes) and math.isclose(nodes[j], t, rel_tol=1e-12):
            return j, 0.0
        j = min(max(j, 1), len(nodes) - 1)
        self.interpolated_lookups += 1
        return j - 1, math.log(t / nodes[j - 1]) / math.log(nodes[j] / nodes[j - 1])

    def _interp(self, array: np.ndarray, t: float) -> np.ndarray:
        j, w = self._bracket(t)
        if w == 0.0:
            return array[j]
        return (1 - w) * array[j] + w * array[j + 1]

    def fields_at(self, t: float) -> Tuple[SpectralField, VectorField, VectorField]:
        """(v_a, s, s_0) at t, linear in log t between nodes"""
        phi_0 = self._interp(self.phi_0, t)
        total = phi_0 + self._interp(self.phi_b, t) + self._interp(self.phi_c, t)
        va = SpectralField(self.grid, self._interp(self.va.states, t))
        return va, _real_gradient(total, self.grid), _real_gradient(phi_0, self.grid)

    def s0_squared_series(self) -> np.ndarray:
        return np.stack([self.s0(k).squared_modulus().values.real for k in range(self.mesh.K)])


def solve_transport_va(v0: SpectralField, mesh: GradedMesh, params: ModelParams,
                       midpoint_phi0: Optional[np.ndarray] = None, tol: float = 1e-13,
                       show_progress: bool = False) -> Trajectory:
    """v_a from v_a(t_1) = v_0 by implicit midpoint steps with s_0 frozen at the half step"""
    grid = v0.grid
    if params.kappa == 0:
        return Trajectory.constant(mesh, v0, label="v_a")
    if midpoint_phi0 is None:
        midpoint_phi0 = _midpoint_phi0(v0, mesh, params)

    a0 = hs_norm(v0, params.rho)
    limit = BLOWUP_FACTOR * max(a0, 1e-300)
    nodes = mesh.nodes
    states = np.empty((mesh.K,) + grid.shape, dtype=np.complex128)
    states[0] = v0.values
    current = v0
    sweeps = 0

    for k in tqdm(range(mesh.K - 1), desc="transport v_a", disable=not show_progress, leave=False):
        s_mid = _real_gradient(midpoint_phi0[k], grid)
        current, used = implicit_midpoint_step(
            lambda w: transport_apply(s_mid, w), current, nodes[k + 1] - nodes[k], tol=tol)
        sweeps += used
        norm = hs_norm(current, params.rho)
        if not np.isfinite(norm) or norm > limit:
            raise DivergenceError(f"v_a blew up at t={nodes[k + 1]:.3g}: H^rho norm {norm:.3g} > {limit:.3g}")
        states[k + 1] = current.values

    logger.debug(f"Transport solved over {mesh.K - 1} steps, {sweeps} implicit sweeps")
    return Trajectory(mesh, grid, states, label="v_a")


def iterate_approximation(m: int, v0: SpectralField, mesh: GradedMesh, params: ModelParams,
                          show_progress: bool = False) -> AsymptoticProfile:
    """Level m in {0, 1} of the successive approximation"""
    if m not in SUPPORTED_LEVELS:
        raise UnsupportedLevelError(f"approximation level {m} is not supported (use 0 or 1)")
    if not math.isclose(mesh.T, 1.0):
        raise DomainError(f"the profile needs a mesh ending at T = 1 (got T={mesh.T:g})")

    grid = v0.grid
    logger.info(f"Building level-{m} profile on {grid.shape} grid, K={mesh.K}, p={mesh.p:g}")
    phi_0 = _phi0_table(v0, mesh, params)
    zeros = np.zeros_like(phi_0)

    if m == 0 or params.kappa == 0:
        va = Trajectory.constant(mesh, v0, label="v_a")
        profile = AsymptoticProfile(m, params, mesh, v0, va, phi_0, zeros, zeros.copy())
        profile.diagnostics = profile_diagnostics(profile)
        return profile

    va = solve_transport_va(v0, mesh, params, show_progress=show_progress)
    s0_squared = np.stack([_real_gradient(phi_0[k], grid).squared_modulus().values.real
                           for k in range(mesh.K)])
    phi_b = -0.5 * tail_integral(s0_squared, mesh.nodes)
    phi_c = _phi_c_series(va, hartree_potential(v0, params), params)

    profile = AsymptoticProfile(m, params, mesh, v0, va, phi_0, phi_b, phi_c)
    profile.diagnostics = profile_diagnostics(profile)
    return profile


def compute_phase(t: float, mesh: GradedMesh, profile: AsymptoticProfile) -> Tuple[SpectralField, Dict[str, SpectralField]]:
    """phi(t) and its parts {phi_0, phi_b, phi_c}"""
    _check_time(t)
    if mesh != profile.mesh:
        raise ShapeError("mesh does not match the profile mesh")
    k = mesh.index_of(t)
    parts = {name: profile.phi_part(name, k) for name in ("phi_0", "phi_b", "phi_c")}
    return profile.phi(k), parts


def profile_diagnostics(profile: AsymptoticProfile) -> Dict[str, Any]:
    """Initial-condition error scale, mass drift, a_a and quadrature estimates"""
    params = profile.params
    mesh = profile.mesh
    lambda_1 = params.exponents.lambda_(1)
    a0 = hs_norm(profile.v0, params.rho)
    l2 = profile.va.l2_series()
    a_a = float(max(hs_norm(u, params.rho) for u in profile.va.fields()))
    mass_drift = float(np.max(np.abs(l2 ** 2 / max(l2[0] ** 2, 1e-300) - 1.0)))

    required = 0.0
    if a0 > 0 and a_a > a0:
        required = math.log(a_a / a0) / (a0 ** 2 * mesh.T ** lambda_1)

    diagnostics = {
        "level": profile.level,
        "t_1": mesh.first,
        "initial_condition_error_scale": mesh.first ** lambda_1 if lambda_1 > 0 else None,
        "a0": a0,
        "a_a": a_a,
        "va_mass_drift": mass_drift,
        "va_growth_constant": required,
        "phi0_richardson": phi0_richardson(profile),
    }
    return diagnostics


def phi0_richardson(profile: AsymptoticProfile) -> float:
    """Relative error estimate of phi_0 from the half-resolution quadrature"""
    mesh = profile.mesh
    if mesh.K < 4:
        return float("nan")
    coarse_mesh = mesh.coarsened()
    coarse = _phi0_table(profile.v0, coarse_mesh, profile.params)
    scale = max(float(np.max(np.abs(profile.phi_0))), 1e-300)
    return richardson_estimate(profile.phi_0[: 2 * coarse_mesh.K], coarse) / scale


def remainder_norm_series(profile: AsymptoticProfile, alpha: float = 0.0,
                          pm_epsilon: float = 0.05) -> np.ndarray:
    """||omega^(alpha + n/2 ±0) (s - s_0)(t)|| per node"""
    spec = NormSpec(alpha + profile.grid.n / 2.0, pm=True, pm_epsilon=pm_epsilon)
    return np.array([
        sobolev_norm(_real_gradient(profile.phi_b[k] + profile.phi_c[k], profile.grid), spec)
        for k in range(profile.mesh.K)
    ])


def mass_drift_series(profile: AsymptoticProfile) -> np.ndarray:
    l2 = profile.va.l2_series()
    return l2 ** 2 / max(l2[0] ** 2, 1e-300) - 1.0


__all__ = [
    'SUPPORTED_LEVELS', 'AsymptoticProfile', 'transport_apply', 'compute_s0', 'compute_phi0',
    'compute_sb', 'compute_sc', 'compute_phase', 'solve_transport_va', 'iterate_approximation',
    'profile_diagnostics', 'phi0_richardson', 'remainder_norm_series', 'mass_drift_series',
]
