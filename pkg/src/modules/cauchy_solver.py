"""
Cauchy Solver
=============

Linearized flow i d_t v' = L(v) v' on (0, T] and the fixed point v = Gamma(v)
of the nonlinear equation.

    L(v) = -(1/2)Lap + i s.grad + (i/2) div s + V
    V    = t^(gamma-2) g_S(v) + t^(gamma-2)(g_L(v) - g_L(v_a)) + (1/2)(|s|^2 - |s_0|^2)

Time stepping is Strang splitting: exact kinetic half steps in Fourier space,
exact potential half steps in real space and an implicit midpoint (Cayley) step for
the skew transport part. Every piece is unitary and reversible.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
from tqdm import tqdm

from ..core.errors import ContractionError, DomainError, ParameterError, ShapeError, StabilityError
from ..core.logger import logger
from .asymptotics import AsymptoticProfile, transport_apply
from .grid_spectral import (
    NormSpec, SpectralField, VectorField, cutoff_low, dealias, divergence, fourier_multiply,
    gradient, hs_norm,
)
from .hartree_core import ModelParams, hartree_potential, split_field
from .time_mesh import Trajectory, implicit_midpoint_step

# Contraction ratios of the Gamma iteration must stay strictly below this
CONTRACTION_LIMIT = 0.5


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the linearized and fixed point solves"""
    T: float = 1.0
    fixed_point_tol: float = 1e-8
    max_iterations: int = 10
    rho_prime: float = 0.95
    drift_tol: float = 1e-5
    max_step_halvings: int = 4
    implicit_tol: float = 1e-13
    implicit_max_iter: int = 60

    @classmethod
    def from_section(cls, section, rho_prime: float, T: float) -> "SolverConfig":
        return cls(
            T=T, fixed_point_tol=section.fixed_point_tol, max_iterations=section.max_iterations,
            rho_prime=rho_prime, drift_tol=section.drift_tol,
            max_step_halvings=section.max_step_halvings, implicit_tol=section.implicit_tol,
            implicit_max_iter=section.implicit_max_iter,
        )


def _potential_terms(v: SpectralField, va: SpectralField, s: VectorField, s0: VectorField,
                     t: float, params: ModelParams) -> Dict[str, SpectralField]:
    """The three multiplication terms of L(v), real fields"""
    weight = t ** (params.gamma - 2.0)
    g_low, g_short = split_field(hartree_potential(v, params), t)
    g_low_a = cutoff_low(hartree_potential(va, params), t)
    return {
        "short_range": g_short * weight,
        "long_range_difference": (g_low - g_low_a) * weight,
        "phase_difference": (s.squared_modulus() - s0.squared_modulus()) * 0.5,
    }


def potential(v: SpectralField, va: SpectralField, s: VectorField, s0: VectorField,
              t: float, params: ModelParams) -> SpectralField:
    terms = _potential_terms(v, va, s, s0, t, params)
    return sum(terms.values(), SpectralField.zeros(v.grid)).real_part()


def L_terms(v_state: SpectralField, vprime_state: SpectralField, profile: AsymptoticProfile,
            t: float, params: ModelParams) -> Dict[str, SpectralField]:
    """Every term of L(v) v' separately"""
    if not t > 0:
        raise DomainError(f"time must be positive (got {t})")
    va, s, s0 = profile.fields_at(t)
    w = dealias(vprime_state)
    terms = {
        "kinetic": fourier_multiply(w, 0.5 * w.grid.k_squared),
        "advection": dealias(s.dot(gradient(w)) * 1j),
        "compression": dealias(divergence(s) * w * 0.5j),
    }
    for name, term in _potential_terms(v_state, va, s, s0, t, params).items():
        terms[name] = dealias(term * w)
    return terms


def apply_L(v_state: SpectralField, vprime_state: SpectralField, profile: AsymptoticProfile,
            t: float, params: ModelParams) -> SpectralField:
    """L(v) v'"""
    terms = L_terms(v_state, vprime_state, profile, t, params)
    return sum(terms.values(), SpectralField.zeros(vprime_state.grid))


def _kinetic_half_step(w: SpectralField, dt: float) -> SpectralField:
    return fourier_multiply(w, np.exp(-0.25j * dt * w.grid.k_squared))


@dataclass
class LinearizedRun:
    """Output of one linearized solve"""
    trajectory: Trajectory
    l2_drift: float
    substeps: int
    rejected_steps: int


def _strang_step(w: SpectralField, v_traj: Trajectory, profile: AsymptoticProfile, t_start: float,
                 dt: float, params: ModelParams, config: SolverConfig) -> SpectralField:
    t_mid = t_start + 0.5 * dt
    va, s, s0 = profile.fields_at(t_mid)
    phase = np.exp(-0.5j * dt * potential(v_traj.at(t_mid), va, s, s0, t_mid, params).values.real)

    w = _kinetic_half_step(w, dt)
    w = w * phase
    w, _ = implicit_midpoint_step(lambda x: transport_apply(s, x), w, dt,
                                  tol=config.implicit_tol, max_iter=config.implicit_max_iter)
    w = w * phase
    return _kinetic_half_step(w, dt)


def _advance(w: SpectralField, v_traj: Trajectory, profile: AsymptoticProfile, t_from: float,
             t_to: float, params: ModelParams, config: SolverConfig, reference: float) -> Tuple[SpectralField, int, int]:
    """Advance across one mesh interval, halving the step while the L2 drift is too large"""
    rejected = 0
    for halvings in range(config.max_step_halvings + 1):
        substeps = 2 ** halvings
        dt = (t_to - t_from) / substeps
        try:
            state = w
            for j in range(substeps):
                state = _strang_step(state, v_traj, profile, t_from + j * dt, dt, params, config)
        except StabilityError:
            rejected += 1
            continue
        drift = abs(state.l2_norm() - reference) / max(reference, 1e-300)
        if drift <= config.drift_tol:
            return state, substeps, rejected
        rejected += 1
        logger.debug(f"Step {t_from:.3g} -> {t_to:.3g} rejected: drift {drift:.3g}, halving")
    raise StabilityError(
        f"L2 drift above {config.drift_tol:g} between t={t_from:.3g} and t={t_to:.3g} "
        f"after {config.max_step_halvings} halvings")


def solve_linearized(v_traj: Trajectory, vprime_0: SpectralField, t0: float, config: SolverConfig,
                     profile: AsymptoticProfile, params: ModelParams,
                     show_progress: bool = False) -> LinearizedRun:
    """Propagate v' from t0 across the mesh of v_traj in both directions"""
    mesh = v_traj.mesh
    if vprime_0.grid != v_traj.grid:
        raise ShapeError("v'_0 and the driving trajectory live on different grids")
    if not mesh.is_prefix_of(profile.mesh):
        raise ShapeError("driving trajectory mesh is not a prefix of the profile mesh")
    start = mesh.index_of(t0)
    nodes = mesh.nodes
    reference = vprime_0.l2_norm()

    states = np.empty((mesh.K,) + v_traj.grid.shape, dtype=np.complex128)
    states[start] = vprime_0.values
    substeps = rejected = 0

    forward = range(start, mesh.K - 1)
    backward = range(start, 0, -1)
    with tqdm(total=mesh.K - 1, desc="linearized", disable=not show_progress, leave=False) as bar:
        w = vprime_0
        for k in forward:
            w, used, bad = _advance(w, v_traj, profile, nodes[k], nodes[k + 1], params, config, reference)
            states[k + 1] = w.values
            substeps, rejected = substeps + used, rejected + bad
            bar.update(1)
        w = vprime_0
        for k in backward:
            w, used, bad = _advance(w, v_traj, profile, nodes[k], nodes[k - 1], params, config, reference)
            states[k - 1] = w.values
            substeps, rejected = substeps + used, rejected + bad
            bar.update(1)

    trajectory = Trajectory(mesh, v_traj.grid, states, label="v'")
    l2 = trajectory.l2_series()
    drift = float(np.max(np.abs(l2 - reference)) / max(reference, 1e-300))
    trajectory.norm_series(NormSpec(config.rho_prime))
    return LinearizedRun(trajectory, drift, substeps, rejected)


def sup_distance(a: Trajectory, b: Trajectory, sigma: float) -> float:
    """sup_t ||a(t) - b(t); H^sigma||"""
    return float(max(hs_norm(u, sigma) for u in a.difference(b).fields()))


@dataclass
class FixedPointResult:
    """Converged fixed point with iteration diagnostics"""
    trajectory: Trajectory
    previous: Trajectory
    driver_of_previous: Trajectory
    T: float
    iterations: int
    converged: bool
    distances: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    l2_drifts: List[float] = field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        return {
            "T": self.T,
            "iterations": self.iterations,
            "converged": self.converged,
            "distances": self.distances,
            "contraction_ratios": self.ratios,
            "l2_drift": max(self.l2_drifts) if self.l2_drifts else 0.0,
        }


def solve_nonlinear_fixed_point(v0: SpectralField, config: SolverConfig, profile: AsymptoticProfile,
                                params: ModelParams, show_progress: bool = False) -> FixedPointResult:
    """Iterate v -> Gamma(v) from the constant trajectory v0"""
    mesh = profile.mesh.truncated(config.T)
    current = Trajectory.constant(mesh, v0, label="v(0)")
    before = current
    distances: List[float] = []
    ratios: List[float] = []
    drifts: List[float] = []
    rising = 0

    for iteration in range(1, config.max_iterations + 1):
        run = solve_linearized(current, v0, mesh.first, config, profile, params, show_progress)
        image = run.trajectory
        drifts.append(run.l2_drift)
        distance = sup_distance(image, current, params.rho)
        distances.append(distance)
        if len(distances) > 1 and distances[-2] > 0:
            ratios.append(distance / distances[-2])
            rising = rising + 1 if ratios[-1] > 1.0 else 0
        logger.log_run_record("fixed_point", iteration=iteration, distance=distance,
                              ratio=ratios[-1] if ratios else None, l2_drift=run.l2_drift)

        if params.kappa == 0 or distance < config.fixed_point_tol:
            return FixedPointResult(image, current, before, mesh.T, iteration, True,
                                    distances, ratios, drifts)
        if rising >= 2:
            raise ContractionError(
                f"Gamma is not contracting on (0, {mesh.T:.3g}]; choose a smaller T", ratios)
        before, current = current, Trajectory(image.mesh, image.grid, image.states, label=f"v({iteration})")

    raise ContractionError(f"no convergence within {config.max_iterations} iterations", ratios)


def gronwall_envelope(t: float, a: float, a1: float, params: ModelParams, constant: float) -> float:
    """E(t) = exp{C a^2 (1 + a^2)(1 + a1^2)^2 t^(2 gamma + lambda_1 - 1)}"""
    exponent = params.exponents.integrability_exponent
    if t <= 0:
        return 1.0
    return math.exp(constant * a ** 2 * (1 + a ** 2) * (1 + a1 ** 2) ** 2 * t ** exponent)


def _pairwise(times: np.ndarray):
    i, j = np.triu_indices(times.size, k=1)
    return i, j, times[j] - times[i]


def calibrate_gronwall_constant(trajectory: Trajectory, a: float, a1: float, params: ModelParams,
                                rho_prime: float) -> float:
    """Smallest C with ||omega^rho' v'(t)|| <= ||omega^rho' v'(t1)|| E(|t - t1|) for all node pairs"""
    norms = trajectory.norm_series(NormSpec(rho_prime))
    if np.any(norms <= 0):
        return 0.0
    logs = np.log(norms)
    i, j, gaps = _pairwise(trajectory.times)
    scale = a ** 2 * (1 + a ** 2) * (1 + a1 ** 2) ** 2 * gaps ** params.exponents.integrability_exponent
    growth = logs[j] - logs[i]
    valid = scale > 0
    if not np.any(valid):
        return 0.0
    return float(max(0.0, np.max(growth[valid] / scale[valid])))


def calibrate_holder_constant(trajectory: Trajectory, a: float, a1: float, params: ModelParams,
                              rho_prime: float) -> float:
    """Smallest C with ||v(t) - v(t1)|| <= C |t - t1|^h (1+a^2)^2 (1+a1^2)^2 ||v(t1); H^rho'||"""
    exponent = params.exponents.holder_exponent(rho_prime)
    base = trajectory.state(0)
    data_norm = hs_norm(base, rho_prime)
    if data_norm == 0:
        return 0.0
    gaps = trajectory.times[1:] - trajectory.times[0]
    moduli = np.array([(trajectory.state(k) - base).l2_norm() for k in range(1, len(trajectory))])
    scale = gaps ** exponent * (1 + a ** 2) ** 2 * (1 + a1 ** 2) ** 2 * data_norm
    return float(np.max(moduli / scale))


def select_final_time(constant: float, R: float, params: ModelParams) -> float:
    """Solve C R^2 (1 + R^2)^3 T^(2 gamma + lambda_1 - 1) = 1, capped at 1"""
    product = constant * R ** 2 * (1 + R ** 2) ** 3
    if product <= 0:
        return 1.0
    return float(min(1.0, product ** (-1.0 / params.exponents.integrability_exponent)))


def calibrate_smallness_constant(v0: SpectralField, profile: AsymptoticProfile, params: ModelParams,
                                 config: SolverConfig, pilot_T: float = 1.0, target_ratio: float = 0.25) -> float:
    """Constant of the T selection from the worst contraction ratio of a pilot Gamma iteration

    The selected T puts that ratio at target_ratio, below the 1/2 acceptance limit.
    """
    if not 0.0 < target_ratio < CONTRACTION_LIMIT:
        raise ParameterError([f"target_ratio must lie in (0, {CONTRACTION_LIMIT}) (got {target_ratio})"])
    if params.kappa == 0:
        return 0.0
    mesh = profile.mesh.truncated(pilot_T)
    iterate = Trajectory.constant(mesh, v0, label="pilot")
    distances = []
    for _ in range(3):
        image = solve_linearized(iterate, v0, mesh.first, config, profile, params).trajectory
        distances.append(sup_distance(image, iterate, params.rho))
        iterate = image
    ratios = [b / a for a, b in zip(distances, distances[1:]) if a > 0]
    if not ratios:
        return 0.0
    ratio = max(ratios)
    R = 2.0 * hs_norm(v0, params.rho)
    constant = ratio / (target_ratio * R ** 2 * (1 + R ** 2) ** 3 * mesh.T ** params.exponents.integrability_exponent)
    logger.log_run_record("calibration", quantity="smallness", pilot_ratios=ratios, target_ratio=target_ratio,
                          constant=constant)
    return float(constant)


@dataclass
class DifferenceReport:
    """Empirical ratio of the difference estimate per node"""
    times: np.ndarray
    ratios: np.ndarray

    @property
    def supremum(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0


def difference_monitor(run1: Trajectory, run2: Trajectory, driver1: Trajectory, driver2: Trajectory,
                       params: ModelParams, rho_prime: float) -> DifferenceReport:
    """sup_(0,t] ||v'_-; H^rho'|| / (t^(2 gamma + lambda_1 - 1) sup_(0,t] ||v_-; H^rho||)"""
    run1._check(run2)
    driver1._check(driver2)
    if run1.mesh != driver1.mesh:
        raise ShapeError("linearized runs and their drivers use different meshes")
    numerator = np.maximum.accumulate([hs_norm(u, rho_prime) for u in run2.difference(run1).fields()])
    denominator = np.maximum.accumulate([hs_norm(u, params.rho) for u in driver2.difference(driver1).fields()])
    times = run1.times
    scaled = times ** params.exponents.integrability_exponent * denominator
    ratios = np.zeros_like(numerator)
    nonzero = scaled > 0
    ratios[nonzero] = numerator[nonzero] / scaled[nonzero]
    return DifferenceReport(times, ratios)


__all__ = [
    'CONTRACTION_LIMIT', 'SolverConfig', 'LinearizedRun', 'FixedPointResult', 'DifferenceReport', 'potential',
    'L_terms', 'apply_L', 'solve_linearized', 'sup_distance', 'solve_nonlinear_fixed_point', 'gronwall_envelope',
    'calibrate_gronwall_constant', 'calibrate_holder_constant', 'select_final_time',
    'calibrate_smallness_constant', 'difference_monitor',
]
