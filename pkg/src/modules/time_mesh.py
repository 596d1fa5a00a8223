"""
Graded Time Mesh
================

Time nodes clustered at t = 0, trajectories of fields over those nodes and
the quadrature rules used for every time integral of the lab.

Transport steps use the implicit midpoint rule w = v + dt A((v + w)/2), not
the explicit midpoint rule. For skew-adjoint A this is the Cayley map
(1 - dt A/2)^(-1)(1 + dt A/2), which is unitary, so L2 norms are conserved
up to the fixed point tolerance, and the step with -dt is its exact inverse.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np
from scipy import integrate

from ..core.errors import (
    DomainError, InterpolationError, InvalidFieldError, ParameterError, ShapeError, StabilityError,
)
from .grid_spectral import GridSpec, NormSpec, SpectralField, sobolev_norm


@dataclass(frozen=True)
class GradedMesh:
    """Nodes t_k = T (k/K)^p for k = 1..K"""
    T: float = 1.0
    K: int = 512
    p: float = 6.0

    def __post_init__(self):
        violations = []
        if not (0.0 < self.T <= 1.0):
            violations.append(f"T must satisfy 0 < T <= 1 (got {self.T})")
        if self.K < 2:
            violations.append(f"K must be at least 2 (got {self.K})")
        if self.p < 1:
            violations.append(f"grading power p must be at least 1 (got {self.p})")
        if violations:
            raise ParameterError(violations)

    @classmethod
    def default_power(cls, lambda_1: float, cap: float = 6.0) -> float:
        """ceil(1/lambda_1) capped"""
        if lambda_1 <= 0:
            return cap
        return float(min(math.ceil(1.0 / lambda_1), cap))

    @cached_property
    def nodes(self) -> np.ndarray:
        k = np.arange(1, self.K + 1, dtype=float)
        nodes = self.T * (k / self.K) ** self.p
        nodes[-1] = self.T
        nodes.setflags(write=False)
        return nodes

    @property
    def first(self) -> float:
        return float(self.nodes[0])

    def index_of(self, t: float, rtol: float = 1e-10) -> int:
        """Index of the node equal to t"""
        j = int(np.argmin(np.abs(self.nodes - t)))
        if not math.isclose(self.nodes[j], t, rel_tol=rtol):
            raise InterpolationError(f"t={t:g} is not a mesh node")
        return j

    def count_up_to(self, t: float) -> int:
        """Number of nodes <= t"""
        return int(np.searchsorted(self.nodes, t * (1 + 1e-12), side="right"))

    def truncated(self, T: float) -> "GradedMesh":
        """Node-identical prefix ending at the last node <= T"""
        k_T = self.count_up_to(T)
        if k_T < 2:
            raise DomainError(f"T={T:g} keeps fewer than two nodes of {self}")
        return GradedMesh(self.T * (k_T / self.K) ** self.p, k_T, self.p)

    def refined(self) -> "GradedMesh":
        return GradedMesh(self.T, 2 * self.K, self.p)

    def coarsened(self) -> "GradedMesh":
        return GradedMesh(self.T, self.K // 2, self.p)

    def is_prefix_of(self, other: "GradedMesh") -> bool:
        if self.K > other.K:
            return False
        return bool(np.allclose(self.nodes, other.nodes[:self.K], rtol=1e-10, atol=0.0))


@dataclass(eq=False)
class Trajectory:
    """Field states on every node of a GradedMesh"""
    mesh: GradedMesh
    grid: GridSpec
    states: np.ndarray
    label: str = ""
    norms_cache: Dict[NormSpec, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.complex128)
        expected = (self.mesh.K,) + self.grid.shape
        if states.shape != expected:
            raise ShapeError(f"trajectory states {states.shape} do not match {expected}")
        if not np.all(np.isfinite(states)):
            raise InvalidFieldError(f"trajectory '{self.label}' contains non-finite values")
        if states.flags.writeable:
            states = states.copy() if states is self.states else states
            states.setflags(write=False)
        self.states = states

    @classmethod
    def from_fields(cls, mesh: GradedMesh, fields, label: str = "") -> "Trajectory":
        fields = list(fields)
        if not fields:
            raise ShapeError("trajectory needs at least one state")
        grid = fields[0].grid
        return cls(mesh, grid, np.stack([f.values for f in fields]), label)

    @classmethod
    def constant(cls, mesh: GradedMesh, value: SpectralField, label: str = "") -> "Trajectory":
        states = np.broadcast_to(value.values, (mesh.K,) + value.grid.shape).copy()
        return cls(mesh, value.grid, states, label)

    @property
    def times(self) -> np.ndarray:
        return self.mesh.nodes

    def __len__(self) -> int:
        return self.mesh.K

    def state(self, k: int) -> SpectralField:
        return SpectralField(self.grid, self.states[k])

    def fields(self) -> Iterator[SpectralField]:
        for k in range(self.mesh.K):
            yield self.state(k)

    def at(self, t: float) -> SpectralField:
        """State at t, linear in log t between nodes"""
        nodes = self.mesh.nodes
        if t < nodes[0] * (1 - 1e-12) or t > nodes[-1] * (1 + 1e-12):
            raise InterpolationError(
                f"t={t:g} outside stored range [{nodes[0]:g}, {nodes[-1]:g}] of '{self.label}'")
        j = int(np.searchsorted(nodes, t))
        if j < len(nodes) and math.isclose(nodes[j], t, rel_tol=1e-12):
            return self.state(j)
        if j > 0 and math.isclose(nodes[j - 1], t, rel_tol=1e-12):
            return self.state(j - 1)
        j = min(max(j, 1), len(nodes) - 1)
        w = math.log(t / nodes[j - 1]) / math.log(nodes[j] / nodes[j - 1])
        return SpectralField(self.grid, (1 - w) * self.states[j - 1] + w * self.states[j])

    def norm_series(self, spec: NormSpec) -> np.ndarray:
        if spec not in self.norms_cache:
            series = np.array([sobolev_norm(u, spec) for u in self.fields()])
            series.setflags(write=False)
            self.norms_cache[spec] = series
        return self.norms_cache[spec]

    def l2_series(self) -> np.ndarray:
        return np.sqrt(self.grid.cell_volume * np.sum(np.abs(self.states) ** 2,
                                                      axis=tuple(range(1, self.states.ndim))))

    def sup_norm(self, spec: NormSpec) -> float:
        return float(np.max(self.norm_series(spec)))

    def _check(self, other: "Trajectory"):
        if other.grid != self.grid or other.mesh != self.mesh:
            raise ShapeError(f"trajectories '{self.label}' and '{other.label}' use different meshes or grids")

    def difference(self, other: "Trajectory", label: Optional[str] = None) -> "Trajectory":
        self._check(other)
        return Trajectory(self.mesh, self.grid, self.states - other.states,
                          label or f"{self.label}-{other.label}")

    def restricted(self, mesh: GradedMesh) -> "Trajectory":
        """Prefix of the trajectory on a truncated mesh"""
        if not mesh.is_prefix_of(self.mesh):
            raise ShapeError(f"{mesh} is not a prefix of {self.mesh}")
        return Trajectory(mesh, self.grid, self.states[:mesh.K], self.label)


def cumulative_integral(values: np.ndarray, nodes: np.ndarray, include_origin: bool = True) -> np.ndarray:
    """I_k = integral of f from 0 (or t_1) to t_k, trapezoid along axis 0

    The piece [0, t_1] uses the value at t_1.
    """
    result = integrate.cumulative_trapezoid(values, nodes, axis=0, initial=0)
    if include_origin:
        result = result + nodes[0] * values[0]
    return result


def tail_integral(values: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """I_k = integral of f from t_k to t_K, trapezoid along axis 0"""
    full = integrate.cumulative_trapezoid(values, nodes, axis=0, initial=0)
    return full[-1] - full


def _power_moments(a: np.ndarray, b: np.ndarray, beta: float):
    def antiderivative(t, power):
        if math.isclose(power, -1.0, abs_tol=1e-14):
            return np.log(t)
        return t ** (power + 1.0) / (power + 1.0)
    m0 = antiderivative(b, beta) - antiderivative(a, beta)
    m1 = antiderivative(b, beta + 1.0) - antiderivative(a, beta + 1.0)
    return m0, m1


def interval_weights(a: np.ndarray, b: np.ndarray, beta: float):
    """Weights (A, B) with integral over [a, b] of t^beta f = A f(a) + B f(b) for linear f"""
    m0, m1 = _power_moments(a, b, beta)
    width = b - a
    return (b * m0 - m1) / width, (m1 - a * m0) / width


def product_weights(nodes: np.ndarray, beta: float):
    """Per-interval weights of the product trapezoid on consecutive nodes"""
    return interval_weights(nodes[:-1], nodes[1:], beta)


def weighted_tail_integral(values: np.ndarray, nodes: np.ndarray, beta: float) -> np.ndarray:
    """I_k = integral of t^beta f from t_k to t_K, exact in the weight"""
    A, B = product_weights(nodes, beta)
    shape = (-1,) + (1,) * (values.ndim - 1)
    pieces = A.reshape(shape) * values[:-1] + B.reshape(shape) * values[1:]
    tail = np.zeros_like(values, dtype=np.result_type(values, float))
    tail[:-1] = np.cumsum(pieces[::-1], axis=0)[::-1]
    return tail


def implicit_midpoint_step(apply: Callable[[SpectralField], SpectralField], v: SpectralField,
                           dt: float, tol: float = 1e-13, max_iter: int = 60) -> Tuple[SpectralField, int]:
    """w = v + dt A((v + w)/2) by fixed point iteration; returns (w, iterations)

    For skew-adjoint A this is the Cayley map, so the L2 norm is preserved.
    """
    scale = max(v.l2_norm(), 1e-300)
    w = v + apply(v) * dt
    for iteration in range(1, max_iter + 1):
        update = v + apply((v + w) * 0.5) * dt
        change = (update - w).l2_norm() / scale
        w = update
        if change < tol:
            return w, iteration
    raise StabilityError(f"implicit midpoint iteration did not converge in {max_iter} sweeps (dt={dt:.3g})")


def richardson_estimate(fine: np.ndarray, coarse: np.ndarray, order: int = 2) -> float:
    """Error estimate of a node-aligned integral from its half-resolution counterpart

    fine is sampled on K nodes, coarse on the K/2 nodes of the coarsened mesh.
    """
    aligned = fine[1::2]
    if aligned.shape != coarse.shape:
        raise ShapeError(f"cannot align {fine.shape} with {coarse.shape}")
    return float(np.max(np.abs(aligned - coarse)) / (2 ** order - 1))


__all__ = [
    'GradedMesh', 'Trajectory', 'cumulative_integral', 'tail_integral', 'interval_weights', 'product_weights',
    'weighted_tail_integral', 'implicit_midpoint_step', 'richardson_estimate',
]
