"""
Oracles
=======

Brute-force reference values the spectral machinery is measured against:
radial quadrature for the Hartree potential and its constant, direct mode
sums for Sobolev norms and the closed-form free Gaussian.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np
from scipy import integrate, special

from ..core.logger import logger
from .grid_spectral import GridSpec, NormSpec, SpectralField, chi_profile, sobolev_norm
from .hartree_core import ModelParams, hartree_potential, riesz_constant, unit_sphere_area
from .initial_data import gaussian
from .transforms import free_gaussian, free_propagate


@dataclass
class OracleResult:
    name: str
    tolerance: float
    values: Dict[str, float] = field(default_factory=dict)

    @property
    def error(self) -> float:
        return self.values.get("relative_error", self.values.get("max_error", 0.0))

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance


def radial_moment(power: float, scale: float = 1.0) -> float:
    """int_0^inf r^power exp(-scale r^2) dr, algebraic weight on [0, 1]"""
    head, _ = integrate.quad(lambda r: math.exp(-scale * r * r), 0.0, 1.0,
                             weight="alg", wvar=(power, 0.0), epsabs=1e-15, epsrel=1e-13)
    tail, _ = integrate.quad(lambda r: r ** power * math.exp(-scale * r * r), 1.0, math.inf,
                             epsabs=1e-15, epsrel=1e-13, limit=200)
    return head + tail


def hartree_origin_quadrature(gamma: float, n: int, kappa: float = 1.0) -> float:
    """kappa int |y|^(-gamma) exp(-|y|^2) dy by radial quadrature"""
    return kappa * unit_sphere_area(n) * radial_moment(n - 1.0 - gamma)


def hartree_origin_closed_form(gamma: float, n: int, kappa: float = 1.0) -> float:
    return kappa * unit_sphere_area(n) * 0.5 * special.gamma((n - gamma) / 2.0)


def hartree_oracle(params: ModelParams = None, grid: GridSpec = None) -> OracleResult:
    """g(0) for u = exp(-|x|^2 / 2) against the radial quadrature"""
    params = params or ModelParams()
    grid = grid or GridSpec(params.n, 128, 20.0)
    reference = hartree_origin_quadrature(params.gamma, params.n, params.kappa)
    u = gaussian(grid)
    potential = hartree_potential(u, params)
    origin = tuple(grid.points_per_dim // 2 for _ in range(grid.n))
    value = float(potential.values[origin].real)

    result = OracleResult("hartree", 1e-4)
    result.values.update({
        "quadrature": reference,
        "closed_form": hartree_origin_closed_form(params.gamma, params.n, params.kappa),
        "spectral": value,
        "relative_error": abs(value - reference) / abs(reference) if reference else abs(value),
    })
    return result


def riesz_constant_oracle(gamma: float = 0.45, n: int = 2) -> OracleResult:
    """Constant of |x|^(-gamma) * f = c omega^(gamma-n) f from two radial quadratures

    For f = exp(-|y|^2) the left side at 0 is the Hartree quadrature and
    omega^(gamma-n) f at 0 is (2 pi)^(-n/2) int |k|^(gamma-n) 2^(-n/2) exp(-|k|^2/4) dk.
    """
    left = hartree_origin_quadrature(gamma, n)
    radial = radial_moment(gamma - 1.0, 0.25)
    right = (2.0 * math.pi) ** (-n / 2.0) * 2.0 ** (-n / 2.0) * unit_sphere_area(n) * radial
    measured = left / right
    formula = riesz_constant(gamma, n)

    result = OracleResult("riesz_constant", 1e-8)
    result.values.update({
        "quadrature": measured,
        "formula": formula,
        "relative_error": abs(measured - formula) / abs(formula),
    })
    return result


def mode_sum_coefficients(u: SpectralField) -> np.ndarray:
    """Unitary Fourier coefficients by an explicit sum over every grid point"""
    grid = u.grid
    points = np.stack([np.broadcast_to(x, grid.shape).ravel() for x in grid.coordinates], axis=1)
    modes = np.stack([np.broadcast_to(k, grid.shape).ravel() for k in grid.wavevector], axis=1)
    phases = np.exp(-1j * modes @ points.T)
    return (phases @ u.values.ravel() / math.sqrt(u.values.size)).reshape(grid.shape)


def mode_sum_norm(u: SpectralField, sigma: float, homogeneous: bool = True) -> float:
    grid = u.grid
    coefficients = mode_sum_coefficients(u)
    total = 0.0
    for index in np.ndindex(grid.shape):
        k2 = grid.k_squared[index]
        if homogeneous:
            weight = 0.0 if k2 == 0 else k2 ** sigma
        else:
            weight = (1.0 + k2) ** sigma
        total += weight * abs(coefficients[index]) ** 2
    return math.sqrt(grid.cell_volume * total)


def mode_sum_oracle(sigma: float = 0.95, grid: GridSpec = None) -> OracleResult:
    """sobolev_norm against the mode-by-mode sum on a Gaussian sample"""
    grid = grid or GridSpec(2, 16, 8.0)
    u = gaussian(grid, width=1.0, momentum=[0.5, 0.0] if grid.n == 2 else None)
    result = OracleResult("mode_sum", 1e-12)
    for homogeneous in (True, False):
        spectral = sobolev_norm(u, NormSpec(sigma, homogeneous=homogeneous))
        direct = mode_sum_norm(u, sigma, homogeneous)
        label = "homogeneous" if homogeneous else "inhomogeneous"
        result.values[f"{label}_spectral"] = spectral
        result.values[f"{label}_direct"] = direct
        result.values[f"{label}_error"] = abs(spectral - direct) / direct
    result.values["relative_error"] = max(result.values["homogeneous_error"],
                                          result.values["inhomogeneous_error"])
    return result


def short_range_mode_oracle(u: SpectralField, t: float, params: ModelParams) -> float:
    """||g_S(u)(t)|| by per-mode multiplication with the periodic Riesz symbol"""
    grid = u.grid
    density = SpectralField(grid, np.abs(u.values) ** 2)
    coefficients = density.coefficients
    constant = params.kappa * riesz_constant(params.gamma, params.n)
    total = 0.0
    for index in np.ndindex(grid.shape):
        k = grid.k_norm[index]
        if k == 0:
            continue
        high = 1.0 - float(chi_profile(k * math.sqrt(t)))
        total += abs(high * constant * k ** (params.gamma - params.n) * coefficients[index]) ** 2
    return math.sqrt(grid.cell_volume * total)


def free_gaussian_oracle(grid: GridSpec = None, width: float = 1.0, t: float = 1.0,
                         inner_fraction: float = 0.5) -> OracleResult:
    """Spectral free flow of a Gaussian against the closed form inside the inner box"""
    grid = grid or GridSpec(2, 128, 20.0)
    momentum = [0.5] + [0.0] * (grid.n - 1)
    numeric = free_propagate(gaussian(grid, width, momentum=momentum), t)
    exact = free_gaussian(grid, width, t, momentum=momentum)
    inner = np.ones(grid.shape, dtype=bool)
    for x in grid.coordinates:
        inner = inner & (np.abs(x) <= inner_fraction * grid.box_length / 2.0)
    result = OracleResult("free_gaussian", 1e-8)
    result.values["max_error"] = float(np.max(np.abs(numeric.values - exact.values)[inner]))
    return result


ORACLES: Dict[str, Callable[[], OracleResult]] = {
    "hartree": hartree_oracle,
    "riesz_constant": riesz_constant_oracle,
    "mode_sum": mode_sum_oracle,
    "free_gaussian": free_gaussian_oracle,
}


def run_oracle(name: str) -> OracleResult:
    if name not in ORACLES:
        raise KeyError(f"unknown oracle '{name}' (choose from {', '.join(ORACLES)})")
    result = ORACLES[name]()
    logger.info(f"Oracle '{name}': error {result.error:.3g} (tolerance {result.tolerance:g})")
    return result


__all__ = [
    'OracleResult', 'ORACLES', 'run_oracle', 'hartree_oracle', 'riesz_constant_oracle', 'mode_sum_oracle',
    'free_gaussian_oracle', 'hartree_origin_quadrature', 'hartree_origin_closed_form',
    'mode_sum_coefficients', 'mode_sum_norm', 'short_range_mode_oracle',
]
