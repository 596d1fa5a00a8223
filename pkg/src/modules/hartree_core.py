"""
Hartree Nonlinearity
====================

Model parameters, decay exponents and the Hartree potential
g(u) = kappa |x|^(-gamma) * |u|^2 with its time-dependent low/high
frequency split.
"""

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import List, Tuple

import numpy as np
import scipy.fft
from scipy import special

from ..core.errors import DomainError, ParameterError
from ..core.logger import logger
from .grid_spectral import (
    GridSpec, SpectralField, cutoff_low, get_fft_workers, omega_multiplier,
)

KERNELS = ("free_space", "riesz")


def positive_part(value: float) -> float:
    return max(value, 0.0)


@dataclass(frozen=True)
class ModelParams:
    """gamma, kappa, rho, n of the Hartree model"""
    gamma: float = 0.45
    kappa: float = 1.0
    rho: float = 0.95
    n: int = 2
    plus_epsilon: float = 0.05
    kernel: str = "free_space"
    allow_unvalidated_gamma: bool = False

    def __post_init__(self):
        violations = self.violations()
        if violations:
            raise ParameterError(violations)
        if self.allow_unvalidated_gamma and not (1.0 / 3.0 < self.gamma < 0.5):
            logger.warning(f"gamma={self.gamma} outside (1/3, 1/2); results are unvalidated")

    def violations(self) -> List[str]:
        """Named admissibility violations, empty when the set is valid"""
        found = []
        if self.n < 2:
            found.append(f"n must be at least 2 (got {self.n})")
        if self.kernel not in KERNELS:
            found.append(f"kernel must be one of {', '.join(KERNELS)} (got {self.kernel!r})")
        if not 0.0 < self.plus_epsilon < 0.5:
            found.append(f"plus_epsilon must satisfy 0 < ε < 1/2 (got {self.plus_epsilon})")
        if not (0.0 < self.gamma < self.n):
            found.append(f"gamma must satisfy 0 < γ < n = {self.n} (got {self.gamma})")
            return found
        if self.allow_unvalidated_gamma:
            if not self.rho > 0:
                found.append(f"rho must be positive (got {self.rho})")
            return found

        if not (1.0 / 3.0 < self.gamma < 0.5):
            found.append(f"gamma must satisfy 1/3 < γ < 1/2 (got {self.gamma:g})")
            return found
        lower = 2.0 - 2.5 * self.gamma
        upper = self.n / 2.0
        if lower >= upper:
            found.append(
                f"window 2 − 5·gamma/2 < rho < n/2 is empty for gamma={self.gamma:g}, "
                f"n={self.n} ({lower:g} ≥ {upper:g})"
            )
            return found
        if not self.rho > lower:
            found.append(f"rho must exceed 2 − 5·gamma/2 = {lower:g} (got {self.rho:g})")
        if not self.rho < upper:
            found.append(f"rho must be below n/2 = {upper:g} (got {self.rho:g})")
        if not found and not self.exponents.integrability_exponent > 0:
            found.append(
                f"2·gamma + lambda_1 − 1 must be positive "
                f"(got {self.exponents.integrability_exponent:g})"
            )
        return found

    @property
    def validated(self) -> bool:
        return 1.0 / 3.0 < self.gamma < 0.5 and not self.allow_unvalidated_gamma

    @cached_property
    def exponents(self) -> "ExponentTable":
        return ExponentTable(self.gamma, self.rho, self.plus_epsilon)

    @property
    def fourier_kernel_constant(self) -> float:
        """Unitary Fourier symbol constant of |x|^(-gamma)"""
        return fourier_kernel_constant(self.gamma, self.n)

    @property
    def riesz_constant(self) -> float:
        """Constant c with |x|^(-gamma) * f = c omega^(gamma-n) f"""
        return riesz_constant(self.gamma, self.n)

    def with_kappa(self, kappa: float) -> "ModelParams":
        return ModelParams(self.gamma, kappa, self.rho, self.n, self.plus_epsilon,
                           self.kernel, self.allow_unvalidated_gamma)


def fourier_kernel_constant(gamma: float, n: int) -> float:
    return 2.0 ** (n / 2.0 - gamma) * special.gamma((n - gamma) / 2.0) / special.gamma(gamma / 2.0)


def riesz_constant(gamma: float, n: int) -> float:
    return (2.0 * math.pi) ** (n / 2.0) * fourier_kernel_constant(gamma, n)


@dataclass(frozen=True)
class ExponentTable:
    """Time exponents lambda_alpha, mu_j and lambda_star"""
    gamma: float
    rho: float
    plus_epsilon: float = 0.05

    def bracket_plus(self, value: float) -> float:
        """[a]_+ with [0]_+ = plus_epsilon"""
        if math.isclose(value, 0.0, abs_tol=1e-12):
            return self.plus_epsilon
        return positive_part(value)

    def lambda_(self, alpha: float) -> float:
        return self.gamma - 0.5 * self.bracket_plus(alpha + 1.0 + self.gamma - 2.0 * self.rho)

    def mu(self, j: int, sigma_prime: float) -> float:
        return self.gamma - 0.5 * positive_part(j + 1.0 + self.gamma - sigma_prime - 2.0 * self.rho)

    def lambda_star(self, sigma: float) -> float:
        return self.gamma - 0.5 * positive_part(3.0 + self.gamma - 2.0 * sigma - 2.0 * self.rho)

    @property
    def integrability_exponent(self) -> float:
        """2 gamma + lambda_1 - 1"""
        return 2.0 * self.gamma + self.lambda_(1) - 1.0

    def holder_exponent(self, rho_prime: float) -> float:
        return min(rho_prime * self.gamma, 3.0 * self.gamma - 1.0)

    def ordering_holds(self) -> bool:
        """lambda_0 + lambda_2 >= 2 lambda_0 + lambda_1 - 1"""
        return self.lambda_(0) + self.lambda_(2) >= 2.0 * self.lambda_(0) + self.lambda_(1) - 1.0 - 1e-12

    def v4_second_term_dominated(self, sigma: float) -> bool:
        """The sigma <= 1 term of the V4 pairing bound decays at least as fast as the first"""
        if sigma > 1.0:
            return True
        margin = (
            -positive_part(3.0 + self.gamma - 2.0 * sigma - 2.0 * self.rho)
            + 2.0 - 2.0 * sigma
            + positive_part(1.0 + self.gamma - 2.0 * self.rho)
        )
        return margin >= -1e-12


def exponent_lambda(alpha: float, params: ModelParams) -> float:
    return params.exponents.lambda_(alpha)


def exponent_mu(j: int, sigma_prime: float, params: ModelParams) -> float:
    return params.exponents.mu(j, sigma_prime)


def _radial_profile(n: int, kr: np.ndarray) -> np.ndarray:
    """Angular average of exp(-i k.x), normalized to 1 at kr = 0"""
    order = n / 2.0 - 1.0
    out = np.ones_like(kr)
    nonzero = kr > 0
    z = kr[nonzero]
    out[nonzero] = special.gamma(n / 2.0) * (2.0 / z) ** order * special.jv(order, z)
    return out


def unit_sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2.0) / special.gamma(n / 2.0)


@lru_cache(maxsize=8)
def truncated_kernel_transform(grid: GridSpec, gamma: float) -> np.ndarray:
    """Fourier transform of |x|^(-gamma) 1_{|x| <= L} on the doubly padded grid"""
    padded = GridSpec(grid.n, 2 * grid.points_per_dim, 2.0 * grid.box_length)
    radius = grid.box_length
    power = grid.n - 1.0 - gamma

    k_max = float(np.max(padded.k_norm))
    order = int(0.75 * k_max * radius) + 64
    nodes, weights = special.roots_jacobi(order, 0.0, power)
    r = 0.5 * radius * (1.0 + nodes)
    scale = (0.5 * radius) ** (power + 1.0) * unit_sphere_area(grid.n)

    k_values, inverse = np.unique(padded.k_norm, return_inverse=True)
    transform = np.empty_like(k_values)
    chunk = max(1, 2_000_000 // order)
    for start in range(0, k_values.size, chunk):
        k_block = k_values[start:start + chunk]
        profile = _radial_profile(grid.n, np.outer(k_block, r))
        transform[start:start + chunk] = scale * (profile @ weights)

    logger.debug(f"Kernel transform cached for {padded.shape} grid, gamma={gamma}, {order} nodes")
    result = transform[inverse].reshape(padded.shape)
    result.setflags(write=False)
    return result


def _free_space_convolution(density: np.ndarray, grid: GridSpec, gamma: float) -> np.ndarray:
    N = grid.points_per_dim
    lo, hi = N // 2, N // 2 + N
    padded = np.zeros((2 * N,) * grid.n)
    block = tuple(slice(lo, hi) for _ in range(grid.n))
    padded[block] = density
    padded = scipy.fft.ifftshift(padded)

    kernel = truncated_kernel_transform(grid, gamma)
    workers = get_fft_workers()
    result = scipy.fft.ifftn(kernel * scipy.fft.fftn(padded, workers=workers), workers=workers)
    return scipy.fft.fftshift(result)[block]


def hartree_potential(u: SpectralField, params: ModelParams) -> SpectralField:
    """g(u) = kappa |x|^(-gamma) * |u|^2, real-valued"""
    return interaction_potential(np.abs(u.values) ** 2, u.grid, params)


def interaction_potential(density: np.ndarray, grid: GridSpec, params: ModelParams) -> SpectralField:
    """kappa |x|^(-gamma) * density for a real density"""
    if params.gamma >= params.n:
        raise DomainError(f"invalid multiplier order gamma - n = {params.gamma - params.n}")
    if params.kappa == 0:
        return SpectralField.zeros(grid)

    density = np.real(density)
    if params.kernel == "riesz":
        density_field = SpectralField(grid, density)
        multiplier = params.riesz_constant * omega_multiplier(grid, params.gamma - params.n)
        values = scipy.fft.ifftn(multiplier * density_field.coefficients, norm="ortho",
                                 workers=get_fft_workers())
    else:
        values = _free_space_convolution(density, grid, params.gamma)

    values = params.kappa * values
    magnitude = float(np.max(np.abs(values)))
    residue = float(np.max(np.abs(values.imag)))
    if magnitude > 0 and residue > 1e-12 * magnitude:
        logger.debug(f"Hartree potential imaginary residue {residue:.3g} discarded")
    return SpectralField(grid, values.real)


def split_field(g: SpectralField, t: float) -> Tuple[SpectralField, SpectralField]:
    g_low = cutoff_low(g, t)
    return g_low, g - g_low


def split_potential(u: SpectralField, t: float, params: ModelParams) -> Tuple[SpectralField, SpectralField]:
    """(g_L, g_S) with g_L = chi(omega t^(1/2)) g(u)"""
    if not t > 0:
        raise DomainError(f"split time must be positive (got {t})")
    return split_field(hartree_potential(u, params), t)


__all__ = [
    'ModelParams', 'ExponentTable', 'KERNELS', 'positive_part', 'fourier_kernel_constant',
    'riesz_constant', 'exponent_lambda', 'exponent_mu', 'unit_sphere_area',
    'truncated_kernel_transform', 'hartree_potential', 'interaction_potential', 'split_field', 'split_potential',
]
