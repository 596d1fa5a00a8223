"""
Spectral Grid
=============

Periodic-grid discretization of R^n: unitary DFT, fractional powers of
omega = (-Laplacian)^(1/2), Sobolev norms, smooth frequency cutoffs and
Fourier differentiation.

Fields live on the torus [-L/2, L/2)^n sampled at N points per dimension.
The transform is scipy.fft with norm="ortho", so Parseval holds exactly in
the discrete sense and the physical L2 norm is sqrt(dx^n * sum |u|^2).
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Sequence, Tuple, Union

import numpy as np
import scipy.fft

from ..core.errors import InvalidFieldError, ParameterError, ShapeError, DomainError

_FFT_WORKERS = 1


def set_fft_workers(workers: int):
    """Set the thread count used by every transform"""
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(workers))


def get_fft_workers() -> int:
    return _FFT_WORKERS


def _fft(values: np.ndarray) -> np.ndarray:
    return scipy.fft.fftn(values, norm="ortho", workers=_FFT_WORKERS)


def _ifft(coefficients: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(coefficients, norm="ortho", workers=_FFT_WORKERS)


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid approximating R^n"""
    n: int = 2
    points_per_dim: int = 128
    box_length: float = 20.0

    def __post_init__(self):
        violations = []
        if self.n < 2:
            violations.append(f"n must be at least 2 (got {self.n})")
        if self.points_per_dim < 8:
            violations.append(f"points_per_dim must be at least 8 (got {self.points_per_dim})")
        elif self.points_per_dim & (self.points_per_dim - 1):
            violations.append(f"points_per_dim must be a power of two (got {self.points_per_dim})")
        if not self.box_length > 0:
            violations.append(f"box_length must be positive (got {self.box_length})")
        if violations:
            raise ParameterError(violations)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_dim,) * self.n

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    @property
    def frequency_spacing(self) -> float:
        return 2.0 * np.pi / self.box_length

    @cached_property
    def axis(self) -> np.ndarray:
        """1D physical coordinates, x = -L/2 + j dx"""
        N = self.points_per_dim
        return (np.arange(N) - N // 2) * self.spacing

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        """1D wavenumbers in FFT order, k = (2 pi / L) m with m in [-N/2, N/2)"""
        return 2.0 * np.pi * scipy.fft.fftfreq(self.points_per_dim, d=self.spacing)

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Sparse broadcastable coordinate arrays"""
        return tuple(np.meshgrid(*([self.axis] * self.n), indexing="ij", sparse=True))

    @cached_property
    def wavevector(self) -> Tuple[np.ndarray, ...]:
        """Sparse broadcastable wavenumber components"""
        return tuple(np.meshgrid(*([self.axis_wavenumbers] * self.n), indexing="ij", sparse=True))

    @cached_property
    def radius_squared(self) -> np.ndarray:
        r2 = sum(x ** 2 for x in self.coordinates)
        return _readonly(np.broadcast_to(r2, self.shape).copy())

    @cached_property
    def k_squared(self) -> np.ndarray:
        k2 = sum(k ** 2 for k in self.wavevector)
        return _readonly(np.broadcast_to(k2, self.shape).copy())

    @cached_property
    def k_norm(self) -> np.ndarray:
        return _readonly(np.sqrt(self.k_squared))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep modes with every |m_j| <= N/3"""
        N = self.points_per_dim
        m = np.abs(np.rint(scipy.fft.fftfreq(N) * N)).astype(int)
        keep_1d = m <= N // 3
        mask = np.ones(self.shape, dtype=bool)
        for axis_index, keep in enumerate(np.meshgrid(*([keep_1d] * self.n), indexing="ij", sparse=True)):
            mask = mask & keep
        return _readonly(mask)

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same box with factor times more points per dimension"""
        return GridSpec(self.n, self.points_per_dim * factor, self.box_length)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex scalar field sampled on a GridSpec"""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        array = np.array(self.values, dtype=np.complex128, copy=True)
        if array.shape != self.grid.shape:
            raise ShapeError(f"field shape {array.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(array)):
            raise InvalidFieldError("field contains non-finite values")
        object.__setattr__(self, "values", _readonly(array))

    @classmethod
    def from_coefficients(cls, grid: GridSpec, coefficients: np.ndarray) -> "SpectralField":
        field = cls(grid, _ifft(coefficients))
        return field

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable[..., np.ndarray]) -> "SpectralField":
        return cls(grid, np.broadcast_to(func(*grid.coordinates), grid.shape))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def constant(cls, grid: GridSpec, value: complex) -> "SpectralField":
        return cls(grid, np.full(grid.shape, value, dtype=np.complex128))

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Unitary Fourier coefficients, FFT order"""
        return _readonly(_fft(self.values))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(self.values) ** 2)))

    def conj(self) -> "SpectralField":
        return SpectralField(self.grid, np.conj(self.values))

    def abs2(self) -> "SpectralField":
        return SpectralField(self.grid, np.abs(self.values) ** 2)

    def real_part(self) -> "SpectralField":
        return SpectralField(self.grid, self.values.real)

    def imag_part(self) -> "SpectralField":
        return SpectralField(self.grid, self.values.imag)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ShapeError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values + other.values)
        return SpectralField(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values - other.values)
        return SpectralField(self.grid, self.values - other)

    def __rsub__(self, other):
        return SpectralField(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values * other.values)
        return SpectralField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.grid, self.values / scalar)

    def __neg__(self):
        return SpectralField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """n-tuple of SpectralFields on one grid"""
    components: Tuple[SpectralField, ...]

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ShapeError("vector field needs at least one component")
        grid = components[0].grid
        for component in components[1:]:
            if component.grid != grid:
                raise ShapeError("vector components live on different grids")
        if len(components) != grid.n:
            raise ShapeError(f"expected {grid.n} components, got {len(components)}")
        object.__setattr__(self, "components", components)

    @property
    def grid(self) -> GridSpec:
        return self.components[0].grid

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(tuple(SpectralField.zeros(grid) for _ in range(grid.n)))

    @classmethod
    def from_arrays(cls, grid: GridSpec, arrays: Sequence[np.ndarray]) -> "VectorField":
        return cls(tuple(SpectralField(grid, a) for a in arrays))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, other) -> "VectorField":
        return VectorField(tuple(c * other for c in self.components))

    __rmul__ = __mul__

    def dot(self, other: "VectorField") -> SpectralField:
        total = sum(a.values * b.values for a, b in zip(self.components, other.components))
        return SpectralField(self.grid, total)

    def squared_modulus(self) -> SpectralField:
        return SpectralField(self.grid, sum(np.abs(c.values) ** 2 for c in self.components))

    def real_part(self) -> "VectorField":
        return VectorField(tuple(c.real_part() for c in self.components))

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(c.l2_norm() ** 2 for c in self.components)))

    def is_curl_free(self, tol: float = 1e-10) -> bool:
        """Fourier coefficients parallel to k at every mode"""
        k = self.grid.wavevector
        coeffs = [c.coefficients for c in self.components]
        scale = max(float(np.max(self.grid.k_norm * np.abs(c))) for c in coeffs)
        if scale == 0.0:
            return True
        for i in range(self.grid.n):
            for j in range(i + 1, self.grid.n):
                defect = np.max(np.abs(k[i] * coeffs[j] - k[j] * coeffs[i]))
                if defect > tol * scale:
                    return False
        return True


@dataclass(frozen=True)
class NormSpec:
    """Order and flavor of a Sobolev norm"""
    sigma: float
    homogeneous: bool = True
    pm: bool = False
    pm_epsilon: float = 0.05

    def __post_init__(self):
        violations = []
        if not np.isfinite(self.sigma):
            violations.append(f"sigma must be finite (got {self.sigma})")
        if not self.pm_epsilon > 0:
            violations.append(f"pm_epsilon must be positive (got {self.pm_epsilon})")
        elif self.pm and np.isfinite(self.sigma) and not self.pm_epsilon < min(0.5, abs(self.sigma)):
            # sigma - eps and sigma + eps keep the sign of sigma
            violations.append(f"pm_epsilon must be below min(1/2, |sigma|) = {min(0.5, abs(self.sigma)):g} "
                              f"(got {self.pm_epsilon})")
        if violations:
            raise ParameterError(violations)

    @property
    def label(self) -> str:
        op = "omega" if self.homogeneous else "<omega>"
        suffix = "±0" if self.pm else ""
        return f"{op}^{self.sigma:g}{suffix}"


@lru_cache(maxsize=64)
def omega_multiplier(grid: GridSpec, sigma: float) -> np.ndarray:
    """|k|^sigma with the zero mode set to 0 whenever sigma != 0"""
    if sigma == 0:
        return _readonly(np.ones(grid.shape))
    multiplier = np.zeros(grid.shape)
    nonzero = grid.k_norm > 0
    multiplier[nonzero] = grid.k_norm[nonzero] ** sigma
    return _readonly(multiplier)


@lru_cache(maxsize=32)
def bracket_multiplier(grid: GridSpec, sigma: float) -> np.ndarray:
    """<k>^sigma = (1 + |k|^2)^(sigma/2)"""
    return _readonly((1.0 + grid.k_squared) ** (0.5 * sigma))


def fourier_multiply(u: SpectralField, multiplier: np.ndarray) -> SpectralField:
    return SpectralField.from_coefficients(u.grid, multiplier * u.coefficients)


def apply_omega_power(u: SpectralField, sigma: float) -> SpectralField:
    """omega^sigma u; the zero mode is dropped for sigma != 0"""
    if sigma == 0:
        return u
    return fourier_multiply(u, omega_multiplier(u.grid, float(sigma)))


def _weighted_norm(u: SpectralField, weight: np.ndarray) -> float:
    return float(np.sqrt(u.grid.cell_volume * np.sum((weight * np.abs(u.coefficients)) ** 2)))


def _single_norm(u: SpectralField, sigma: float, homogeneous: bool) -> float:
    if homogeneous:
        return _weighted_norm(u, omega_multiplier(u.grid, float(sigma)))
    return _weighted_norm(u, bracket_multiplier(u.grid, float(sigma)))


def sobolev_norm(u: Union[SpectralField, VectorField], spec: NormSpec) -> float:
    """||omega^sigma u||, ||<omega>^sigma u|| or the ±0 geometric mean

    Vector fields use the root-sum-square of component norms.
    """
    components = u.components if isinstance(u, VectorField) else (u,)

    def norm_at(sigma: float, homogeneous: bool) -> float:
        return float(np.sqrt(sum(_single_norm(c, sigma, homogeneous) ** 2 for c in components)))

    if spec.pm:
        upper = norm_at(spec.sigma + spec.pm_epsilon, True)
        lower = norm_at(spec.sigma - spec.pm_epsilon, True)
        return float(np.sqrt(upper * lower))
    return norm_at(spec.sigma, spec.homogeneous)


def hs_norm(u: SpectralField, sigma: float) -> float:
    """Inhomogeneous H^sigma norm"""
    return _single_norm(u, sigma, homogeneous=False)


def _h(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s, dtype=float)
    positive = s > 0
    out[positive] = np.exp(-1.0 / s[positive])
    return out


def chi_profile(ell) -> np.ndarray:
    """Smooth cutoff: 1 for ell <= 1, 0 for ell >= 2"""
    ell = np.asarray(ell, dtype=float)
    upper = _h(2.0 - ell)
    lower = _h(ell - 1.0)
    return upper / (upper + lower)


def low_multiplier(grid: GridSpec, t: float) -> np.ndarray:
    if not t > 0:
        raise DomainError(f"cutoff time must be positive (got {t})")
    return chi_profile(grid.k_norm * np.sqrt(t))


def cutoff_low(u: SpectralField, t: float) -> SpectralField:
    """chi_L u = chi(omega t^(1/2)) u"""
    return fourier_multiply(u, low_multiplier(u.grid, t))


def cutoff_high(u: SpectralField, t: float) -> SpectralField:
    """chi_S u = u - chi_L u"""
    return u - cutoff_low(u, t)


def gradient(u: SpectralField) -> VectorField:
    coefficients = u.coefficients
    return VectorField(tuple(
        SpectralField.from_coefficients(u.grid, 1j * k * coefficients)
        for k in u.grid.wavevector
    ))


def divergence(s: VectorField) -> SpectralField:
    grid = s.grid
    total = sum(1j * k * c.coefficients for k, c in zip(grid.wavevector, s.components))
    return SpectralField.from_coefficients(grid, total)


def laplacian(u: SpectralField) -> SpectralField:
    return fourier_multiply(u, -u.grid.k_squared)


def dealias(u: SpectralField) -> SpectralField:
    return fourier_multiply(u, u.grid.dealias_mask)


def lebesgue_norm(u: SpectralField, r: float) -> float:
    """L^r norm by direct quadrature; r = inf gives the sup norm"""
    magnitude = np.abs(u.values)
    if np.isinf(r):
        return float(np.max(magnitude))
    if r < 1:
        raise DomainError(f"L^r norm needs r >= 1 (got {r})")
    return float((u.grid.cell_volume * np.sum(magnitude ** r)) ** (1.0 / r))


def inner_product(u: SpectralField, w: SpectralField) -> complex:
    """<u, w> = integral of conj(u) w"""
    u._check(w)
    return complex(u.grid.cell_volume * np.sum(np.conj(u.values) * w.values))


def parseval_defect(u: SpectralField) -> float:
    """Relative mismatch between physical and Fourier squared norms"""
    physical = np.sum(np.abs(u.values) ** 2)
    spectral = np.sum(np.abs(u.coefficients) ** 2)
    if physical == 0:
        return float(spectral)
    return float(abs(physical - spectral) / physical)


__all__ = [
    'GridSpec', 'SpectralField', 'VectorField', 'NormSpec',
    'set_fft_workers', 'get_fft_workers', 'omega_multiplier', 'fourier_multiply',
    'apply_omega_power', 'sobolev_norm', 'hs_norm', 'chi_profile', 'low_multiplier',
    'cutoff_low', 'cutoff_high', 'gradient', 'divergence', 'laplacian', 'dealias',
    'lebesgue_norm', 'inner_product', 'parseval_defect',
]
