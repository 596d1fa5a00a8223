"""
Initial Data
============

Families of asymptotic states v_0 and the random band-limited fields
used by the inequality spot checks.
"""

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.fft

from ..core.errors import ConfigError, ShapeError
from ..core.logger import logger
from .grid_spectral import GridSpec, SpectralField, hs_norm


def gaussian(grid: GridSpec, width: float = 1.0, center: Optional[Sequence[float]] = None,
             momentum: Optional[Sequence[float]] = None) -> SpectralField:
    """exp(-|x - c|^2 / 2w^2 + i p.x)"""
    center = np.zeros(grid.n) if center is None else np.asarray(center, dtype=float)
    momentum = np.zeros(grid.n) if momentum is None else np.asarray(momentum, dtype=float)
    if center.shape != (grid.n,) or momentum.shape != (grid.n,):
        raise ShapeError(f"center and momentum need {grid.n} components")

    exponent = sum(
        -((x - c) ** 2) / (2.0 * width ** 2) + 1j * p * x
        for x, c, p in zip(grid.coordinates, center, momentum)
    )
    return SpectralField(grid, np.broadcast_to(np.exp(exponent), grid.shape))


def random_band_limited(grid: GridSpec, k_band: float, rng: np.random.Generator,
                        envelope_width: Optional[float] = None) -> SpectralField:
    """Random trigonometric polynomial with |k| <= k_band

    Coefficients are drawn on the lattice (2 pi / L) Z^n in a fixed order, so
    grids sharing the box length produce the same physical field. An optional
    Gaussian envelope localizes it.
    """
    dk = grid.frequency_spacing
    m_max = int(np.floor(k_band / dk))
    if 2 * m_max + 1 > grid.points_per_dim:
        raise ShapeError(f"band {k_band} is not resolved by {grid.points_per_dim} points")

    m_axis = np.arange(-m_max, m_max + 1)
    lattice = np.stack(np.meshgrid(*([m_axis] * grid.n), indexing="ij"), axis=-1).reshape(-1, grid.n)
    draws = rng.standard_normal((lattice.shape[0], 2))
    inside = np.linalg.norm(lattice, axis=1) * dk <= k_band

    coefficients = np.zeros(grid.shape, dtype=np.complex128)
    N = grid.points_per_dim
    for m, (re, im), keep in zip(lattice, draws, inside):
        if keep:
            coefficients[tuple(m % N)] = re + 1j * im

    # the grid starts at x = -L/2, not at the origin
    shift = sum(k * (0.5 * grid.box_length) for k in grid.wavevector)
    values = scipy.fft.ifftn(coefficients * np.exp(-1j * shift)) * coefficients.size
    if envelope_width is not None:
        values = values * np.exp(-grid.radius_squared / (2.0 * envelope_width ** 2))
    return SpectralField(grid, values)


def from_file(grid: GridSpec, path: str) -> SpectralField:
    source = Path(path)
    if not source.exists():
        raise ConfigError(f"initial data file not found: {source}")
    if source.suffix == ".npz":
        with np.load(source) as archive:
            values = archive["v0"]
    else:
        values = np.load(source)
    if values.shape != grid.shape:
        raise ShapeError(f"initial data shape {values.shape} does not match grid {grid.shape}")
    return SpectralField(grid, values)


def normalize(u: SpectralField, a0: float, rho: float) -> SpectralField:
    """Rescale so that ||u; H^rho|| = a0"""
    norm = hs_norm(u, rho)
    if norm == 0:
        return u
    return u * (a0 / norm)


def build_initial_data(section, grid: GridSpec, rho: float) -> SpectralField:
    """v_0 from an InitialDataSection"""
    if section.family == "gaussian":
        field = gaussian(grid, section.width, section.center, section.momentum)
    elif section.family == "band_limited_random":
        rng = np.random.default_rng(section.seed)
        field = random_band_limited(grid, section.k_band, rng, section.envelope_width)
    elif section.family == "file":
        if not section.path:
            raise ConfigError("initial_data.path is required for the file family")
        return from_file(grid, section.path)
    else:
        raise ConfigError(f"unknown initial data family: {section.family}")

    field = normalize(field, section.a0, rho)
    logger.debug(f"Initial data '{section.family}' built with a0={section.a0}")
    return field


__all__ = ['gaussian', 'random_band_limited', 'from_file', 'normalize', 'build_initial_data']
