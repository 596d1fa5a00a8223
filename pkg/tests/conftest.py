"""Shared fixtures: small grids, short meshes and session-cached profiles"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.modules.asymptotics import iterate_approximation
from src.modules.grid_spectral import GridSpec
from src.modules.hartree_core import ModelParams
from src.modules.initial_data import gaussian, normalize
from src.modules.time_mesh import GradedMesh


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def free_params():
    return ModelParams(kappa=0.0)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(2, 32, 20.0)


@pytest.fixture(scope="session")
def v0(small_grid, params):
    return normalize(gaussian(small_grid, 1.0, momentum=[0.5, 0.0]), 0.5, params.rho)


@pytest.fixture(scope="session")
def mesh():
    return GradedMesh(1.0, 64, 6.0)


@pytest.fixture(scope="session")
def profile(v0, mesh, params):
    """Level-1 profile with kappa = 1"""
    return iterate_approximation(1, v0, mesh, params)


@pytest.fixture(scope="session")
def free_profile(v0, mesh, free_params):
    return iterate_approximation(1, v0, mesh, free_params)
