import math

import numpy as np
import pytest

from app.schemas.params import InitialSpec, ModelParams, SpectralGrid
from app.services import gpc_service
from app.models.gpc import Measure


@pytest.fixture
def params_1d() -> ModelParams:
    return ModelParams(epsilon=0.5, kappa=1.0, theta_bar=1.0, sizes=(1, 2), dim=1, domain_length=2 * math.pi)


@pytest.fixture
def params_2d() -> ModelParams:
    return ModelParams(epsilon=0.5, kappa=1.0, theta_bar=1.0, sizes=(1, 2), dim=2, domain_length=2 * math.pi)


@pytest.fixture
def grid_small() -> SpectralGrid:
    return SpectralGrid(n_x=16, n_v=8)


@pytest.fixture
def grid_2d() -> SpectralGrid:
    return SpectralGrid(n_x=8, n_v=6)


@pytest.fixture
def density_wave() -> InitialSpec:
    return InitialSpec(amplitude=1e-3, profile="density_wave")


@pytest.fixture
def uniform_basis():
    return gpc_service.build_basis(Measure.uniform(), 4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def write_env(tmp_path):
    """Write KEY=VALUE lines to a config file and return its path."""

    def _write(text: str, name: str = "run.env"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write
