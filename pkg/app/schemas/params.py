import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.core.config import RunConfig


class ModelParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float = 1.0
    kappa: float = 1.0
    theta_bar: float = 1.0
    sizes: tuple[int, ...] = (1,)
    dim: int = 1
    domain_length: float = 2 * math.pi

    @property
    def n_species(self) -> int:
        return len(self.sizes)

    @property
    def volume(self) -> float:
        """|T|^d"""
        return self.domain_length ** self.dim

    @property
    def sigma(self) -> np.ndarray:
        """Per-species velocity scale sqrt(theta_bar / i)"""
        return np.sqrt(self.theta_bar / np.asarray(self.sizes, dtype=float))

    @property
    def drag_weights(self) -> np.ndarray:
        """i^(1/3) per species"""
        return np.asarray(self.sizes, dtype=float) ** (1.0 / 3.0)

    @property
    def relaxation_weights(self) -> np.ndarray:
        """i^(2/3) per species"""
        return np.asarray(self.sizes, dtype=float) ** (2.0 / 3.0)


class SpectralGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_x: int = 32
    n_v: int = 16

    @property
    def dealias_cut(self) -> int:
        return self.n_x // 3

    @property
    def padded_size(self) -> int:
        return 3 * self.n_x // 2


class InitialSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    amplitude: float = 1e-3
    profile: Literal["shear", "density_wave", "homogeneous", "random"] = "density_wave"
    z_profile: Literal["constant", "linear", "quadratic", "exponential"] = "constant"
    z_coupling: float = 0.5
    seed: int = 0

    def z_factor(self, z: float) -> float:
        """Amplitude multiplier g(z)"""
        rho = self.z_coupling
        if self.z_profile == "linear":
            return 1.0 + rho * z
        if self.z_profile == "quadratic":
            return (1.0 + rho * z) ** 2
        if self.z_profile == "exponential":
            return math.exp(rho * z)
        return 1.0

    @property
    def z_degree(self) -> int | None:
        """Polynomial degree of g(z); None when g is not a polynomial"""
        return {"constant": 0, "linear": 1, "quadratic": 2}.get(self.z_profile)


Preset = Literal["relaxation", "decay", "conservation", "hydro_sweep", "k_sweep", "eps_sweep"]


class ExperimentPlan(BaseModel):
    preset: Preset
    eps_values: list[float]
    k_values: list[int]
    output_dir: str = "results"
    seed: int = 0
    threads: int = 1
    plots: bool = True

    @field_validator("eps_values", "k_values")
    @classmethod
    def not_empty(cls, value):
        if not value:
            raise ValueError("sweep list is empty")
        return value

    @field_validator("threads")
    @classmethod
    def positive_threads(cls, value):
        if value < 1:
            raise ValueError("threads must be at least 1")
        return value


def params_from_config(config: RunConfig, **changes) -> ModelParams:
    values = dict(
        epsilon=config.EPSILON,
        kappa=config.KAPPA,
        theta_bar=config.THETA_BAR,
        sizes=tuple(config.SIZES),
        dim=config.DIM,
        domain_length=config.DOMAIN_LENGTH,
    )
    values.update(changes)
    return ModelParams(**values)


def grid_from_config(config: RunConfig) -> SpectralGrid:
    return SpectralGrid(n_x=config.N_X, n_v=config.N_V)


def initial_spec_from_config(config: RunConfig, **changes) -> InitialSpec:
    values = dict(
        amplitude=config.AMPLITUDE,
        profile=config.PROFILE,
        z_profile=config.Z_PROFILE,
        z_coupling=config.Z_COUPLING,
        seed=config.SEED,
    )
    values.update(changes)
    return InitialSpec(**values)
