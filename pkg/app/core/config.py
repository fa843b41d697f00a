import math
from pathlib import Path
from typing import Literal

from dotenv import dotenv_values
from pydantic import ValidationError
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from app.core.errors import ConfigError


class Settings(BaseSettings):
    # App Environment (development / production)
    APP_ENV: str = "development"
    LOG_LEVEL: str = "INFO"

    # Where preset directories are created
    OUTPUT_DIR: str = "results"

    # Worker pool size for sweeps and collocation ensembles
    THREADS: int = 1
    PLOTS: bool = True

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


class RunConfig(BaseSettings):
    """One run configuration, read from a flat KEY=VALUE file.

    Only the file and keyword arguments are sources, unknown keys are rejected.
    """

    EPSILON: float = 1.0
    KAPPA: float = 1.0
    THETA_BAR: float = 1.0
    SIZES: list[int] = [1, 2]
    DIM: int = 1
    DOMAIN_LENGTH: float = 2 * math.pi

    N_X: int = 32
    N_V: int = 16

    AMPLITUDE: float = 1e-3
    PROFILE: Literal["shear", "density_wave", "homogeneous", "random"] = "density_wave"
    Z_PROFILE: Literal["constant", "linear", "quadratic", "exponential"] = "constant"
    Z_COUPLING: float = 0.5
    SEED: int = 0

    MEASURE: Literal["uniform", "chebyshev", "beta"] = "uniform"
    BETA_A: float = 2.0
    BETA_B: float = 2.0
    GPC_ORDER: int = 5
    QUAD_POINTS: int = 0
    SR_ORDER: int = 1
    K_VALUES: list[int] = [2, 4, 6, 8]
    EPS_VALUES: list[float] = [1.0, 0.1, 0.01]

    T_END: float = 10.0
    DT: float = 0.0
    OBSERVE_STRIDE: int = 1
    SOBOLEV_ORDER: int = 2
    LAMBDA4: float = 0.01
    HYDRO_TIME: float = 2.0
    NONLINEAR: bool = True

    model_config = SettingsConfigDict(extra="forbid", env_file=None)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, dotenv_settings

    def echo(self) -> dict:
        """Normalized key/value view written into every summary."""
        return self.model_dump(mode="json")


def load_run_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Read a run configuration file; every problem is reported in one ConfigError."""
    violations = []
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError([f"config file not found: {path}"])
        known = set(RunConfig.model_fields)
        for key in dotenv_values(path):
            if key.upper() not in known:
                violations.append(f"{key}: unknown key")
    try:
        config = RunConfig(_env_file=path, **overrides)
    except ValidationError as exc:
        for err in exc.errors():
            key = ".".join(str(part) for part in err["loc"]) or "config"
            if err["type"] == "extra_forbidden":
                continue
            violations.append(f"{key.upper()}: {err['msg']}")
        raise ConfigError(violations or ["config rejected"]) from exc
    if violations:
        raise ConfigError(violations)
    return config


settings = Settings()
