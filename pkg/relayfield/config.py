from __future__ import annotations

import tomllib
from pathlib import Path
from typing import Any

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from relayfield.models import (
    LinkGeometry,
    NetworkModel,
    Protocol,
    ProtocolParams,
    QuadratureSpec,
    SimulationSpec,
    make_geometry,
)


class Settings(BaseSettings):
    log_level: str = "INFO"
    threads: int = 1
    coupling_cache_size: int = 4096
    host: str = "0.0.0.0"
    port: int = 8000
    max_trials_per_request: int = 200_000
    max_evaluations_per_request: int = 5_000_000
    max_rate_points_per_request: int = 36

    model_config = {"env_prefix": "RELAYFIELD_"}


settings = Settings()


GridSpec = tuple[float, float, int]


class ScenarioConfig(BaseSettings):
    """One run: the scenario point plus the experiment block.

    Values resolve as CLI flags > config file > RELAYFIELD_SCENARIO_* environment
    > defaults. ``load_scenario`` feeds file and flag values in as init arguments,
    which pydantic-settings ranks above the environment.
    """

    model_config = SettingsConfigDict(env_prefix="RELAYFIELD_SCENARIO_", extra="forbid")

    # Scenario
    lam: float = Field(default=1e-4, ge=0.0)
    alpha: float = Field(default=4.0, gt=2.0)
    distance: float = Field(default=10.0, gt=0.0)
    k: float = Field(default=0.2, gt=0.0)
    theta: float = Field(default=0.0, ge=0.0)
    threshold: float = Field(default=3.0, gt=0.0)
    rho_mag: float = Field(default=0.0, ge=0.0, lt=1.0)
    w_c: float = Field(default=1.0, gt=0.0)
    partitions: int = Field(default=64, ge=1)

    # Experiment
    seed: int = Field(default=0, ge=0, lt=2**64)
    trials: int = Field(default=100_000, ge=1)
    antithetic: bool = False
    with_mc: bool = False
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)
    rel_tol: float = Field(default=1e-8, gt=0.0, lt=1.0)
    max_evaluations: int = Field(default=5_000_000, ge=1000)
    optimize_wc: bool = True
    tight_b_bound: bool = False
    sweep_lambdas: list[float] = Field(default_factory=lambda: [1e-5, 3e-5, 1e-4, 3e-4, 1e-3])
    sweep_protocols: list[Protocol] = Field(default_factory=lambda: list(Protocol))
    rate_ks: list[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    rate_target: float = Field(default=1e-3, gt=0.0, lt=1.0)
    region_x: GridSpec = (-5.0, 15.0, 21)
    region_y: GridSpec = (-10.0, 10.0, 21)
    acceptance_lambdas: list[float] = Field(default_factory=lambda: [1e-5, 1e-4, 1e-3])
    acceptance_ks: list[float] = Field(default_factory=lambda: [0.2, 0.9])
    acceptance_trends: bool = True
    out_dir: Path = Path("results")

    @field_validator("sweep_lambdas", "acceptance_lambdas")
    @classmethod
    def validate_lambdas(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("density grid must not be empty")
        if any(x < 0 for x in v):
            raise ValueError("densities must be >= 0")
        if any(b <= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("density grid must be strictly increasing")
        return v

    @field_validator("rate_ks", "acceptance_ks")
    @classmethod
    def validate_ks(cls, v: list[float]) -> list[float]:
        if not v or any(x <= 0 for x in v):
            raise ValueError("must be a non-empty list of positive k values")
        return v

    @field_validator("region_x", "region_y")
    @classmethod
    def validate_grid(cls, v: GridSpec) -> GridSpec:
        lo, hi, count = v
        if count < 1:
            raise ValueError("grid count must be >= 1")
        if count > 1 and not hi > lo:
            raise ValueError("grid max must exceed grid min")
        return v

    @model_validator(mode="after")
    def validate_scenario(self) -> ScenarioConfig:
        # Surfaces geometry errors (relay on the destination, theta out of range)
        # as field-level config errors before anything runs.
        self.network()
        self.geometry()
        self.params()
        for k in (*self.rate_ks, *self.acceptance_ks):
            make_geometry(self.distance, k, self.theta, self.alpha)
        return self

    def network(self) -> NetworkModel:
        return NetworkModel(lam=self.lam, alpha=self.alpha)

    def geometry(self) -> LinkGeometry:
        return make_geometry(self.distance, self.k, self.theta, self.alpha)

    def params(self) -> ProtocolParams:
        return ProtocolParams(
            threshold=self.threshold,
            rho_mag=self.rho_mag,
            w_c=self.w_c,
            partitions=self.partitions,
        )

    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(rel_tol=self.rel_tol, max_evaluations=self.max_evaluations)

    def simulation(self) -> SimulationSpec:
        return SimulationSpec(
            trials=self.trials,
            seed=self.seed,
            antithetic=self.antithetic,
            threads=self.threads,
        )


def scenario_values(data: dict[str, Any]) -> dict[str, Any]:
    """Flat scenario mapping with ``lambda`` accepted for ``lam``."""
    data = dict(data)
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ValueError(f"scenario must be flat, found tables: {', '.join(nested)}")
    if "lambda" in data:
        if "lam" in data:
            raise ValueError("scenario sets both 'lambda' and 'lam'")
        data["lam"] = data.pop("lambda")
    return data


def read_config_file(path: Path) -> dict[str, Any]:
    with path.open("rb") as fh:
        return scenario_values(tomllib.load(fh))


def load_scenario(
    path: Path | None = None, overrides: dict[str, Any] | None = None
) -> ScenarioConfig:
    values: dict[str, Any] = read_config_file(path) if path is not None else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ScenarioConfig(**values)
