"""Pydantic models for scenarios, numerical knobs and results."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from relayfield.errors import DegenerateGeometryError, DomainError

TAU = 2.0 * math.pi

# Relative distance under which the relay counts as sitting on the destination.
_COINCIDENT_TOL = 1e-12


class Protocol(str, enum.Enum):
    df = "df"
    cf = "cf"
    direct = "direct"
    cutset = "cutset"


class EstimateKind(str, enum.Enum):
    exact = "exact-analytic"
    upper = "upper-bound"
    lower = "lower-bound"
    monte_carlo = "monte-carlo"


def path_loss(distance: float, alpha: float) -> float:
    """Power-law path loss ``distance ** -alpha``."""
    if not distance > 0:
        raise DomainError(f"distance must be positive, got {distance}")
    if not alpha > 2:
        raise DomainError(f"path-loss exponent must exceed 2, got {alpha}")
    return distance**-alpha


def rate_from_threshold(threshold: float) -> float:
    return math.log2(1.0 + threshold)


def threshold_from_rate(rate: float) -> float:
    return 2.0**rate - 1.0


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------


class NetworkModel(BaseModel):
    """Interferer field: PPP density, path-loss exponent and unit-mean Rayleigh marks."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, allow_inf_nan=False)

    lam: float = Field(
        default=0.0, ge=0.0, alias="lambda", description="Interferer density, nodes per unit area"
    )
    alpha: float = Field(default=4.0, gt=2.0, description="Path-loss exponent")
    fading_mean: float = Field(default=1.0, description="Mean of the exponential power fading")

    @field_validator("fading_mean")
    @classmethod
    def validate_fading_mean(cls, v: float) -> float:
        if v != 1.0:
            raise ValueError("fading_mean is fixed at 1 (unit-mean exponential power)")
        return v

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    def with_density(self, lam: float) -> NetworkModel:
        return self.model_copy(update={"lam": lam})


class LinkGeometry(BaseModel):
    """Source at the origin, destination at (D, 0), relay at kD(cos theta, sin theta)."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    distance: float = Field(gt=0.0, description="Source-destination distance D")
    k: float = Field(gt=0.0, description="Relay distance as a fraction of D")
    theta: float = Field(default=0.0, ge=0.0, lt=TAU, description="Relay angle in radians")
    alpha: float = Field(default=4.0, gt=2.0, description="Path-loss exponent")

    @model_validator(mode="after")
    def validate_relay_position(self) -> LinkGeometry:
        if self.rd_distance <= _COINCIDENT_TOL * self.distance:
            raise ValueError("relay coincides with the destination")
        return self

    @property
    def source(self) -> tuple[float, float]:
        return (0.0, 0.0)

    @property
    def destination(self) -> tuple[float, float]:
        return (self.distance, 0.0)

    @property
    def relay(self) -> tuple[float, float]:
        radius = self.k * self.distance
        return (radius * math.cos(self.theta), radius * math.sin(self.theta))

    @property
    def rd_distance(self) -> float:
        # |r - d|^2 = D^2 (k^2 - 2k cos(theta) + 1), written as a sum of squares
        # so it stays accurate when the relay sits close to the destination.
        c = math.cos(self.theta)
        return self.distance * math.sqrt((self.k - c) ** 2 + (1.0 - c * c))

    @property
    def l_sd(self) -> float:
        return path_loss(self.distance, self.alpha)

    @property
    def l_sr(self) -> float:
        return path_loss(self.k * self.distance, self.alpha)

    @property
    def l_rd(self) -> float:
        return path_loss(self.rd_distance, self.alpha)


def make_geometry(distance: float, k: float, theta: float, alpha: float) -> LinkGeometry:
    """Build a LinkGeometry, rejecting a relay that sits on the source or destination."""
    if not distance > 0:
        raise DomainError(f"source-destination distance must be positive, got {distance}")
    if k <= 0:
        raise DegenerateGeometryError("relay coincides with the source (k must be > 0)")
    if not 0.0 <= theta < TAU:
        raise DomainError(f"theta must lie in [0, 2*pi), got {theta}")
    c = math.cos(theta)
    if math.sqrt((k - c) ** 2 + (1.0 - c * c)) <= _COINCIDENT_TOL:
        raise DegenerateGeometryError("relay coincides with the destination")
    return LinkGeometry(distance=distance, k=k, theta=theta, alpha=alpha)


class ProtocolParams(BaseModel):
    """Per-protocol knobs: SIR threshold, DF correlation, CF compression noise, CF cover size."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    threshold: float = Field(default=3.0, gt=0.0, description="SIR threshold T = 2^R - 1")
    rho_mag: float = Field(default=0.0, ge=0.0, le=1.0, description="|rho| between s and r")
    w_c: float = Field(default=1.0, ge=0.0, description="CF compression noise power W_c")
    partitions: int = Field(default=64, ge=1, description="Rectangles in the CF cover")

    @property
    def rate(self) -> float:
        return rate_from_threshold(self.threshold)

    def replace(self, **changes: Any) -> ProtocolParams:
        return self.model_copy(update=changes)


# ---------------------------------------------------------------------------
# Numerical knobs
# ---------------------------------------------------------------------------


class QuadratureSpec(BaseModel):
    """Tolerance, budget and truncation policy of the planar interference integrals.

    The integration disk starts at ``radius_scale`` times the largest length scale
    of the integrand (half the d-r separation, omega ** (1 / alpha)) and is widened
    until the analytic tail bound is below ``rel_tol`` times the running estimate.
    """

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    rel_tol: float = Field(default=1e-8, gt=0.0, lt=1.0)
    max_evaluations: int = Field(default=5_000_000, ge=1000)
    radius_scale: float = Field(default=8.0, ge=2.0)
    max_radius_steps: int = Field(default=8, ge=1)
    laguerre_order: int = Field(default=24, ge=2, le=200)


class JointTransformArgs(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    omega1: float = Field(ge=0.0, description="Argument paired with I_d")
    omega2: float = Field(ge=0.0, description="Argument paired with I_r")
    geometry: LinkGeometry
    network: NetworkModel


class SimulationSpec(BaseModel):
    """Monte Carlo run settings; every draw derives from (seed, trial index)."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    trials: int = Field(default=100_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    tail_fraction: float = Field(
        default=1e-4,
        gt=0.0,
        description="Truncated mean interference allowed, relative to the field's scale",
    )
    window_scale: float = Field(default=1.0, ge=1.0)
    max_window_radius: float = Field(default=1e6, gt=0.0)
    antithetic: bool = False
    fading_scale: float = Field(default=1.0, gt=0.0)
    chunk_size: int = Field(default=4096, ge=1)
    threads: int = Field(default=1, ge=1)


@dataclass(frozen=True)
class FadingSample:
    """Tagged-link amplitudes plus the interferers and their marks for one trial."""

    h_sr: complex
    h_sd: complex
    h_rd: complex
    positions: np.ndarray = field(repr=False)
    marks_d: np.ndarray = field(repr=False)
    marks_r: np.ndarray = field(repr=False)

    @property
    def h2_sr(self) -> float:
        return abs(self.h_sr) ** 2

    @property
    def h2_sd(self) -> float:
        return abs(self.h_sd) ** 2

    @property
    def h2_rd(self) -> float:
        return abs(self.h_rd) ** 2

    @property
    def node_count(self) -> int:
        return int(self.positions.shape[0])


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


class DfIntermediates(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu1: float = Field(ge=0.0)
    mu2: float = Field(gt=0.0)
    mu3: float = Field(ge=0.0)

    @model_validator(mode="after")
    def validate_order(self) -> DfIntermediates:
        if self.mu1 > self.mu2:
            raise ValueError("mu1 must not exceed mu2")
        return self


class CfBoundParts(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_a_upper: float = Field(ge=0.0, le=1.0)
    p_a_lower: float = Field(ge=0.0, le=1.0)
    p_b_upper: float = Field(ge=0.0, le=1.0)
    n_partitions: int = Field(ge=1)

    @model_validator(mode="after")
    def validate_order(self) -> CfBoundParts:
        if self.p_a_lower > self.p_a_upper:
            raise ValueError("lower bound on P(A_CF) exceeds the upper bound")
        return self


class OutageEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    protocol: Protocol
    kind: EstimateKind
    value: float = Field(ge=0.0, le=1.0)
    stderr: float | None = Field(default=None, ge=0.0)
    metadata: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_stderr(self) -> OutageEstimate:
        if (self.stderr is not None) != (self.kind is EstimateKind.monte_carlo):
            raise ValueError("stderr is present exactly for monte-carlo estimates")
        return self


class SweepPoint(BaseModel):
    value: float
    estimates: list[OutageEstimate]
    w_c: float | None = None
    rho_df: float = 0.0
    rho_cutset: float | None = None
    wc_method: str | None = None


class SweepResult(BaseModel):
    axis: str
    grid: list[float]
    points: list[SweepPoint]

    @model_validator(mode="after")
    def validate_grid(self) -> SweepResult:
        if any(b <= a for a, b in zip(self.grid, self.grid[1:], strict=False)):
            raise ValueError("sweep grid must be strictly increasing")
        if len(self.points) != len(self.grid):
            raise ValueError("one sweep point per grid value")
        return self

    def series(self, protocol: Protocol, kind: EstimateKind | None = None) -> list[float]:
        """Values of one curve along the grid."""
        out = []
        for point in self.points:
            for est in point.estimates:
                if est.protocol is protocol and (kind is None or est.kind is kind):
                    out.append(est.value)
                    break
        return out


class RegionCell(BaseModel):
    x: float
    y: float
    k: float | None = None
    theta: float | None = None
    winner: Protocol | None = None
    p_df: float | None = None
    p_cf_upper: float | None = None
    p_direct: float | None = None
    w_c: float | None = None

    @property
    def valid(self) -> bool:
        return self.winner is not None

    def outages(self) -> dict[Protocol, float]:
        if not self.valid:
            return {}
        return {
            Protocol.df: self.p_df,
            Protocol.cf: self.p_cf_upper,
            Protocol.direct: self.p_direct,
        }


class RegionMap(BaseModel):
    xs: list[float]
    ys: list[float]
    cells: list[RegionCell]
    precedence: list[Protocol] = Field(
        default_factory=lambda: [Protocol.df, Protocol.cf, Protocol.direct]
    )
    metadata: dict[str, Any] = Field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        tally = {p.value: 0 for p in self.precedence}
        tally["invalid"] = 0
        for cell in self.cells:
            tally[cell.winner.value if cell.winner else "invalid"] += 1
        return tally

    def cell_at(self, x: float, y: float) -> RegionCell:
        return min(self.cells, key=lambda c: (c.x - x) ** 2 + (c.y - y) ** 2)


class ErrorResponse(BaseModel):
    error: str
    detail: Any = None


class OutageReport(BaseModel):
    """Every estimate at one scenario point."""

    scenario: dict[str, Any]
    estimates: list[OutageEstimate]
    w_c: float
    wc_method: str

    def find(self, protocol: Protocol, kind: EstimateKind) -> OutageEstimate | None:
        return next(
            (e for e in self.estimates if e.protocol is protocol and e.kind is kind), None
        )


class RateRow(BaseModel):
    k: float
    protocol: Protocol
    t_max: float = Field(ge=0.0)

    @property
    def r_max(self) -> float:
        return rate_from_threshold(self.t_max)


class ValidationCheck(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class ValidationReport(BaseModel):
    checks: list[ValidationCheck] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[ValidationCheck]:
        return [c for c in self.checks if not c.passed]
