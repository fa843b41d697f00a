from typing import Literal, Optional

from pydantic import BaseModel, Field

# Column order of the deterministic series CSV files
REPORT_COLUMNS = (
    "t",
    "E_s0",
    "E_tilde",
    "G1",
    "G1_balance",
    "G2_total",
    "dissipation",
    "hypo_pair_total",
    "hypo_bracket_total",
    "mass_residual",
    "momentum_residual",
    "ubar_residual",
    "hydro_residual",
    "poincare_ratio",
)


class EnergyReport(BaseModel):
    t: float
    E_s0: float
    G1: float
    G1_balance: float
    G2: list[float]
    hypo_pair: list[float]
    hypo_bracket: list[float]
    E_tilde: float
    mass_residual: list[float]
    momentum_residual: float
    ubar_residual: float
    hydro_residual: list[float]
    poincare_ratio: float
    dissipation: float

    def csv_row(self) -> list[float]:
        return [
            self.t,
            self.E_s0,
            self.E_tilde,
            self.G1,
            self.G1_balance,
            sum(self.G2),
            self.dissipation,
            sum(self.hypo_pair),
            sum(self.hypo_bracket),
            max(self.mass_residual),
            self.momentum_residual,
            self.ubar_residual,
            max(self.hydro_residual),
            self.poincare_ratio,
        ]


class CheckResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class RunRecord(BaseModel):
    label: str
    epsilon: float
    K: Optional[int] = None
    lambda_hat: Optional[float] = None
    r2: Optional[float] = None
    monotone: Optional[bool] = None
    max_error: Optional[float] = None
    hydro_residual: Optional[float] = None
    series_file: Optional[str] = None


class ExperimentSummary(BaseModel):
    preset: str
    version: str
    created_at: str
    passed: bool
    status: Literal["complete", "aborted"] = "complete"
    error: Optional[str] = None
    config: dict
    runs: list[RunRecord] = Field(default_factory=list)
    checks: list[CheckResult] = Field(default_factory=list)
    fits: dict[str, float] = Field(default_factory=dict)
    flags: list[str] = Field(default_factory=list)
