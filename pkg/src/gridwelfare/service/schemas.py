"""Request/response models for the HTTP service.

The experiment config model itself lives in :mod:`gridwelfare.config`
(it doubles as the on-disk JSON schema); these wrappers add the service
envelope: inline trace payloads for ingestion and artifact maps in
responses so thin clients can write files locally.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..config import ExperimentConfigModel, MarketModel

__all__ = [
    "HealthResponse",
    "ValidateRequest",
    "ValidateResponse",
    "SimulateRequest",
    "RunSummaryModel",
    "SimulateResponse",
    "OracleRequest",
    "OracleResponse",
    "NamedTrace",
    "IngestPricesRequest",
    "IngestPricesResponse",
    "IngestWindRequest",
    "IngestWindResponse",
    "ErrorPayload",
]


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateRequest(BaseModel):
    config: ExperimentConfigModel


class ValidateResponse(BaseModel):
    ok: bool
    report: dict


class SimulateRequest(BaseModel):
    config: ExperimentConfigModel


class RunSummaryModel(BaseModel):
    eta: float
    days: int
    average_welfare: float
    welfare_sem: float
    avg_total_queue: float
    max_total_queue: float
    queue_bound: float
    min_drift_slack: float
    min_target_slack: float
    violations: int
    oracle_value: Optional[float] = None
    wall_time_s: float


class SimulateResponse(BaseModel):
    summaries: list[RunSummaryModel]
    artifacts: dict[str, str] = Field(description="file name -> file content")
    oracle: Optional[dict] = None


class OracleRequest(BaseModel):
    config: ExperimentConfigModel


class OracleResponse(BaseModel):
    feasible: bool
    single_price_value: Optional[float]
    relaxed_value: Optional[float]
    price_of_single_price: Optional[float]
    target_duals: Optional[list[float]]
    target_slacks: Optional[list[float]]
    certificate: dict
    report_json: str


class NamedTrace(BaseModel):
    name: str
    content: str


class IngestPricesRequest(BaseModel):
    t_slots: int
    files: list[NamedTrace]


class IngestPricesResponse(BaseModel):
    market: MarketModel
    beta_max: float
    alpha_max: float


class IngestWindRequest(BaseModel):
    t_slots: int
    name: str = "<wind>"
    content: str


class IngestWindResponse(BaseModel):
    atoms_per_slot: list[list[tuple[float, float]]]


class ErrorPayload(BaseModel):
    kind: str  # "validation" | "invariant" | "internal"
    message: str
    details: dict = Field(default_factory=dict)
