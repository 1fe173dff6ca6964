"""Pydantic request/response models for the HTTP service.

These mirror the JSON file schemas: scenarios and check instances come
in exactly as they would sit on disk (schema_version 1, unknown fields
rejected), and responses carry the same dictionaries the CLI writes.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class EnvModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_block_size: int
    target_block_size: int
    marginal_cost: float = 0.0
    min_base_fee: float = 0.0


class PeriodModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    demand: dict
    miner: dict = Field(default_factory=lambda: {"miner": "honest"})
    user: dict = Field(default_factory=lambda: {"user": "truthful_1559"})


class ScenarioModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = 1
    name: str = ""
    env: EnvModel
    mechanism: dict
    update_rule: dict
    periods: list[PeriodModel]
    blocks_per_period: int = 1
    mode: Literal["fluid", "discrete"] = "fluid"
    seed: int = 0
    tx_gas: int = 25_000
    price_grid_step: float = 1.0


class InstanceTxModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    value: float
    gas_limit: int
    bid_level: Optional[float] = None


class InstanceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = 1
    name: str = ""
    env: EnvModel
    base_fee: float
    txs: list[InstanceTxModel]
    bid_grid: list[float]
    gas_grid: list[int]
    max_fakes: int = 1
    max_evaluations: int = 2_000_000


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioModel
    format: Literal["json", "csv"] = "json"


class TrajectoryRowModel(BaseModel):
    height: int
    base_fee_gwei: float
    block_gas: int
    burned_gwei: float
    miner_revenue_gwei: float
    forwarded_gwei: float
    mc_price_gwei: float
    excessively_low: bool


class SimulateResponse(BaseModel):
    rows: list[TrajectoryRowModel]
    csv: Optional[str] = None


CheckProperty = Literal["mmic", "costly", "uic", "dominant", "oca", "equiv1559r"]


class CheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    property: CheckProperty
    instance: InstanceModel
    mechanism: Optional[dict] = None
    gamma: Optional[float] = None
    strategy: Optional[dict] = None
    tip_grid: Optional[list[float]] = None
    opponent_levels: Optional[list[float]] = None
    onchain_levels: Optional[list[float]] = None


class WitnessModel(BaseModel):
    kind: str
    description: str
    utility: float
    baseline: float
    gain: float
    data: dict


class CheckResponse(BaseModel):
    holds: bool
    witness: Optional[WitnessModel] = None
    evaluations: int
    detail: str = ""


class AttackCostRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    update_rule: dict
    r_start: float = 1.0
    max_gas: int = 25_000_000
    n_blocks: int
    target: Optional[int] = None


class AttackCostResponse(BaseModel):
    eth: float
    n_blocks: int


class DemandQueryRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    curve: dict
    query: Literal["quantity", "mc_price", "revenue", "monopoly"]
    price: Optional[float] = None
    supply: Optional[float] = None
    max_gas: Optional[int] = None


class DemandQueryResponse(BaseModel):
    result: dict


class SuiteRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    jobs: int = 1
    battery_count: int = 200
    criteria: Optional[list[str]] = None


class CriterionResultModel(BaseModel):
    name: str
    passed: bool
    detail: str
    seconds: float


class SuiteResponse(BaseModel):
    results: list[CriterionResultModel]
    passed: bool
