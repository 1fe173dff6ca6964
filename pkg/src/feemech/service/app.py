"""HTTP service exposing the laboratory: simulate, check, attack-cost, demand, suite.

The handlers are thin wrappers over the core package; the CLI calls the
same functions in-process, so file-based and HTTP-based runs produce
identical payloads.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import acceptance
from ..agents import user_strategy_from_dict
from ..basefee import rule_from_dict
from ..checks import (
    Instance,
    Verdict,
    check_1559r_fpa_equivalence,
    check_costly,
    check_dominant,
    check_mmic,
    check_oca_proof,
    check_uic_epne,
)
from ..core import FeemechError
from ..demand import curve_from_dict, market_clearing_price, monopoly_point, quantity, revenue
from ..mechanisms import mechanism_from_dict
from ..simulator import Scenario, attack_cost, run_trajectory
from .models import (
    AttackCostRequest,
    AttackCostResponse,
    CheckRequest,
    CheckResponse,
    CriterionResultModel,
    DemandQueryRequest,
    DemandQueryResponse,
    SimulateRequest,
    SimulateResponse,
    SuiteRequest,
    SuiteResponse,
    TrajectoryRowModel,
    WitnessModel,
)

app = FastAPI(
    title="feemech",
    description="Transaction fee mechanism laboratory",
    version="0.1.0",
)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


def simulate_scenario(request: SimulateRequest) -> SimulateResponse:
    try:
        scenario = Scenario.from_dict(request.scenario.model_dump())
        report = run_trajectory(scenario)
    except FeemechError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    rows = [TrajectoryRowModel(**row.to_dict()) for row in report.rows]
    csv_text = report.to_csv() if request.format == "csv" else None
    return SimulateResponse(rows=rows, csv=csv_text)


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(request: SimulateRequest) -> SimulateResponse:
    return simulate_scenario(request)


@app.post("/simulate.csv", response_class=PlainTextResponse)
def simulate_csv_endpoint(request: SimulateRequest) -> str:
    request = SimulateRequest(scenario=request.scenario, format="csv")
    return simulate_scenario(request).csv or ""


def run_check(request: CheckRequest) -> CheckResponse:
    try:
        instance = Instance.from_dict(request.instance.model_dump())
        verdict = _dispatch_check(request, instance)
    except FeemechError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    witness = WitnessModel(**verdict.witness.to_dict()) if verdict.witness else None
    return CheckResponse(
        holds=verdict.holds,
        witness=witness,
        evaluations=verdict.evaluations,
        detail=verdict.detail,
    )


def _dispatch_check(request: CheckRequest, instance: Instance) -> Verdict:
    prop = request.property
    if prop == "equiv1559r":
        return check_1559r_fpa_equivalence(instance)
    if request.mechanism is None:
        raise FeemechError(f"property {prop!r} needs a mechanism")
    spec = mechanism_from_dict(request.mechanism)
    if prop == "mmic":
        return check_mmic(spec, instance)
    if prop == "costly":
        if request.gamma is None:
            raise FeemechError("property 'costly' needs gamma")
        return check_costly(spec, instance, request.gamma)
    if prop in ("uic", "dominant"):
        if request.strategy is None:
            raise FeemechError(f"property {prop!r} needs a user strategy")
        strategy = user_strategy_from_dict(request.strategy)
        if prop == "uic":
            return check_uic_epne(spec, instance, strategy, tip_grid=request.tip_grid)
        return check_dominant(
            spec,
            instance,
            strategy,
            opponent_levels=request.opponent_levels,
            tip_grid=request.tip_grid,
        )
    if prop == "oca":
        return check_oca_proof(spec, instance, onchain_levels=request.onchain_levels)
    raise FeemechError(f"unknown property: {prop!r}")


@app.post("/check", response_model=CheckResponse)
def check_endpoint(request: CheckRequest) -> CheckResponse:
    return run_check(request)


def run_attack_cost(request: AttackCostRequest) -> AttackCostResponse:
    try:
        rule = rule_from_dict(request.update_rule)
        eth = attack_cost(
            rule,
            r_start=request.r_start,
            max_gas=request.max_gas,
            n_blocks=request.n_blocks,
            target=request.target,
        )
    except (FeemechError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return AttackCostResponse(eth=eth, n_blocks=request.n_blocks)


@app.post("/attack-cost", response_model=AttackCostResponse)
def attack_cost_endpoint(request: AttackCostRequest) -> AttackCostResponse:
    return run_attack_cost(request)


def run_demand_query(request: DemandQueryRequest) -> DemandQueryResponse:
    try:
        curve = curve_from_dict(request.curve)
        if request.query == "quantity":
            if request.price is None:
                raise FeemechError("quantity query needs price")
            result = {"gas": quantity(curve, request.price)}
        elif request.query == "mc_price":
            if request.supply is None:
                raise FeemechError("mc_price query needs supply")
            result = {"price_gwei": market_clearing_price(curve, request.supply)}
        elif request.query == "revenue":
            if request.price is None:
                raise FeemechError("revenue query needs price")
            result = {"revenue_gwei": revenue(curve, request.price)}
        else:
            if request.max_gas is None:
                raise FeemechError("monopoly query needs max_gas")
            point = monopoly_point(curve, request.max_gas)
            result = {
                "pbar_gwei": point.pbar,
                "p_star_gwei": point.p_star,
                "q_star_gas": point.q_star,
            }
    except (FeemechError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return DemandQueryResponse(result=result)


@app.post("/demand", response_model=DemandQueryResponse)
def demand_endpoint(request: DemandQueryRequest) -> DemandQueryResponse:
    return run_demand_query(request)


def run_suite(request: SuiteRequest) -> SuiteResponse:
    jobs = request.jobs or int(os.environ.get("FEEMECH_JOBS", "1"))
    results = acceptance.run_all(
        names=request.criteria, jobs=jobs, battery_count=request.battery_count
    )
    return SuiteResponse(
        results=[
            CriterionResultModel(
                name=r.name, passed=r.passed, detail=r.detail, seconds=r.seconds
            )
            for r in results
        ],
        passed=all(r.passed for r in results),
    )


@app.post("/suite", response_model=SuiteResponse)
def suite_endpoint(request: SuiteRequest) -> SuiteResponse:
    return run_suite(request)
