"""Command-line front end.

The CLI is a thin client of the service layer: it marshals arguments
into the same pydantic request models the HTTP endpoints accept and
either calls the handlers in-process (default) or POSTs them to a
running server (``--server``).

Exit codes: 0 success, 1 counterexample found while ``--expect-holds``
was set (or a failing suite), 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from fastapi import HTTPException

from .service import app as service_app
from .service.models import (
    AttackCostRequest,
    CheckRequest,
    DemandQueryRequest,
    InstanceModel,
    ScenarioModel,
    SimulateRequest,
    SuiteRequest,
)

EXIT_OK = 0
EXIT_COUNTEREXAMPLE = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feemech",
        description="Transaction fee mechanism laboratory",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running feemech service; default runs in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a trajectory scenario")
    simulate.add_argument("--scenario", required=True, help="scenario JSON file")
    simulate.add_argument("--out", default=None, help="output file (default stdout)")
    simulate.add_argument("--format", choices=["json", "csv"], default="json")

    check = sub.add_parser("check", help="run a property checker on an instance")
    check.add_argument(
        "--property",
        required=True,
        choices=["mmic", "costly", "uic", "dominant", "oca", "equiv1559r"],
    )
    check.add_argument("--instance", required=True, help="instance JSON file")
    check.add_argument(
        "--mechanism",
        default=None,
        help="mechanism name (e.g. m1559) or JSON object with parameters",
    )
    check.add_argument("--gamma", type=float, default=None)
    check.add_argument(
        "--strategy",
        default=None,
        help="user strategy name (e.g. truthful_1559) or JSON object",
    )
    check.add_argument("--expect-holds", action="store_true")
    check.add_argument("--out", default=None)

    attack = sub.add_parser("attack-cost", help="cumulative burn of full blocks")
    attack.add_argument(
        "--rule", choices=["linear1559", "exponential", "taylor2"], default="linear1559"
    )
    attack.add_argument("--learning-rate", type=float, default=0.125)
    attack.add_argument("--r-start", type=float, default=1.0)
    attack.add_argument("--min-base-fee", type=float, default=1.0)
    attack.add_argument("--max-gas", type=int, default=25_000_000)
    attack.add_argument("--target", type=int, default=None)
    attack.add_argument("--n", type=int, required=True)

    demand = sub.add_parser("demand", help="query a demand curve")
    demand.add_argument("--intercept-gas", type=float, required=True)
    demand.add_argument("--slope-gas-per-gwei", type=float, required=True)
    group = demand.add_mutually_exclusive_group(required=True)
    group.add_argument("--quantity-at", type=float, default=None, metavar="PRICE")
    group.add_argument("--mc-price", type=float, default=None, metavar="SUPPLY")
    group.add_argument("--revenue-at", type=float, default=None, metavar="PRICE")
    group.add_argument("--monopoly", action="store_true")
    demand.add_argument("--max-gas", type=int, default=None)

    suite = sub.add_parser("suite", help="run the acceptance criteria battery")
    suite.add_argument(
        "--jobs",
        type=int,
        default=int(os.environ.get("FEEMECH_JOBS", "1")),
        help="worker processes for the theorem suite (env FEEMECH_JOBS)",
    )
    suite.add_argument("--battery-count", type=int, default=200)
    suite.add_argument(
        "--criteria", default=None, help="comma-separated criterion names"
    )

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _dump(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _spec_arg(raw: Optional[str], key: str) -> Optional[dict]:
    if raw is None:
        return None
    raw = raw.strip()
    if raw.startswith("{"):
        return json.loads(raw)
    return {key: raw}


class _Remote:
    """POST request models to a running service."""

    def __init__(self, base_url: str):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=600.0)

    def post(self, path: str, model) -> dict:
        response = self._client.post(path, json=model.model_dump())
        if response.status_code != 200:
            raise SystemExit(
                f"server error {response.status_code}: {response.text}"
            )
        return response.json()


def _simulate(args) -> int:
    request = SimulateRequest(
        scenario=ScenarioModel(**_load_json(args.scenario)), format=args.format
    )
    if args.server:
        payload = _Remote(args.server).post("/simulate", request)
    else:
        from .service.app import simulate_scenario

        payload = simulate_scenario(request).model_dump()
    if args.format == "csv":
        _emit(payload["csv"] or "", args.out)
    else:
        _emit(_dump({"rows": payload["rows"]}), args.out)
    return EXIT_OK


def _check(args) -> int:
    request = CheckRequest(
        property=args.property,
        instance=InstanceModel(**_load_json(args.instance)),
        mechanism=_spec_arg(args.mechanism, "mechanism"),
        gamma=args.gamma,
        strategy=_spec_arg(args.strategy, "user"),
    )
    if args.server:
        payload = _Remote(args.server).post("/check", request)
    else:
        from .service.app import run_check

        payload = run_check(request).model_dump()
    _emit(_dump(payload), args.out)
    if args.expect_holds and not payload["holds"]:
        return EXIT_COUNTEREXAMPLE
    return EXIT_OK


def _attack_cost(args) -> int:
    rule = {
        "rule": args.rule,
        "learning_rate": args.learning_rate,
        "r0": max(args.r_start, args.min_base_fee),
        "min_base_fee": args.min_base_fee,
    }
    request = AttackCostRequest(
        update_rule=rule,
        r_start=args.r_start,
        max_gas=args.max_gas,
        n_blocks=args.n,
        target=args.target,
    )
    if args.server:
        payload = _Remote(args.server).post("/attack-cost", request)
    else:
        from .service.app import run_attack_cost

        payload = run_attack_cost(request).model_dump()
    sys.stdout.write(f"{payload['eth']:.3f} ETH\n")
    return EXIT_OK


def _demand(args) -> int:
    curve = {
        "kind": "linear",
        "intercept_gas": args.intercept_gas,
        "slope_gas_per_gwei": args.slope_gas_per_gwei,
    }
    if args.quantity_at is not None:
        query, price, supply = "quantity", args.quantity_at, None
    elif args.mc_price is not None:
        query, price, supply = "mc_price", None, args.mc_price
    elif args.revenue_at is not None:
        query, price, supply = "revenue", args.revenue_at, None
    else:
        query, price, supply = "monopoly", None, None
    request = DemandQueryRequest(
        curve=curve, query=query, price=price, supply=supply, max_gas=args.max_gas
    )
    if args.server:
        payload = _Remote(args.server).post("/demand", request)
    else:
        from .service.app import run_demand_query

        payload = run_demand_query(request).model_dump()
    _emit(_dump(payload["result"]), None)
    return EXIT_OK


def _suite(args) -> int:
    names = args.criteria.split(",") if args.criteria else None
    request = SuiteRequest(
        jobs=args.jobs, battery_count=args.battery_count, criteria=names
    )
    if args.server:
        payload = _Remote(args.server).post("/suite", request)
        results = payload["results"]
        passed = payload["passed"]
        for r in results:
            status = "PASS" if r["passed"] else "FAIL"
            sys.stdout.write(
                f"{status} {r['name']} ({r['seconds']:.2f}s): {r['detail']}\n"
            )
    else:
        from .service.app import run_suite

        response = run_suite(request)
        for r in response.results:
            status = "PASS" if r.passed else "FAIL"
            sys.stdout.write(f"{status} {r.name} ({r.seconds:.2f}s): {r.detail}\n")
        passed = response.passed
    return EXIT_OK if passed else EXIT_COUNTEREXAMPLE


def _serve(args) -> int:
    import uvicorn

    uvicorn.run(service_app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _simulate,
        "check": _check,
        "attack-cost": _attack_cost,
        "demand": _demand,
        "suite": _suite,
        "serve": _serve,
    }
    try:
        return handlers[args.command](args)
    except HTTPException as exc:
        sys.stderr.write(f"error: {exc.detail}\n")
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
