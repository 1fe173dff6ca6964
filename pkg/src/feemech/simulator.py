"""Multi-block trajectory engine.

Two execution modes:

* ``fluid``: demand is a curve and blocks absorb exactly the gas
  demanded at the going price (capped by the block size).  This is the
  deterministic continuum model behind the worked trajectory tables and
  the attack-cost arithmetic.
* ``discrete``: each period's curve is discretized into an actual
  mempool, users bid through their strategy, the miner builds a block,
  and settlement is computed transaction by transaction.

Each block advances the base fee through the configured update rule.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .agents import (
    BaseFeeCrashThenMonopoly,
    FakePadding,
    HonestMyopic,
    MinerStrategy,
    PriceSetting,
    QuantitySetting,
    Truthful1559,
    UserStrategy,
    miner_act,
    miner_strategy_from_dict,
    miner_strategy_to_dict,
    user_strategy_from_dict,
    user_strategy_to_dict,
)
from .basefee import (
    SlidingWindow,
    UpdateRule,
    base_fee_from_history,
    next_base_fee,
    rule_from_dict,
    rule_to_dict,
)
from .core import (
    Block,
    ChainState,
    EnvParams,
    FeemechError,
    FpaBid,
    Mempool,
    Transaction,
)
from .demand import (
    DemandCurve,
    curve_from_dict,
    is_excessively_low,
    market_clearing_price,
    mempool_from_curve,
    monopoly_point,
    quantity,
)
from .mechanisms import (
    Beos,
    Blended,
    FPA_FAMILY,
    FeeBurningFpa,
    M1559,
    M1559R,
    MechanismSpec,
    FirstPrice,
    Smoothed,
    Tipless,
    Vickrey,
    mechanism_from_dict,
    mechanism_to_dict,
    settle,
)

GWEI_PER_ETH = 1e9


class ConfigError(FeemechError):
    """Scenario cannot be run as configured."""


@dataclass(frozen=True)
class Period:
    demand: DemandCurve
    miner: MinerStrategy = HonestMyopic()
    user: UserStrategy = Truthful1559()


@dataclass(frozen=True)
class Scenario:
    env: EnvParams
    mechanism: MechanismSpec
    update_rule: UpdateRule
    periods: tuple[Period, ...]
    blocks_per_period: int = 1
    mode: str = "fluid"
    seed: int = 0
    tx_gas: int = 25_000
    price_grid_step: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        if not self.periods:
            raise ConfigError("scenario needs at least one period")
        if self.blocks_per_period < 1:
            raise ConfigError("blocks_per_period must be >= 1")
        if self.mode not in ("fluid", "discrete"):
            raise ConfigError(f"unknown mode: {self.mode!r}")

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "env": self.env.to_dict(),
            "mechanism": mechanism_to_dict(self.mechanism),
            "update_rule": rule_to_dict(self.update_rule),
            "periods": [
                {
                    "demand": p.demand.to_dict(),
                    "miner": miner_strategy_to_dict(p.miner),
                    "user": user_strategy_to_dict(p.user),
                }
                for p in self.periods
            ],
            "blocks_per_period": self.blocks_per_period,
            "mode": self.mode,
            "seed": self.seed,
            "tx_gas": self.tx_gas,
            "price_grid_step": self.price_grid_step,
        }

    @staticmethod
    def from_dict(data: dict) -> "Scenario":
        allowed = {
            "schema_version",
            "name",
            "env",
            "mechanism",
            "update_rule",
            "periods",
            "blocks_per_period",
            "mode",
            "seed",
            "tx_gas",
            "price_grid_step",
        }
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        if data.get("schema_version") != 1:
            raise ConfigError("unsupported schema_version")
        periods = []
        for p in data["periods"]:
            extra = set(p) - {"demand", "miner", "user"}
            if extra:
                raise ConfigError(f"unknown period fields: {sorted(extra)}")
            periods.append(
                Period(
                    demand=curve_from_dict(p["demand"]),
                    miner=miner_strategy_from_dict(p.get("miner", {"miner": "honest"})),
                    user=user_strategy_from_dict(
                        p.get("user", {"user": "truthful_1559"})
                    ),
                )
            )
        return Scenario(
            env=EnvParams.from_dict(data["env"]),
            mechanism=mechanism_from_dict(data["mechanism"]),
            update_rule=rule_from_dict(data["update_rule"]),
            periods=tuple(periods),
            blocks_per_period=int(data.get("blocks_per_period", 1)),
            mode=str(data.get("mode", "fluid")),
            seed=int(data.get("seed", 0)),
            tx_gas=int(data.get("tx_gas", 25_000)),
            price_grid_step=float(data.get("price_grid_step", 1.0)),
            name=str(data.get("name", "")),
        )


@dataclass(frozen=True)
class TrajectoryRow:
    height: int
    base_fee: float
    block_gas: int
    burned: float
    miner_revenue: float
    forwarded: float
    mc_price: float
    excessively_low: bool

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "base_fee_gwei": self.base_fee,
            "block_gas": self.block_gas,
            "burned_gwei": self.burned,
            "miner_revenue_gwei": self.miner_revenue,
            "forwarded_gwei": self.forwarded,
            "mc_price_gwei": self.mc_price,
            "excessively_low": self.excessively_low,
        }


CSV_COLUMNS = [
    "height",
    "base_fee_gwei",
    "block_gas",
    "burned_gwei",
    "miner_revenue_gwei",
    "forwarded_gwei",
    "mc_price_gwei",
    "excessively_low",
]


@dataclass(frozen=True)
class TrajectoryReport:
    rows: tuple[TrajectoryRow, ...]
    blocks: tuple[Block, ...] = field(repr=False, default=())

    def base_fees(self) -> list[float]:
        return [r.base_fee for r in self.rows]

    def block_gases(self) -> list[int]:
        return [r.block_gas for r in self.rows]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            d = row.to_dict()
            writer.writerow(
                [
                    d["height"],
                    repr(d["base_fee_gwei"]),
                    d["block_gas"],
                    repr(d["burned_gwei"]),
                    repr(d["miner_revenue_gwei"]),
                    repr(d["forwarded_gwei"]),
                    repr(d["mc_price_gwei"]),
                    "true" if d["excessively_low"] else "false",
                ]
            )
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Fluid mode


def _honest_posted_price(spec, env, r, curve) -> float:
    """Per-gas price paid by included users when the miner is honest."""
    mu = env.marginal_cost
    if isinstance(spec, Tipless):
        return r + spec.hardcoded_tip
    if isinstance(spec, (M1559, M1559R, Smoothed, Blended)):
        return r + mu
    if isinstance(spec, Beos):
        return max(market_clearing_price(curve, env.max_block_size), spec.min_fee)
    # First-price style markets clear at the price set by the block size.
    return max(market_clearing_price(curve, env.max_block_size), mu)


def _split_posted_price(spec, r: float, posted: float) -> tuple[float, float, float]:
    """(to miner, burned, forwarded) per gas for a posted price."""
    if isinstance(spec, (M1559, Tipless)):
        return posted - r, r, 0.0
    if isinstance(spec, Smoothed):
        return posted - r, 0.0, r
    if isinstance(spec, Blended):
        return posted - r, spec.lam * r, (1.0 - spec.lam) * r
    if isinstance(spec, FeeBurningFpa):
        return 0.0, posted, 0.0
    if isinstance(spec, Beos):
        share = 1.0 / spec.window
        return posted * share, 0.0, posted * (1.0 - share)
    # FirstPrice, Vickrey, M1559R: the miner keeps everything.
    return posted, 0.0, 0.0


def _fluid_step(spec, env, r, curve, miner) -> tuple[int, int, float]:
    """(real gas, fake gas, posted price) for one fluid-mode block."""
    mu = env.marginal_cost
    max_gas = env.max_block_size
    base_floor = r + mu if not isinstance(spec, FPA_FAMILY) else mu

    if isinstance(miner, HonestMyopic):
        posted = _honest_posted_price(spec, env, r, curve)
        return int(round(min(quantity(curve, posted), max_gas))), 0, posted

    if isinstance(miner, PriceSetting):
        posted = max(miner.p, base_floor)
        return int(round(min(quantity(curve, posted), max_gas))), 0, posted

    if isinstance(miner, QuantitySetting):
        if miner.q > max_gas:
            raise ConfigError(f"quota {miner.q} exceeds max block size {max_gas}")
        posted = max(market_clearing_price(curve, miner.q), base_floor)
        gas = int(round(min(quantity(curve, posted), miner.q)))
        return gas, 0, posted

    if isinstance(miner, BaseFeeCrashThenMonopoly):
        if r > env.min_base_fee + 1e-9:
            return 0, 0, 0.0
        q = miner.monopoly_quantity
        if q is None:
            q = int(round(monopoly_point(curve, max_gas).q_star))
        return _fluid_step(spec, env, r, curve, QuantitySetting(q=q))

    if isinstance(miner, FakePadding):
        if miner.pad_to > max_gas:
            raise ConfigError(f"pad_to {miner.pad_to} exceeds max block size {max_gas}")
        posted = _honest_posted_price(spec, env, r, curve)
        real = int(round(min(quantity(curve, posted), max_gas)))
        fake = max(0, miner.pad_to - real)
        return real, fake, posted

    raise ConfigError(f"fluid mode does not support miner strategy {miner!r}")


def run_trajectory(scenario: Scenario) -> TrajectoryReport:
    """Advance the base fee block by block and record the trajectory."""
    env = scenario.env
    spec = scenario.mechanism
    rule = scenario.update_rule
    mu = env.marginal_cost
    target = env.target_block_size

    r = rule.r0
    rows: list[TrajectoryRow] = []
    blocks: list[Block] = []
    height = 1
    for period_idx, period in enumerate(scenario.periods):
        for _ in range(scenario.blocks_per_period):
            mc = market_clearing_price(period.demand, target)
            low = is_excessively_low(period.demand, r, mu, env.max_block_size)
            if scenario.mode == "fluid":
                real_gas, fake_gas, posted = _fluid_step(
                    spec, env, r, period.demand, period.miner
                )
                pay, burn, forward = _split_posted_price(spec, r, posted)
                gas = real_gas + fake_gas
                burned = burn * gas
                forwarded = forward * gas
                revenue = pay * real_gas - (burn + forward) * fake_gas
                txs = []
                if real_gas:
                    txs.append(
                        Transaction(
                            id=f"flow-{height}",
                            gas_limit=real_gas,
                            value=posted,
                            bid_params=FpaBid(gas_price=posted),
                        )
                    )
                if fake_gas:
                    txs.append(
                        Transaction(
                            id=f"pad-{height}",
                            gas_limit=fake_gas,
                            value=0.0,
                            bid_params=FpaBid(gas_price=posted),
                            is_fake=True,
                        )
                    )
                block = Block(height=height, base_fee=r, txs=tuple(txs))
            else:
                pool = mempool_from_curve(
                    period.demand,
                    scenario.tx_gas,
                    scenario.price_grid_step,
                    seed=scenario.seed + height,
                )
                bound = Mempool(
                    tx.with_bid(
                        _user_bid_for(period.user, spec, tx.value, r, mu)
                    )
                    for tx in pool
                )
                fakes, block = miner_act(period.miner, spec, _chain_at(blocks, env, r), bound, mode="greedy")
                report = settle(spec, _chain_at(blocks, env, r), block)
                gas = block.gas_used
                burned = report.burned_total
                forwarded = report.forwarded_total
                fake_cost = sum(
                    (e.burn + e.forward) * e.gas for e in report.entries if e.is_fake
                )
                revenue = report.miner_revenue - fake_cost
            rows.append(
                TrajectoryRow(
                    height=height,
                    base_fee=r,
                    block_gas=block.gas_used,
                    burned=burned,
                    miner_revenue=revenue,
                    forwarded=forwarded,
                    mc_price=mc,
                    excessively_low=low,
                )
            )
            blocks.append(block)
            if isinstance(rule, SlidingWindow):
                # Young chains use whatever history exists; the window
                # only starts sliding once it is full.
                r = base_fee_from_history(rule, blocks, target)
            else:
                r = next_base_fee(rule, r, block, target, history=blocks)
            height += 1
    return TrajectoryReport(rows=tuple(rows), blocks=tuple(blocks))


def _chain_at(blocks: Sequence[Block], env: EnvParams, r: float) -> ChainState:
    return ChainState(blocks=tuple(blocks), env=env, next_base_fee=r)


def _user_bid_for(strategy, spec, value, r, mu):
    from .agents import recommended_bid

    return recommended_bid(strategy, value, r, mu)


# ---------------------------------------------------------------------------
# Oscillation detection


@dataclass(frozen=True)
class CycleDescriptor:
    length: int
    pattern: tuple[tuple[float, int], ...]  # (base_fee, block_gas) pairs

    def to_dict(self) -> dict:
        return {"length": self.length, "pattern": [list(p) for p in self.pattern]}


def detect_oscillation(
    report: TrajectoryReport, min_cycle: int = 2
) -> Optional[CycleDescriptor]:
    """Shortest repeating (base fee, block gas) cycle in the trailing half.

    Cycles shorter than ``min_cycle`` (fixed points in particular) report
    as no oscillation.
    """
    if min_cycle < 1:
        raise ValueError("min_cycle must be >= 1")
    if len(report.rows) < 2 * min_cycle:
        raise ValueError("report too short for the requested cycle length")
    tail = [(row.base_fee, row.block_gas) for row in report.rows[len(report.rows) // 2:]]

    def matches(period: int) -> bool:
        for i in range(len(tail) - period):
            a, b = tail[i], tail[i + period]
            if a[1] != b[1] or not math.isclose(a[0], b[0], rel_tol=1e-9, abs_tol=1e-12):
                return False
        return True

    for period in range(1, len(tail) // 2 + 1):
        if matches(period):
            if period < min_cycle:
                return None
            return CycleDescriptor(length=period, pattern=tuple(tail[-period:]))
    return None


# ---------------------------------------------------------------------------
# Attack cost and cartel comparison


def attack_cost(
    rule: UpdateRule,
    r_start: float,
    max_gas: int,
    n_blocks: int,
    target: Optional[int] = None,
) -> float:
    """Cumulative base fee burned by ``n_blocks`` consecutive full blocks, in ETH.

    The attacker pays the base fee on every unit of gas; each full block
    raises the next block's fee through the update rule.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    target = target if target is not None else max_gas // 2
    total = 0.0
    r = r_start
    height = 1
    blocks: list[Block] = []
    for _ in range(n_blocks):
        total += r * max_gas
        filler = Transaction(
            id=f"atk-{height}", gas_limit=max_gas, value=0.0, bid_params=FpaBid(r)
        )
        block = Block(height=height, base_fee=r, txs=(filler,))
        blocks.append(block)
        r = next_base_fee(rule, r, block, target, history=blocks)
        height += 1
    return total / GWEI_PER_ETH


@dataclass(frozen=True)
class CartelRow:
    strategy: str
    total_miner_revenue: float
    total_burned: float
    avg_base_fee: float

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "total_miner_revenue_gwei": self.total_miner_revenue,
            "total_burned_gwei": self.total_burned,
            "avg_base_fee_gwei": self.avg_base_fee,
        }


def cartel_comparison(
    base_scenario: Scenario, strategies: Sequence[MinerStrategy], horizon: int
) -> list[CartelRow]:
    """Cumulative revenue/burn of each miner strategy over a fixed horizon.

    Demand must be stationary: the base scenario supplies exactly one
    period, which is repeated ``horizon`` times per strategy.
    """
    if len(base_scenario.periods) != 1:
        raise ConfigError("cartel comparison needs a single stationary period")
    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    rows = []
    for strategy in strategies:
        label = miner_strategy_to_dict(strategy)["miner"]
        if horizon == 0:
            rows.append(CartelRow(label, 0.0, 0.0, 0.0))
            continue
        period = Period(
            demand=base_scenario.periods[0].demand,
            miner=strategy,
            user=base_scenario.periods[0].user,
        )
        scenario = Scenario(
            env=base_scenario.env,
            mechanism=base_scenario.mechanism,
            update_rule=base_scenario.update_rule,
            periods=(period,),
            blocks_per_period=horizon,
            mode=base_scenario.mode,
            seed=base_scenario.seed,
            tx_gas=base_scenario.tx_gas,
            price_grid_step=base_scenario.price_grid_step,
            name=f"{base_scenario.name}:{label}",
        )
        report = run_trajectory(scenario)
        rows.append(
            CartelRow(
                strategy=label,
                total_miner_revenue=sum(r.miner_revenue for r in report.rows),
                total_burned=sum(r.burned for r in report.rows),
                avg_base_fee=sum(r.base_fee for r in report.rows) / len(report.rows),
            )
        )
    return rows
