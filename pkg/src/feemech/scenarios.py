"""Canonical scenarios used by the acceptance suite and shipped as examples.

Both demand-spike scenarios share the same shape: one calm period whose
market has converged (the base fee equals the clearing price for the
target block size), six periods of elevated demand, then a return to
calm.  The gradual variant doubles demand, which variable block sizes
absorb without the base fee ever being excessively low; the sharp
variant more than doubles it, producing a run of maxed-out blocks and
excessively low base fees until the fee catches up.
"""

from __future__ import annotations

from .basefee import Exponential, Linear1559
from .core import EnvParams
from .demand import EmpiricalDemand, LinearDemand
from .simulator import Period, Scenario

LOW_DEMAND = LinearDemand(intercept_gas=15_000_000, slope_gas_per_gwei=75_000)
HIGH_DEMAND = LinearDemand(intercept_gas=30_000_000, slope_gas_per_gwei=150_000)
SURGE_DEMAND = LinearDemand(intercept_gas=35_000_000, slope_gas_per_gwei=175_000)

TABLE_ENV = EnvParams(
    max_block_size=25_000_000,
    target_block_size=12_500_000,
    marginal_cost=0.0,
    min_base_fee=1.0,
)

# Clearing price of the low curve at the target block size.
CALM_BASE_FEE = 100.0 / 3.0


def _spike_scenario(high: LinearDemand, name: str) -> Scenario:
    from .mechanisms import M1559

    periods = (
        (Period(demand=LOW_DEMAND),)
        + tuple(Period(demand=high) for _ in range(6))
        + (Period(demand=LOW_DEMAND),)
    )
    return Scenario(
        env=TABLE_ENV,
        mechanism=M1559(),
        update_rule=Linear1559(r0=CALM_BASE_FEE, learning_rate=0.125, min_base_fee=1.0),
        periods=periods,
        blocks_per_period=1,
        mode="fluid",
        name=name,
    )


def gradual_spike_scenario() -> Scenario:
    """Demand doubles for six periods; blocks flex but never max out for long."""
    return _spike_scenario(HIGH_DEMAND, "gradual-spike")


def sharp_spike_scenario() -> Scenario:
    """Demand jumps 2.33x; the base fee is excessively low until period seven."""
    return _spike_scenario(SURGE_DEMAND, "sharp-spike")


GRADUAL_SPIKE_BASE_FEES = [33.33, 33.33, 37.5, 41.95, 46.65, 51.55, 56.59, 61.69]
GRADUAL_SPIKE_BLOCK_GAS_M = [12.5, 25.0, 24.38, 23.71, 23.0, 22.27, 21.51, 10.37]

SHARP_SPIKE_BASE_FEES_1_TO_7 = [33.33, 33.33, 37.5, 42.18, 47.46, 53.39, 60.06]
SHARP_SPIKE_EXCESSIVELY_LOW = [False, True, True, True, True, True, False, False]


def oscillation_scenario(r0: float = 100.0, blocks: int = 16) -> Scenario:
    """A 3/2 vs 2/3 adjustment rule over bids concentrated just above the fee.

    Every pending transaction has a fee cap in [1.1*r0, 1.4*r0].  At r0
    the whole mempool clears into a maximum-size block, multiplying the
    fee by 3/2; at 1.5*r0 nobody bids, the block is empty, and the fee
    falls back by 2/3.  The trajectory alternates forever.
    """
    import math

    from .mechanisms import M1559

    caps = EmpiricalDemand(
        tuple((1.1 * r0 + 0.01 * r0 * i, 2_000_000) for i in range(31))
    )
    return Scenario(
        env=TABLE_ENV,
        mechanism=M1559(),
        update_rule=Exponential(
            r0=r0, learning_rate=math.log(1.5), min_base_fee=1.0
        ),
        periods=(Period(demand=caps),),
        blocks_per_period=blocks,
        mode="fluid",
        name="oscillation",
    )


def monopoly_demand_scenario() -> Scenario:
    """Stationary demand whose monopoly quantity (10M gas) is below target."""
    from .mechanisms import M1559

    curve = LinearDemand(intercept_gas=20_000_000, slope_gas_per_gwei=150_000)
    return Scenario(
        env=EnvParams(
            max_block_size=25_000_000,
            target_block_size=12_500_000,
            marginal_cost=0.0,
            min_base_fee=0.001,
        ),
        mechanism=M1559(),
        update_rule=Linear1559(
            r0=CALM_BASE_FEE, learning_rate=0.125, min_base_fee=0.001
        ),
        periods=(Period(demand=curve),),
        blocks_per_period=1,
        mode="fluid",
        name="monopoly-demand",
    )
