"""Default small-instance battery for the property checkers.

Roughly half of the instances model a demand spike (gas demanded at the
base fee exceeds the maximum block size), the other half a calm market.
Values are drawn either clearly above the base fee (at least one gwei of
headroom) or strictly below it, so that deviation searches over a
half-gwei bid grid can always separate the two regimes.

Everything is generated from one seeded RNG; the battery is a fixed,
reproducible artifact.
"""

from __future__ import annotations

import random

from .checks import Instance, InstanceTx
from .core import EnvParams

BID_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)
GAS_GRID = (1, 2)


def _low_values(r: float, mu: float) -> list[float]:
    ceiling = r + mu - 0.05
    values = [x / 4 for x in range(0, 21) if x / 4 < ceiling]
    return values or [0.0]


def _high_value(rng: random.Random, r: float) -> float:
    return min(5.0, r + rng.choice([1.0, 1.5, 2.0, 2.5, 3.0]))


def _instance(name, env, r, txs, max_evaluations=2_000_000) -> Instance:
    return Instance(
        env=env,
        base_fee=r,
        txs=tuple(txs),
        bid_grid=BID_GRID,
        gas_grid=GAS_GRID,
        max_fakes=1,
        max_evaluations=max_evaluations,
        name=name,
    )


def _spike(rng: random.Random, index: int) -> Instance:
    """High demand: gas wanted at the base fee strictly exceeds the block."""
    max_gas = rng.choice([2, 3, 4])
    mu = rng.choice([0.1, 0.25])
    r = rng.choice([0.5, 1.0, 1.5])
    env = EnvParams(
        max_block_size=max_gas, target_block_size=max(1, max_gas // 2), marginal_cost=mu
    )
    txs = []
    demand = 0
    i = 1
    while demand <= max_gas and len(txs) < 5:
        gas = rng.choice(GAS_GRID)
        truthful = rng.random() < 0.5
        value = _high_value(rng, r)
        txs.append(
            InstanceTx(
                id=f"t{i}",
                value=value,
                gas_limit=gas,
                bid_level=None if truthful else rng.choice(BID_GRID),
            )
        )
        demand += gas
        i += 1
    while demand <= max_gas:
        # Tiny grids can exhaust five slots; widen the last transaction.
        last = txs[-1]
        txs[-1] = InstanceTx(last.id, last.value, last.gas_limit + 1, last.bid_level)
        demand += 1
    if len(txs) < 5 and rng.random() < 0.5:
        txs.append(
            InstanceTx(
                id=f"t{i}",
                value=rng.choice(_low_values(r, mu)),
                gas_limit=rng.choice(GAS_GRID),
                bid_level=None,
            )
        )
    return _instance(f"battery-spike-{index:03d}", env, r, txs)


def _calm(rng: random.Random, index: int) -> Instance:
    """Demand at the base fee fits the block; high values fill at most the block."""
    max_gas = rng.choice([2, 3, 4])
    mu = rng.choice([0.1, 0.25])
    r = rng.choice([0.5, 1.0, 1.5])
    env = EnvParams(
        max_block_size=max_gas, target_block_size=max(1, max_gas // 2), marginal_cost=mu
    )
    n = rng.randint(1, 5)
    txs = []
    high_gas = 0
    for i in range(1, n + 1):
        gas = rng.choice(GAS_GRID)
        truthful = rng.random() < 0.5
        if high_gas + gas <= max_gas and rng.random() < 0.7:
            value = _high_value(rng, r)
            high_gas += gas
        else:
            value = rng.choice(_low_values(r, mu))
        txs.append(
            InstanceTx(
                id=f"t{i}",
                value=value,
                gas_limit=gas,
                bid_level=None if truthful else rng.choice(BID_GRID),
            )
        )
    return _instance(f"battery-calm-{index:03d}", env, r, txs)


def default_battery(count: int = 200, seed: int = 1083) -> list[Instance]:
    """The reproducible instance suite used by the acceptance checks."""
    rng = random.Random(seed)
    instances = []
    for i in range(count):
        if i % 2 == 0:
            instances.append(_spike(rng, i))
        else:
            instances.append(_calm(rng, i))
    return instances


def vickrey_manipulation_instance() -> Instance:
    """Three equal-gas bids of 10, 8, 3 with room for all three.

    Charging every winner the lowest included bid invites a fake bid of 8
    that evicts the 3 and lifts the common price; net revenue jumps from
    9 to 16.
    """
    env = EnvParams(max_block_size=3, target_block_size=1, marginal_cost=0.0)
    txs = (
        InstanceTx(id="a", value=10.0, gas_limit=1),
        InstanceTx(id="b", value=8.0, gas_limit=1),
        InstanceTx(id="c", value=3.0, gas_limit=1),
    )
    return Instance(
        env=env,
        base_fee=0.0,
        txs=txs,
        bid_grid=(0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0),
        gas_grid=(1,),
        max_fakes=2,
        name="vickrey-manipulation",
    )


def tipless_coalition_instance(mu: float = 0.25) -> Instance:
    """Two eligible transactions, gas 1 and 2, under a 2-gas block.

    Gas-max packing picks the low-value 2-gas transaction; a coalition
    that includes the high-value 1-gas transaction instead gains one
    gwei of joint utility.  The bid grid keeps both transactions
    eligible, which is the regime the packing rule was designed for.
    """
    r = 1.0 - mu
    env = EnvParams(max_block_size=2, target_block_size=1, marginal_cost=mu)
    txs = (
        InstanceTx(id="a", value=2.0, gas_limit=1),
        InstanceTx(id="b", value=1.0, gas_limit=2),
    )
    return Instance(
        env=env,
        base_fee=r,
        txs=txs,
        bid_grid=(1.0, 2.0),
        gas_grid=(1,),
        max_fakes=1,
        name="tipless-coalition",
    )
