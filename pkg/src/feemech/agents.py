"""Utility functions and the strategy catalog for users and miners.

Utilities follow the single-block model: a myopic miner maximizes net
revenue from the current block, a user maximizes value minus total gas
price, and the joint utility of a miner-user coalition counts all
transaction value not lost to burns, forwards, or gas costs (payments
between coalition members cancel).

Miner strategies cover the honest baseline plus the cartel playbook:
posting a price, restricting quantity, crashing the base fee with empty
blocks before switching to monopoly quantity, and padding blocks with
fake transactions to mask underfull blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .core import (
    Block,
    BidParams,
    CapOnlyBid,
    ChainState,
    EscalatorBid,
    FeeCapTipBid,
    FeemechError,
    FpaBid,
    Mempool,
    Transaction,
)
from .mechanisms import (
    Beos,
    FPA_FAMILY,
    MARGIN_EPS,
    MechanismSpec,
    Tipless,
    allocate,
    induced_bid,
    is_protocol_valid,
    settle,
)


class InfeasibleStrategy(FeemechError):
    """Strategy parameters exceed what the environment allows."""


# ---------------------------------------------------------------------------
# Utilities


def myopic_miner_utility(
    spec: MechanismSpec,
    chain: ChainState,
    mempool: Mempool,
    fakes: Iterable[Transaction],
    block: Block,
    mu: Optional[float] = None,
) -> float:
    """Net revenue of the miner from this block, in gwei.

    Real transactions pay the miner; fake ones cost the miner their burn
    and pay-forward (payments to itself cancel); every unit of gas costs
    ``mu``.
    """
    mu = chain.env.marginal_cost if mu is None else mu
    real_ids = {tx.id for tx in mempool}
    fake_ids = {tx.id for tx in fakes}
    for tx in block.txs:
        if tx.id not in real_ids and tx.id not in fake_ids:
            raise ValueError(f"block transaction {tx.id} is neither real nor fake")
    report = settle(spec, chain, block)
    utility = 0.0
    for entry in report.entries:
        if entry.tx_id in fake_ids:
            utility -= (entry.burn + entry.forward) * entry.gas
        else:
            utility += entry.payment * entry.gas
    utility -= mu * block.gas_used
    return utility


def user_utility(
    spec: MechanismSpec,
    chain: ChainState,
    mempool: Mempool,
    tx: Transaction,
    candidate_bid: BidParams,
    mu: Optional[float] = None,
    mode: str = "exact",
) -> float:
    """Utility of ``tx``'s creator when it joins the mempool with ``candidate_bid``.

    Runs the mechanism's allocation on the augmented mempool; the result
    is (value - total gas price) * gas when included and zero otherwise.
    """
    candidate = tx.with_bid(candidate_bid)
    pool = mempool.add(candidate)
    block = allocate(spec, chain, pool, mode=mode)
    if all(t.id != tx.id for t in block.txs):
        return 0.0
    report = settle(spec, chain, block)
    entry = report.entry(tx.id)
    return (tx.value - entry.user_price) * tx.gas_limit


def joint_utility(
    spec: MechanismSpec,
    chain: ChainState,
    block: Block,
    mu: Optional[float] = None,
) -> float:
    """Coalition utility of the miner plus the creators of included transactions.

    Payments and off-chain transfers cancel inside the coalition; burned
    and paid-forward revenue and gas costs are losses.  Fake transactions
    carry no creator value and are excluded.
    """
    mu = chain.env.marginal_cost if mu is None else mu
    report = settle(spec, chain, block)
    values = {tx.id: tx.value for tx in block.txs if not tx.is_fake}
    total = 0.0
    for entry in report.entries:
        if entry.tx_id not in values:
            continue
        total += (values[entry.tx_id] - entry.burn - entry.forward - mu) * entry.gas
    return total


# ---------------------------------------------------------------------------
# User strategies


@dataclass(frozen=True)
class Truthful1559:
    """Fee cap at the transaction's value, tip covering the miner's cost."""

    assumed_mu: Optional[float] = None


@dataclass(frozen=True)
class TruthfulTipless:
    pass


@dataclass(frozen=True)
class ShadedFpa:
    """Bid a fixed fraction of value in a first-price auction."""

    factor: float

    def __post_init__(self) -> None:
        if not (0.0 < self.factor <= 1.0):
            raise ValueError("factor must be in (0, 1]")


@dataclass(frozen=True)
class EscalatorLinear:
    """Escalating first-price bid from start_frac*value to end_frac*value."""

    start_height: int
    end_height: int
    start_frac: float = 0.5
    end_frac: float = 1.0


UserStrategy = Union[Truthful1559, TruthfulTipless, ShadedFpa, EscalatorLinear]


def recommended_bid(
    strategy: UserStrategy, value: float, r: float, mu: float
) -> BidParams:
    """Bid parameters the strategy prescribes for a transaction of this value."""
    if value < 0:
        raise ValueError("value must be >= 0")
    if isinstance(strategy, Truthful1559):
        tip = strategy.assumed_mu if strategy.assumed_mu is not None else mu
        return FeeCapTipBid(fee_cap=value, tip=tip)
    if isinstance(strategy, TruthfulTipless):
        return CapOnlyBid(fee_cap=value)
    if isinstance(strategy, ShadedFpa):
        return FpaBid(gas_price=strategy.factor * value)
    if isinstance(strategy, EscalatorLinear):
        return EscalatorBid(
            start_height=strategy.start_height,
            start_bid=strategy.start_frac * value,
            end_height=strategy.end_height,
            end_bid=strategy.end_frac * value,
        )
    raise TypeError(f"unknown strategy: {strategy!r}")


# ---------------------------------------------------------------------------
# Miner strategies


@dataclass(frozen=True)
class HonestMyopic:
    pass


@dataclass(frozen=True)
class QuantitySetting:
    """Include the highest bids up to a gas quota."""

    q: int

    def __post_init__(self) -> None:
        if self.q < 0:
            raise ValueError("q must be >= 0")


@dataclass(frozen=True)
class PriceSetting:
    """Include a transaction only if its bid meets the posted price."""

    p: float

    def __post_init__(self) -> None:
        if self.p < 0:
            raise ValueError("p must be >= 0")


@dataclass(frozen=True)
class BaseFeeCrashThenMonopoly:
    """Publish empty blocks until the base fee floors, then quantity-set.

    When ``monopoly_quantity`` is not given, the quota is estimated from
    the observed bids: the revenue-maximizing cutoff price over the
    bid-demand curve, capped by the block size.
    """

    crash_method: str = "empty_blocks"
    monopoly_quantity: Optional[int] = None

    def __post_init__(self) -> None:
        if self.crash_method != "empty_blocks":
            raise ValueError("only the empty_blocks crash method is modeled")


@dataclass(frozen=True)
class FakePadding:
    """Honest block, padded to a target size with fake transactions."""

    pad_to: int
    pad_bid: float


MinerStrategy = Union[
    HonestMyopic, QuantitySetting, PriceSetting, BaseFeeCrashThenMonopoly, FakePadding
]


def _bid_of(spec, tx, r, height):
    bid = induced_bid(spec, tx.redacted(), r, height)
    return bid


def _fill_by_bid(txs, capacity):
    chosen = []
    used = 0
    for tx, bid in txs:
        if used + tx.gas_limit <= capacity:
            chosen.append(tx)
            used += tx.gas_limit
    return chosen


def empirical_monopoly_quantity(bid_gas: list[tuple[float, int]], max_gas: int) -> int:
    """Revenue-maximizing quota over an observed bid-demand step curve."""
    if not bid_gas:
        return 0
    best_q, best_rev, best_p = 0, 0.0, 0.0
    for p in sorted({b for b, _ in bid_gas}, reverse=True):
        q = min(sum(g for b, g in bid_gas if b >= p), max_gas)
        rev = p * q
        if rev > best_rev + MARGIN_EPS:
            best_rev, best_q, best_p = rev, q, p
    return best_q


def make_fake_tx(spec: MechanismSpec, gas: int, bid: float, r: float, tag: str = "0") -> Transaction:
    """A block-valid fake transaction carrying the given scalar bid."""
    if isinstance(spec, FPA_FAMILY):
        params: BidParams = FpaBid(gas_price=bid)
    elif isinstance(spec, (Tipless, Beos)):
        params = CapOnlyBid(fee_cap=max(bid, r))
    else:
        # Fee cap at least the base fee keeps the transaction valid.
        params = FeeCapTipBid(fee_cap=max(r, bid), tip=max(0.0, bid - r))
    return Transaction(
        id=f"fake-{tag}", gas_limit=gas, value=0.0, bid_params=params, is_fake=True
    )


def miner_act(
    strategy: MinerStrategy,
    spec: MechanismSpec,
    chain: ChainState,
    mempool: Mempool,
    mu: Optional[float] = None,
    mode: str = "greedy",
) -> tuple[tuple[Transaction, ...], Block]:
    """Fake transactions created and block mined by a strategic miner."""
    env = chain.env
    r = chain.next_base_fee
    height = chain.next_height

    if isinstance(strategy, HonestMyopic):
        return (), allocate(spec, chain, mempool, mode=mode)

    valid = []
    for tx in mempool:
        bid = _bid_of(spec, tx, r, height)
        if bid is None or not is_protocol_valid(spec, tx.redacted(), r):
            continue
        valid.append((tx, bid))
    valid.sort(key=lambda pair: (-pair[1], pair[0].id))

    if isinstance(strategy, PriceSetting):
        eligible = [(tx, b) for tx, b in valid if b >= strategy.p - MARGIN_EPS]
        txs = _fill_by_bid(eligible, env.max_block_size)
        return (), Block(height=height, base_fee=r, txs=tuple(txs))

    if isinstance(strategy, QuantitySetting):
        if strategy.q > env.max_block_size:
            raise InfeasibleStrategy(
                f"quota {strategy.q} exceeds max block size {env.max_block_size}"
            )
        txs = _fill_by_bid(valid, strategy.q)
        return (), Block(height=height, base_fee=r, txs=tuple(txs))

    if isinstance(strategy, BaseFeeCrashThenMonopoly):
        if r > env.min_base_fee + MARGIN_EPS:
            return (), Block(height=height, base_fee=r, txs=())
        q = strategy.monopoly_quantity
        if q is None:
            q = empirical_monopoly_quantity(
                [(b, tx.gas_limit) for tx, b in valid], env.max_block_size
            )
        return miner_act(QuantitySetting(q=q), spec, chain, mempool, mu=mu, mode=mode)

    if isinstance(strategy, FakePadding):
        if strategy.pad_to > env.max_block_size:
            raise InfeasibleStrategy(
                f"pad_to {strategy.pad_to} exceeds max block size {env.max_block_size}"
            )
        block = allocate(spec, chain, mempool, mode=mode)
        deficit = strategy.pad_to - block.gas_used
        if deficit <= 0:
            return (), block
        fake = make_fake_tx(spec, deficit, strategy.pad_bid, r)
        txs = block.txs + (fake,)
        return (fake,), Block(height=height, base_fee=r, txs=txs)

    raise TypeError(f"unknown strategy: {strategy!r}")


# ---------------------------------------------------------------------------
# JSON forms for scenario files

_USER_NAMES = {
    "truthful_1559": Truthful1559,
    "truthful_tipless": TruthfulTipless,
    "shaded_fpa": ShadedFpa,
    "escalator_linear": EscalatorLinear,
}

_MINER_NAMES = {
    "honest": HonestMyopic,
    "quantity_setting": QuantitySetting,
    "price_setting": PriceSetting,
    "crash_then_monopoly": BaseFeeCrashThenMonopoly,
    "fake_padding": FakePadding,
}


def user_strategy_to_dict(strategy: UserStrategy) -> dict:
    for name, cls in _USER_NAMES.items():
        if isinstance(strategy, cls):
            return {"user": name, **strategy.__dict__}
    raise TypeError(f"unknown strategy: {strategy!r}")


def user_strategy_from_dict(data: dict) -> UserStrategy:
    name = data.get("user")
    if name not in _USER_NAMES:
        raise ValueError(f"unknown user strategy: {name!r}")
    fields_ = {k: v for k, v in data.items() if k != "user"}
    return _USER_NAMES[name](**fields_)


def miner_strategy_to_dict(strategy: MinerStrategy) -> dict:
    for name, cls in _MINER_NAMES.items():
        if isinstance(strategy, cls):
            return {"miner": name, **strategy.__dict__}
    raise TypeError(f"unknown strategy: {strategy!r}")


def miner_strategy_from_dict(data: dict) -> MinerStrategy:
    name = data.get("miner")
    if name not in _MINER_NAMES:
        raise ValueError(f"unknown miner strategy: {name!r}")
    fields_ = {k: v for k, v in data.items() if k != "miner"}
    return _MINER_NAMES[name](**fields_)
