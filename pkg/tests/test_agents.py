import itertools
import math

import pytest

from feemech.agents import (
    BaseFeeCrashThenMonopoly,
    EscalatorLinear,
    FakePadding,
    HonestMyopic,
    InfeasibleStrategy,
    PriceSetting,
    QuantitySetting,
    ShadedFpa,
    Truthful1559,
    TruthfulTipless,
    joint_utility,
    make_fake_tx,
    miner_act,
    miner_strategy_from_dict,
    miner_strategy_to_dict,
    myopic_miner_utility,
    recommended_bid,
    user_strategy_from_dict,
    user_strategy_to_dict,
    user_utility,
)
from feemech.core import (
    Block,
    CapOnlyBid,
    ChainState,
    EnvParams,
    FeeCapTipBid,
    FpaBid,
    Mempool,
    Transaction,
)
from feemech.demand import LinearDemand, mempool_from_curve
from feemech.mechanisms import (
    FeeBurningFpa,
    FirstPrice,
    M1559,
    Tipless,
    allocate,
    validate_block,
)

from conftest import cap_tip_tx, fpa_mempool


# ---------------------------------------------------------------------------
# utilities


def test_miner_utility_single_real_tx(fee_chain):
    pool = Mempool([cap_tip_tx("a", 200.0, 200.0, 4.0)])
    block = Block(height=1, base_fee=100.0, txs=pool.txs)
    assert myopic_miner_utility(M1559(), fee_chain, pool, (), block) == pytest.approx(4.0)


def test_fake_tx_costs_base_fee_plus_gas_cost(fee_chain):
    pool = Mempool([cap_tip_tx("a", 200.0, 200.0, 4.0)])
    fake = make_fake_tx(M1559(), 1, 150.0, 100.0)
    block = Block(
        height=1, base_fee=100.0, txs=tuple(sorted(pool.txs + (fake,), key=lambda t: t.id))
    )
    utility = myopic_miner_utility(M1559(), fee_chain, pool, (fake,), block)
    assert utility == pytest.approx(4.0 - 100.0)


def test_fake_cost_is_exactly_base_fee_plus_mu_per_gas():
    env = EnvParams(max_block_size=10, target_block_size=5, marginal_cost=0.5)
    chain = ChainState(blocks=(), env=env, next_base_fee=2.0)
    pool = Mempool([cap_tip_tx("a", 9.0, 9.0, 1.0, gas=2)])
    honest = allocate(M1559(), chain, pool)
    base = myopic_miner_utility(M1559(), chain, pool, (), honest)
    for gas in (1, 2, 3):
        fake = make_fake_tx(M1559(), gas, 5.0, 2.0)
        block = Block(
            height=1,
            base_fee=2.0,
            txs=tuple(sorted(honest.txs + (fake,), key=lambda t: t.id)),
        )
        utility = myopic_miner_utility(M1559(), chain, pool, (fake,), block)
        assert utility == pytest.approx(base - (2.0 + 0.5) * gas)


def test_fpa_miner_utility_is_sum_of_bids(small_chain):
    pool = fpa_mempool(10.0, 8.0, 3.0)
    block = Block(height=1, base_fee=0.0, txs=pool.txs)
    assert myopic_miner_utility(FirstPrice(), small_chain, pool, (), block) == 21.0


def test_user_utility_inclusion_and_exclusion(fee_chain):
    t = Transaction(id="t", gas_limit=1, value=200.0, bid_params=FeeCapTipBid(200.0, 0.0))
    included = user_utility(M1559(), fee_chain, Mempool([]), t, FeeCapTipBid(200.0, 0.0))
    assert included == pytest.approx(100.0)
    excluded = user_utility(M1559(), fee_chain, Mempool([]), t, FeeCapTipBid(50.0, 0.0))
    assert excluded == 0.0


def test_user_utility_fpa_bidding_value_nets_zero(small_chain):
    t = Transaction(id="t", gas_limit=1, value=10.0, bid_params=FpaBid(10.0))
    assert user_utility(FirstPrice(), small_chain, Mempool([]), t, FpaBid(10.0)) == 0.0


def test_joint_utility_examples(fee_chain, small_chain):
    assert joint_utility(M1559(), fee_chain, Block(height=1, base_fee=100.0, txs=())) == 0.0
    block = Block(
        height=1,
        base_fee=100.0,
        txs=(cap_tip_tx("a", 150.0, 150.0, 0.0), cap_tip_tx("b", 120.0, 120.0, 0.0)),
    )
    assert joint_utility(M1559(), fee_chain, block) == pytest.approx(70.0)
    burned = Block(
        height=1,
        base_fee=0.0,
        txs=(Transaction(id="a", gas_limit=1, value=10.0, bid_params=FpaBid(10.0)),),
    )
    assert joint_utility(FeeBurningFpa(), small_chain, burned) == pytest.approx(0.0)


def test_joint_utility_ignores_payment_routing(fee_chain):
    # First-price and lowest-bid pricing move different payments to the
    # miner, but payments cancel inside the coalition.
    from feemech.mechanisms import Vickrey

    block = Block(height=1, base_fee=0.0, txs=fpa_mempool(10.0, 8.0, 3.0).txs)
    env = EnvParams(max_block_size=3, target_block_size=1)
    chain = ChainState(blocks=(), env=env, next_base_fee=0.0)
    assert joint_utility(FirstPrice(), chain, block) == pytest.approx(
        joint_utility(Vickrey(), chain, block)
    )


# ---------------------------------------------------------------------------
# recommended bids


def test_truthful_bid_construction():
    bid = recommended_bid(Truthful1559(), 200.0, 100.0, 4.0)
    assert bid == FeeCapTipBid(fee_cap=200.0, tip=4.0)
    # induced bid is min(r + mu, v)
    tx = Transaction(id="t", gas_limit=1, value=200.0, bid_params=bid)
    from feemech.mechanisms import induced_bid

    assert induced_bid(M1559(), tx.redacted(), 100.0, 1) == pytest.approx(104.0)


def test_truthful_bid_cap_binds_below_base_fee():
    bid = recommended_bid(Truthful1559(), 50.0, 100.0, 4.0)
    tx = Transaction(id="t", gas_limit=1, value=50.0, bid_params=bid)
    from feemech.mechanisms import induced_bid

    assert induced_bid(M1559(), tx.redacted(), 100.0, 1) == pytest.approx(50.0)


def test_shaded_fpa_bid():
    assert recommended_bid(ShadedFpa(0.75), 10.0, 0.0, 0.0) == FpaBid(gas_price=7.5)


def test_tipless_and_escalator_bids():
    assert recommended_bid(TruthfulTipless(), 3.0, 1.0, 0.1) == CapOnlyBid(fee_cap=3.0)
    esc = recommended_bid(
        EscalatorLinear(start_height=5, end_height=9, start_frac=0.5, end_frac=1.0),
        10.0,
        0.0,
        0.0,
    )
    assert esc.bid_at(5) == 5.0 and esc.bid_at(9) == 10.0


# ---------------------------------------------------------------------------
# miner strategies


def curve_pool(curve, tx_gas=100_000):
    return mempool_from_curve(curve, tx_gas=tx_gas, price_grid_step=1.0, seed=1)


def test_honest_miner_never_fakes(fee_chain):
    pool = Mempool([cap_tip_tx("a", 200.0, 200.0, 4.0)])
    fakes, block = miner_act(HonestMyopic(), M1559(), fee_chain, pool)
    assert fakes == ()
    assert all(not t.is_fake for t in block.txs)


def test_quantity_setting_collects_monopoly_revenue():
    # Users facing a quantity-setting cartel bid the clearing price of
    # the restricted supply; the cartel then books the monopoly revenue.
    curve = LinearDemand(20_000_000, 150_000)
    env = EnvParams(max_block_size=12_500_000, target_block_size=6_250_000)
    chain = ChainState(blocks=(), env=env, next_base_fee=0.0)
    cutoff = 200.0 / 3.0  # revenue-maximizing price for this curve
    pool = Mempool(
        tx.with_bid(FpaBid(gas_price=min(tx.value, cutoff)))
        for tx in curve_pool(curve)
    )
    fakes, block = miner_act(QuantitySetting(q=10_000_000), FirstPrice(), chain, pool)
    assert fakes == ()
    assert block.gas_used <= 10_000_000
    revenue = sum(t.bid_params.gas_price * t.gas_limit for t in block.txs)
    assert revenue == pytest.approx(6.667e8, rel=0.02)
    lowest = min(t.bid_params.gas_price for t in block.txs)
    assert lowest == pytest.approx(cutoff, rel=0.02)


def test_price_setting_includes_only_bids_at_or_above_price(small_chain):
    pool = fpa_mempool(10.0, 8.0, 3.0)
    _, block = miner_act(PriceSetting(p=8.0), FirstPrice(), small_chain, pool)
    assert {t.id for t in block.txs} == {"a", "b"}


def test_quantity_setting_rejects_infeasible_quota(small_chain):
    with pytest.raises(InfeasibleStrategy):
        miner_act(QuantitySetting(q=10), FirstPrice(), small_chain, fpa_mempool(1.0))


def test_crash_strategy_mines_empty_until_floor():
    env = EnvParams(max_block_size=10, target_block_size=5, min_base_fee=1.0)
    pool = fpa_mempool(10.0, 8.0)
    high = ChainState(blocks=(), env=env, next_base_fee=33.333)
    _, block = miner_act(BaseFeeCrashThenMonopoly(), FirstPrice(), high, pool)
    assert block.txs == ()
    floored = ChainState(blocks=(), env=env, next_base_fee=1.0)
    _, block2 = miner_act(BaseFeeCrashThenMonopoly(), FirstPrice(), floored, pool)
    assert len(block2.txs) >= 1


def test_crash_block_count_from_start_fee():
    # empty blocks shrink the fee by 7/8 per block until the 1-gwei floor
    n = math.ceil(math.log(1.0 / 33.333) / math.log(7 / 8))
    assert n == 27
    fee = 33.333
    count = 0
    while fee > 1.0 + 1e-9:
        fee = max(1.0, fee * 7 / 8)
        count += 1
    assert count == n


def test_fake_padding_produces_valid_full_block(fee_chain):
    pool = Mempool([cap_tip_tx("a", 200.0, 200.0, 4.0, gas=10_000)])
    strategy = FakePadding(pad_to=100_000, pad_bid=50.0)
    fakes, block = miner_act(strategy, M1559(), fee_chain, pool)
    assert len(fakes) == 1 and fakes[0].is_fake
    assert block.gas_used == 100_000
    assert validate_block(M1559(), fee_chain, block) == []


def test_strategy_json_round_trips():
    strategies = [
        HonestMyopic(),
        QuantitySetting(q=5),
        PriceSetting(p=2.5),
        BaseFeeCrashThenMonopoly(),
        FakePadding(pad_to=10, pad_bid=1.0),
    ]
    for s in strategies:
        assert miner_strategy_from_dict(miner_strategy_to_dict(s)) == s
    users = [Truthful1559(), TruthfulTipless(), ShadedFpa(0.75), EscalatorLinear(1, 5)]
    for u in users:
        assert user_strategy_from_dict(user_strategy_to_dict(u)) == u


def test_honest_beats_enumerated_deviations_on_small_instances():
    # Executable form of the single-block optimality claims for the
    # first-price and base-fee mechanisms.
    env = EnvParams(max_block_size=3, target_block_size=1, marginal_cost=0.0)
    r = 1.0
    chain = ChainState(blocks=(), env=env, next_base_fee=r)
    pool = Mempool(
        [
            cap_tip_tx("a", 5.0, 5.0, 2.0),
            cap_tip_tx("b", 4.0, 4.0, 1.0, gas=2),
            cap_tip_tx("c", 3.0, 3.0, 0.5),
        ]
    )
    honest = allocate(M1559(), chain, pool, mode="exact")
    best = myopic_miner_utility(M1559(), chain, pool, (), honest)
    for k in range(4):
        for combo in itertools.combinations(pool.txs, k):
            if sum(t.gas_limit for t in combo) > 3:
                continue
            block = Block(height=1, base_fee=r, txs=tuple(sorted(combo, key=lambda t: t.id)))
            assert myopic_miner_utility(M1559(), chain, pool, (), block) <= best + 1e-9
