import pytest

from feemech.core import ChainState, EnvParams, FeeCapTipBid, FpaBid, Mempool, Transaction


@pytest.fixture
def small_env():
    return EnvParams(max_block_size=3, target_block_size=1, marginal_cost=0.0)


@pytest.fixture
def small_chain(small_env):
    return ChainState(blocks=(), env=small_env, next_base_fee=0.0)


@pytest.fixture
def fee_env():
    return EnvParams(max_block_size=100_000, target_block_size=50_000, marginal_cost=0.0)


@pytest.fixture
def fee_chain(fee_env):
    """Empty history with the next base fee pinned at 100 gwei."""
    return ChainState(blocks=(), env=fee_env, next_base_fee=100.0)


def fpa_mempool(*bids):
    """Equal-gas first-price mempool with ids a, b, c, ... and value = bid."""
    names = "abcdefghij"
    return Mempool(
        Transaction(id=names[i], gas_limit=1, value=b, bid_params=FpaBid(gas_price=b))
        for i, b in enumerate(bids)
    )


def cap_tip_tx(tx_id, value, fee_cap, tip, gas=1):
    return Transaction(
        id=tx_id,
        gas_limit=gas,
        value=value,
        bid_params=FeeCapTipBid(fee_cap=fee_cap, tip=tip),
    )
