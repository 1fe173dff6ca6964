import json

import pytest

from feemech.core import (
    Block,
    ChainState,
    DuplicateTxId,
    EnvParams,
    EscalatorBid,
    FeeCapTipBid,
    FpaBid,
    HeightGap,
    Mempool,
    OversizeBlock,
    Transaction,
    append_block,
    block_gas,
    to_json,
)


def tx(tx_id, gas=21_000, value=50.0, price=40.0):
    return Transaction(id=tx_id, gas_limit=gas, value=value, bid_params=FpaBid(price))


def test_block_gas_empty():
    block = Block(height=1, base_fee=0.0, txs=())
    assert block_gas(block) == 0


def test_block_gas_two_transfers():
    block = Block(height=1, base_fee=0.0, txs=(tx("a"), tx("b")))
    assert block_gas(block) == 42_000
    assert block.gas_used == 42_000


def test_block_rejects_wrong_cached_gas():
    with pytest.raises(ValueError):
        Block(height=1, base_fee=0.0, txs=(tx("a"),), gas_used=123)


def test_block_rejects_duplicate_ids():
    with pytest.raises(DuplicateTxId):
        Block(height=1, base_fee=0.0, txs=(tx("a"), tx("a")))


def test_append_block_extends_without_mutation():
    env = EnvParams(max_block_size=50_000, target_block_size=25_000)
    genesis = Block(height=1, base_fee=1.0, txs=())
    chain = ChainState(blocks=(genesis,), env=env, next_base_fee=1.0)
    grown = append_block(chain, Block(height=2, base_fee=1.0, txs=(tx("a"),)))
    assert len(grown.blocks) == 2
    assert len(chain.blocks) == 1  # input untouched


def test_append_block_accepts_exactly_full_block():
    env = EnvParams(max_block_size=21_000, target_block_size=10_500)
    chain = ChainState(blocks=(), env=env, next_base_fee=1.0)
    grown = append_block(chain, Block(height=1, base_fee=1.0, txs=(tx("a"),)))
    assert grown.blocks[-1].gas_used == env.max_block_size


def test_append_block_rejects_oversize():
    env = EnvParams(max_block_size=20_999, target_block_size=10_000)
    chain = ChainState(blocks=(), env=env, next_base_fee=1.0)
    with pytest.raises(OversizeBlock):
        append_block(chain, Block(height=1, base_fee=1.0, txs=(tx("a"),)))


def test_append_block_rejects_height_gap():
    env = EnvParams(max_block_size=50_000, target_block_size=25_000)
    chain = ChainState(blocks=(), env=env, next_base_fee=1.0)
    with pytest.raises(HeightGap):
        append_block(chain, Block(height=5, base_fee=1.0, txs=()))


def test_replaying_blocks_gives_identical_chain():
    env = EnvParams(max_block_size=50_000, target_block_size=25_000)
    blocks = [
        Block(height=1, base_fee=1.0, txs=(tx("a"),)),
        Block(height=2, base_fee=1.0, txs=(tx("b"), tx("c"))),
    ]

    def replay():
        chain = ChainState(blocks=(), env=env, next_base_fee=1.0)
        for b in blocks:
            chain = append_block(chain, b)
        return chain

    assert replay() == replay()


def test_mempool_sorts_by_id_and_rejects_duplicates():
    pool = Mempool([tx("b"), tx("a")])
    assert [t.id for t in pool] == ["a", "b"]
    with pytest.raises(DuplicateTxId):
        Mempool([tx("a"), tx("a")])


def test_mempool_add_without_get():
    pool = Mempool([tx("a")])
    bigger = pool.add(tx("b"))
    assert len(pool) == 1 and len(bigger) == 2
    assert bigger.get("b").id == "b"
    assert [t.id for t in bigger.without("a")] == ["b"]


def test_escalator_bid_interpolation_window():
    bid = EscalatorBid(start_height=10, start_bid=100.0, end_height=20, end_bid=150.0)
    assert bid.bid_at(9) is None
    assert bid.bid_at(10) == 100.0
    assert bid.bid_at(13) == 115.0
    assert bid.bid_at(20) == 150.0
    assert bid.bid_at(21) is None


def test_transaction_json_round_trip():
    original = Transaction(
        id="a", gas_limit=21_000, value=55.5, bid_params=FeeCapTipBid(fee_cap=60.0, tip=2.0)
    )
    again = Transaction.from_dict(json.loads(to_json(original)))
    assert again == original


def test_chain_json_round_trip():
    env = EnvParams(max_block_size=50_000, target_block_size=25_000, marginal_cost=0.5)
    chain = ChainState(
        blocks=(Block(height=1, base_fee=2.0, txs=(tx("a"),)),),
        env=env,
        next_base_fee=2.25,
    )
    assert ChainState.from_dict(json.loads(to_json(chain))) == chain


def test_json_field_names_are_stable():
    data = tx("a").to_dict()
    assert set(data) == {"id", "gas_limit", "value", "bid_params", "is_fake"}
    block = Block(height=1, base_fee=0.0, txs=()).to_dict()
    assert set(block) == {"height", "base_fee", "txs", "gas_used"}


def test_env_invariants():
    with pytest.raises(ValueError):
        EnvParams(max_block_size=10, target_block_size=20)
    with pytest.raises(ValueError):
        EnvParams(max_block_size=10, target_block_size=5, marginal_cost=-1.0)


def test_redacted_view_strips_value():
    view = tx("a").redacted()
    assert not hasattr(view, "value")
    assert view.gas_limit == 21_000
