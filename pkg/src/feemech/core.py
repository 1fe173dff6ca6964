"""Core domain records shared by every other module.

Everything here is an immutable value: transactions, blocks, chain
history, and the environment parameters of the fee market.  Prices are
floats in gwei per unit of gas; gas quantities are integers.

A transaction's private value is visible to checkers and the simulator
but must never reach mechanism rules.  The ``TxView`` record is the
redacted form handed to allocation/payment/burning code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Union


class FeemechError(Exception):
    """Base class for domain errors."""


class OversizeBlock(FeemechError):
    """Block gas exceeds the maximum block size."""


class HeightGap(FeemechError):
    """Appended block height does not extend the chain by exactly one."""


class DuplicateTxId(FeemechError):
    """Two transactions share an id within one mempool or block."""


# ---------------------------------------------------------------------------
# Bid parameter variants


@dataclass(frozen=True)
class FpaBid:
    """Single gas price, as in a first-price auction."""

    gas_price: float

    def __post_init__(self) -> None:
        if self.gas_price < 0:
            raise ValueError("gas_price must be >= 0")


@dataclass(frozen=True)
class FeeCapTipBid:
    """Fee cap plus tip; the bid relative to a base fee r is min(r + tip, fee_cap)."""

    fee_cap: float
    tip: float

    def __post_init__(self) -> None:
        if self.fee_cap < 0 or self.tip < 0:
            raise ValueError("fee_cap and tip must be >= 0")


@dataclass(frozen=True)
class CapOnlyBid:
    """Fee cap only; the tip is hard-coded by the mechanism."""

    fee_cap: float

    def __post_init__(self) -> None:
        if self.fee_cap < 0:
            raise ValueError("fee_cap must be >= 0")


@dataclass(frozen=True)
class EscalatorBid:
    """Linearly interpolated bid between two block heights."""

    start_height: int
    start_bid: float
    end_height: int
    end_bid: float

    def __post_init__(self) -> None:
        if self.start_height > self.end_height:
            raise ValueError("start_height must be <= end_height")
        if self.start_bid < 0 or self.end_bid < 0:
            raise ValueError("bids must be >= 0")

    def bid_at(self, height: int) -> Optional[float]:
        """Interpolated bid at ``height``, or None outside the valid window."""
        if height < self.start_height or height > self.end_height:
            return None
        if self.end_height == self.start_height:
            return self.start_bid
        frac = (height - self.start_height) / (self.end_height - self.start_height)
        return self.start_bid + frac * (self.end_bid - self.start_bid)


BidParams = Union[FpaBid, FeeCapTipBid, CapOnlyBid, EscalatorBid]

_BID_KINDS = {
    "fpa": FpaBid,
    "fee_cap_tip": FeeCapTipBid,
    "cap_only": CapOnlyBid,
    "escalator": EscalatorBid,
}


def bid_params_to_dict(bid: BidParams) -> dict:
    for kind, cls in _BID_KINDS.items():
        if isinstance(bid, cls):
            return {"kind": kind, **bid.__dict__}
    raise TypeError(f"unknown bid params: {bid!r}")


def bid_params_from_dict(data: dict) -> BidParams:
    kind = data.get("kind")
    if kind not in _BID_KINDS:
        raise ValueError(f"unknown bid kind: {kind!r}")
    fields_ = {k: v for k, v in data.items() if k != "kind"}
    return _BID_KINDS[kind](**fields_)


# ---------------------------------------------------------------------------
# Environment


@dataclass(frozen=True)
class EnvParams:
    """Fee market environment: block sizes, marginal cost, base fee floor."""

    max_block_size: int
    target_block_size: int
    marginal_cost: float = 0.0
    min_base_fee: float = 0.0

    def __post_init__(self) -> None:
        if self.target_block_size < 1:
            raise ValueError("target_block_size must be >= 1")
        if self.max_block_size < self.target_block_size:
            raise ValueError("max_block_size must be >= target_block_size")
        if self.marginal_cost < 0:
            raise ValueError("marginal_cost must be >= 0")
        if self.min_base_fee < 0:
            raise ValueError("min_base_fee must be >= 0")

    def to_dict(self) -> dict:
        return {
            "max_block_size": self.max_block_size,
            "target_block_size": self.target_block_size,
            "marginal_cost": self.marginal_cost,
            "min_base_fee": self.min_base_fee,
        }

    @staticmethod
    def from_dict(data: dict) -> "EnvParams":
        return EnvParams(
            max_block_size=int(data["max_block_size"]),
            target_block_size=int(data["target_block_size"]),
            marginal_cost=float(data.get("marginal_cost", 0.0)),
            min_base_fee=float(data.get("min_base_fee", 0.0)),
        )


# ---------------------------------------------------------------------------
# Transactions


@dataclass(frozen=True)
class Transaction:
    """One pending transaction.

    ``value`` is the creator's private willingness to pay (gwei/gas).  It
    is used only by utility computations and the simulator; mechanism
    rules must consume the redacted :class:`TxView` instead.
    """

    id: str
    gas_limit: int
    value: float
    bid_params: BidParams
    is_fake: bool = False

    def __post_init__(self) -> None:
        if self.gas_limit < 1:
            raise ValueError("gas_limit must be >= 1")
        if self.value < 0:
            raise ValueError("value must be >= 0")

    def redacted(self) -> "TxView":
        return TxView(
            id=self.id,
            gas_limit=self.gas_limit,
            bid_params=self.bid_params,
            is_fake=self.is_fake,
        )

    def with_bid(self, bid_params: BidParams) -> "Transaction":
        return replace(self, bid_params=bid_params)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "gas_limit": self.gas_limit,
            "value": self.value,
            "bid_params": bid_params_to_dict(self.bid_params),
            "is_fake": self.is_fake,
        }

    @staticmethod
    def from_dict(data: dict) -> "Transaction":
        return Transaction(
            id=str(data["id"]),
            gas_limit=int(data["gas_limit"]),
            value=float(data["value"]),
            bid_params=bid_params_from_dict(data["bid_params"]),
            is_fake=bool(data.get("is_fake", False)),
        )


@dataclass(frozen=True)
class TxView:
    """Redacted transaction as seen by mechanism rules: no private value."""

    id: str
    gas_limit: int
    bid_params: BidParams
    is_fake: bool = False


# ---------------------------------------------------------------------------
# Blocks and chain state


def _check_unique_ids(txs: Iterable[Transaction], where: str) -> None:
    seen = set()
    for tx in txs:
        if tx.id in seen:
            raise DuplicateTxId(f"duplicate transaction id {tx.id!r} in {where}")
        seen.add(tx.id)


@dataclass(frozen=True)
class Block:
    """Ordered transactions plus the block's base fee and height."""

    height: int
    base_fee: float
    txs: tuple[Transaction, ...]
    gas_used: int = field(default=-1)

    def __post_init__(self) -> None:
        _check_unique_ids(self.txs, f"block {self.height}")
        total = sum(tx.gas_limit for tx in self.txs)
        if self.gas_used == -1:
            object.__setattr__(self, "gas_used", total)
        elif self.gas_used != total:
            raise ValueError(
                f"gas_used={self.gas_used} does not match recomputed sum {total}"
            )
        if self.base_fee < 0:
            raise ValueError("base_fee must be >= 0")

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "base_fee": self.base_fee,
            "txs": [tx.to_dict() for tx in self.txs],
            "gas_used": self.gas_used,
        }

    @staticmethod
    def from_dict(data: dict) -> "Block":
        return Block(
            height=int(data["height"]),
            base_fee=float(data["base_fee"]),
            txs=tuple(Transaction.from_dict(t) for t in data["txs"]),
            gas_used=int(data.get("gas_used", -1)),
        )


def block_gas(block: Block) -> int:
    """Total gas consumed by the block's transactions."""
    return sum(tx.gas_limit for tx in block.txs)


@dataclass(frozen=True)
class ChainState:
    """Blocks mined so far, plus the base fee the next block must use.

    ``next_base_fee`` is the value the configured update rule produced
    from the recorded history; the checkers set it directly, the
    simulator advances it block by block.
    """

    blocks: tuple[Block, ...]
    env: EnvParams
    next_base_fee: float = 0.0

    def __post_init__(self) -> None:
        heights = [b.height for b in self.blocks]
        for prev, cur in zip(heights, heights[1:]):
            if cur != prev + 1:
                raise HeightGap(f"non-consecutive heights {prev} -> {cur}")

    @property
    def next_height(self) -> int:
        return self.blocks[-1].height + 1 if self.blocks else 1

    def to_dict(self) -> dict:
        return {
            "blocks": [b.to_dict() for b in self.blocks],
            "env": self.env.to_dict(),
            "next_base_fee": self.next_base_fee,
        }

    @staticmethod
    def from_dict(data: dict) -> "ChainState":
        return ChainState(
            blocks=tuple(Block.from_dict(b) for b in data["blocks"]),
            env=EnvParams.from_dict(data["env"]),
            next_base_fee=float(data.get("next_base_fee", 0.0)),
        )


def append_block(chain: ChainState, block: Block) -> ChainState:
    """Extend ``chain`` with ``block``; the input chain is unchanged.

    Raises :class:`OversizeBlock` when block gas exceeds the environment's
    maximum and :class:`HeightGap` when the height does not follow on.
    """
    if block.gas_used > chain.env.max_block_size:
        raise OversizeBlock(
            f"block uses {block.gas_used} gas > max {chain.env.max_block_size}"
        )
    if block.height != chain.next_height:
        raise HeightGap(
            f"expected height {chain.next_height}, got {block.height}"
        )
    return ChainState(
        blocks=chain.blocks + (block,),
        env=chain.env,
        next_base_fee=chain.next_base_fee,
    )


# ---------------------------------------------------------------------------
# Mempool


@dataclass(frozen=True)
class Mempool:
    """Set of pending transactions with unique ids.

    Iteration order is lexicographic on id so that every downstream
    computation is reproducible.
    """

    txs: tuple[Transaction, ...]

    def __init__(self, txs: Iterable[Transaction] = ()):
        ordered = tuple(sorted(txs, key=lambda t: t.id))
        _check_unique_ids(ordered, "mempool")
        object.__setattr__(self, "txs", ordered)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self.txs)

    def __len__(self) -> int:
        return len(self.txs)

    def add(self, tx: Transaction) -> "Mempool":
        return Mempool(self.txs + (tx,))

    def without(self, tx_id: str) -> "Mempool":
        return Mempool(t for t in self.txs if t.id != tx_id)

    def get(self, tx_id: str) -> Transaction:
        for t in self.txs:
            if t.id == tx_id:
                return t
        raise KeyError(tx_id)

    def to_dict(self) -> dict:
        return {"txs": [tx.to_dict() for tx in self.txs]}

    @staticmethod
    def from_dict(data: dict) -> "Mempool":
        return Mempool(Transaction.from_dict(t) for t in data["txs"])


def to_json(obj, **kwargs) -> str:
    """Serialize any record with a ``to_dict`` method to stable JSON."""
    return json.dumps(obj.to_dict(), sort_keys=True, **kwargs)
