"""The transaction fee mechanism catalog.

Each mechanism is a triple of allocation, payment, and burning behavior:

* ``FirstPrice``: include the gas-weighted highest bids, winners pay
  their bid to the miner, nothing burned.
* ``Vickrey``: same allocation; every winner pays the lowest included
  bid (the on-chain stand-in for the highest losing bid).
* ``FeeBurningFpa``: first-price allocation with payments and burns
  swapped, so the whole bid is burned.
* ``M1559``: base fee r burned, bid minus base fee to the miner,
  allocation maximizes sum of (bid - r - mu) * gas.
* ``M1559R``: same allocation, but the base fee is refunded to the
  miner (winners pay their full bid, zero burn).
* ``Tipless``: hard-coded tip delta; eligible transactions pay r + delta
  (r burned, delta to the miner) and the block packs maximum gas.
* ``Smoothed``: like M1559 but base fee revenue is paid forward, split
  across the next ``window`` miners instead of burned.
* ``Blended``: burns a ``lam`` fraction of base fee revenue and pays the
  rest forward.
* ``Beos``: no base fee; all included transactions pay the lowest
  included bid (or only ``min_fee`` when the block is not almost full),
  and fee revenue is shared with the next ``window - 1`` miners.

Allocation never reads a transaction's private value; everything is
computed from the redacted view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .core import (
    Block,
    CapOnlyBid,
    ChainState,
    EscalatorBid,
    FeeCapTipBid,
    FeemechError,
    FpaBid,
    Mempool,
    Transaction,
    TxView,
)

# Margins within this of zero count as zero; keeps boundary bids such as
# exactly r + mu from flipping on float round-off.
MARGIN_EPS = 1e-9

DEFAULT_DP_BOUND = 10**6


class BidVariantMismatch(FeemechError):
    """Transaction bid parameters do not fit the mechanism."""


class ExactModeTooLarge(FeemechError):
    """Exact knapsack requested beyond the configured gas-unit bound."""


class InvalidBlock(FeemechError):
    """Settlement requested for a block that fails validation."""


# ---------------------------------------------------------------------------
# Mechanism variants


@dataclass(frozen=True)
class FirstPrice:
    pass


@dataclass(frozen=True)
class Vickrey:
    pass


@dataclass(frozen=True)
class FeeBurningFpa:
    pass


@dataclass(frozen=True)
class M1559:
    pass


@dataclass(frozen=True)
class M1559R:
    pass


@dataclass(frozen=True)
class Tipless:
    hardcoded_tip: float

    def __post_init__(self) -> None:
        if self.hardcoded_tip < 0:
            raise ValueError("hardcoded_tip must be >= 0")


@dataclass(frozen=True)
class Smoothed:
    window: int

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class Blended:
    lam: float
    window: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError("lam must be in [0, 1]")
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class Beos:
    window: int
    min_fee: float
    full_threshold_fraction: float = 1.0

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.min_fee < 0:
            raise ValueError("min_fee must be >= 0")
        if not (0.0 < self.full_threshold_fraction <= 1.0):
            raise ValueError("full_threshold_fraction must be in (0, 1]")


MechanismSpec = Union[
    FirstPrice, Vickrey, FeeBurningFpa, M1559, M1559R, Tipless, Smoothed, Blended, Beos
]

FPA_FAMILY = (FirstPrice, Vickrey, FeeBurningFpa)
BASEFEE_FAMILY = (M1559, M1559R, Smoothed, Blended)


def mechanism_to_dict(spec: MechanismSpec) -> dict:
    if isinstance(spec, FirstPrice):
        return {"mechanism": "fpa"}
    if isinstance(spec, Vickrey):
        return {"mechanism": "vickrey"}
    if isinstance(spec, FeeBurningFpa):
        return {"mechanism": "fpa_burn"}
    if isinstance(spec, M1559):
        return {"mechanism": "m1559"}
    if isinstance(spec, M1559R):
        return {"mechanism": "m1559r"}
    if isinstance(spec, Tipless):
        return {"mechanism": "tipless", "hardcoded_tip": spec.hardcoded_tip}
    if isinstance(spec, Smoothed):
        return {"mechanism": "smoothed", "window": spec.window}
    if isinstance(spec, Blended):
        return {"mechanism": "blended", "lam": spec.lam, "window": spec.window}
    if isinstance(spec, Beos):
        return {
            "mechanism": "beos",
            "window": spec.window,
            "min_fee": spec.min_fee,
            "full_threshold_fraction": spec.full_threshold_fraction,
        }
    raise TypeError(f"unknown mechanism: {spec!r}")


def mechanism_from_dict(data: dict) -> MechanismSpec:
    name = data.get("mechanism")
    if name == "fpa":
        return FirstPrice()
    if name == "vickrey":
        return Vickrey()
    if name == "fpa_burn":
        return FeeBurningFpa()
    if name == "m1559":
        return M1559()
    if name == "m1559r":
        return M1559R()
    if name == "tipless":
        return Tipless(hardcoded_tip=float(data["hardcoded_tip"]))
    if name == "smoothed":
        return Smoothed(window=int(data["window"]))
    if name == "blended":
        return Blended(lam=float(data["lam"]), window=int(data["window"]))
    if name == "beos":
        return Beos(
            window=int(data["window"]),
            min_fee=float(data["min_fee"]),
            full_threshold_fraction=float(data.get("full_threshold_fraction", 1.0)),
        )
    raise ValueError(f"unknown mechanism: {name!r}")


# ---------------------------------------------------------------------------
# Induced bids


def induced_bid(
    spec: MechanismSpec,
    tx: Union[Transaction, TxView],
    r: float,
    height: int,
) -> Optional[float]:
    """Scalar bid (gwei/gas) the formal model assigns to a transaction.

    Returns None for an escalator bid outside its validity window.
    Raises :class:`BidVariantMismatch` when the bid parameters do not
    match what the mechanism expects.
    """
    bid = tx.bid_params
    if isinstance(spec, FirstPrice):
        if isinstance(bid, FpaBid):
            return bid.gas_price
        if isinstance(bid, EscalatorBid):
            return bid.bid_at(height)
        raise BidVariantMismatch(f"{type(bid).__name__} under a first-price auction")
    if isinstance(spec, (Vickrey, FeeBurningFpa)):
        if isinstance(bid, FpaBid):
            return bid.gas_price
        raise BidVariantMismatch(f"{type(bid).__name__} under {type(spec).__name__}")
    if isinstance(spec, BASEFEE_FAMILY):
        if isinstance(bid, FeeCapTipBid):
            return min(r + bid.tip, bid.fee_cap)
        raise BidVariantMismatch(f"{type(bid).__name__} under {type(spec).__name__}")
    if isinstance(spec, Tipless):
        if isinstance(bid, CapOnlyBid):
            return min(r + spec.hardcoded_tip, bid.fee_cap)
        raise BidVariantMismatch(f"{type(bid).__name__} under the tipless mechanism")
    if isinstance(spec, Beos):
        if isinstance(bid, CapOnlyBid):
            return bid.fee_cap
        raise BidVariantMismatch(f"{type(bid).__name__} under the BEOS mechanism")
    raise TypeError(f"unknown mechanism: {spec!r}")


def is_protocol_valid(spec: MechanismSpec, tx: Union[Transaction, TxView], r: float) -> bool:
    """Whether the protocol accepts this transaction in a block with base fee ``r``.

    Mechanisms with a base fee reject transactions whose fee cap (and for
    the refund variant, whose bid) falls below the base fee.
    """
    if isinstance(spec, (M1559, Smoothed, Blended)):
        return tx.bid_params.fee_cap >= r - MARGIN_EPS
    if isinstance(spec, Tipless):
        return tx.bid_params.fee_cap >= r - MARGIN_EPS
    if isinstance(spec, M1559R):
        b = induced_bid(spec, tx, r, height=0)
        return b is not None and b >= r - MARGIN_EPS
    return True


# ---------------------------------------------------------------------------
# Allocation


def _objective_per_gas(spec: MechanismSpec, bid: float, r: float, mu: float) -> float:
    """Per-gas objective of the mechanism's intended allocation rule."""
    if isinstance(spec, FPA_FAMILY):
        margin = bid - mu
    elif isinstance(spec, BASEFEE_FAMILY):
        margin = bid - r - mu
    elif isinstance(spec, Tipless):
        # Eligibility is bid >= r + tip; the packing objective is gas itself.
        margin = bid - r - spec.hardcoded_tip
    elif isinstance(spec, Beos):
        margin = bid - mu
    else:
        raise TypeError(f"unknown mechanism: {spec!r}")
    if abs(margin) <= MARGIN_EPS:
        return 0.0
    return margin


def allocate(
    spec: MechanismSpec,
    chain: ChainState,
    mempool: Mempool,
    mode: str = "greedy",
    dp_bound: int = DEFAULT_DP_BOUND,
) -> Block:
    """Build the mechanism's intended block for the next height.

    ``mode`` is "greedy" (density sort and fill) or "exact" (dynamic
    program over gas units).  Zero-margin transactions are included when
    they fit; negative-margin transactions never are.  Ties break
    lexicographically on id.
    """
    if mode not in ("greedy", "exact"):
        raise ValueError(f"unknown mode: {mode!r}")
    r = chain.next_base_fee
    height = chain.next_height
    capacity = chain.env.max_block_size
    mu = chain.env.marginal_cost

    views = [tx.redacted() for tx in mempool]
    candidates = []  # (view, objective_per_gas)
    for view in views:
        bid = induced_bid(spec, view, r, height)
        if bid is None:
            continue
        if not is_protocol_valid(spec, view, r):
            continue
        obj = _objective_per_gas(spec, bid, r, mu)
        if obj < 0.0:
            continue
        candidates.append((view, bid, obj))

    if isinstance(spec, Beos):
        chosen_ids = _allocate_beos(candidates, capacity)
    elif isinstance(spec, Tipless):
        chosen_ids = _allocate_max_gas(candidates, capacity, mode, dp_bound)
    else:
        chosen_ids = _allocate_weighted(candidates, capacity, mode, dp_bound)

    txs = tuple(tx for tx in mempool if tx.id in chosen_ids)
    return Block(height=height, base_fee=r, txs=txs)


def _allocate_weighted(candidates, capacity, mode, dp_bound):
    """Maximize sum of objective * gas subject to the gas capacity."""
    positive = [(v, o) for v, _, o in candidates if o > 0.0]
    zero = [v for v, _, o in candidates if o == 0.0]
    if mode == "greedy":
        chosen: set[str] = set()
        remaining = capacity
        for view, _ in sorted(positive, key=lambda c: (-c[1], c[0].id)):
            if view.gas_limit <= remaining:
                chosen.add(view.id)
                remaining -= view.gas_limit
    else:
        items = [(v.id, v.gas_limit, o * v.gas_limit) for v, o in positive]
        chosen = _knapsack(items, capacity, dp_bound)
        remaining = capacity - sum(v.gas_limit for v, _ in positive if v.id in chosen)
    for view in sorted(zero, key=lambda v: v.id):
        if view.gas_limit <= remaining:
            chosen.add(view.id)
            remaining -= view.gas_limit
    return chosen


def _allocate_max_gas(candidates, capacity, mode, dp_bound):
    """Pack maximum total gas from eligible transactions (tipless rule)."""
    eligible = [v for v, _, _ in candidates]
    if mode == "greedy":
        chosen = set()
        remaining = capacity
        for view in sorted(eligible, key=lambda v: v.id):
            if view.gas_limit <= remaining:
                chosen.add(view.id)
                remaining -= view.gas_limit
        return chosen
    items = [(v.id, v.gas_limit, float(v.gas_limit)) for v in eligible]
    return _knapsack(items, capacity, dp_bound)


def _allocate_beos(candidates, capacity):
    """Best prefix cut of bid-sorted transactions by (lowest bid) * (gas)."""
    ordered = sorted(candidates, key=lambda c: (-c[1], c[0].id))
    best_ids: set[str] = set()
    best_value = 0.0
    prefix: list[str] = []
    gas = 0
    lowest = math.inf
    for view, bid, _ in ordered:
        if gas + view.gas_limit > capacity:
            break
        prefix.append(view.id)
        gas += view.gas_limit
        lowest = min(lowest, bid)
        value = lowest * gas
        if value > best_value + MARGIN_EPS:
            best_value = value
            best_ids = set(prefix)
    return best_ids


def _knapsack(items, capacity, dp_bound):
    """0/1 knapsack over gas units; items are (id, gas, value) with value >= 0.

    Items are processed in id order; on ties the exclusion is preferred,
    which makes the reconstruction deterministic.
    """
    items = sorted(items, key=lambda it: it[0])
    if not items:
        return set()
    scale = 0
    for _, gas, _ in items:
        scale = math.gcd(scale, gas)
    scale = math.gcd(scale, capacity) or 1
    cap = capacity // scale
    if cap > dp_bound:
        raise ExactModeTooLarge(
            f"scaled capacity {cap} gas units exceeds bound {dp_bound}"
        )
    if len(items) * (cap + 1) > 2**28:
        raise ExactModeTooLarge("knapsack table too large")
    dp = [0.0] * (cap + 1)
    taken = [bytearray(cap + 1) for _ in items]
    for i, (_, gas, value) in enumerate(items):
        w = gas // scale
        row = taken[i]
        for c in range(cap, w - 1, -1):
            alt = dp[c - w] + value
            if alt > dp[c]:
                dp[c] = alt
                row[c] = 1
    chosen = set()
    c = cap
    for i in range(len(items) - 1, -1, -1):
        if taken[i][c]:
            chosen.add(items[i][0])
            c -= items[i][1] // scale
    return chosen


# ---------------------------------------------------------------------------
# Settlement


@dataclass(frozen=True)
class SettlementEntry:
    tx_id: str
    gas: int
    bid: float
    payment: float  # gwei/gas to the miner
    burn: float  # gwei/gas destroyed
    forward: float  # gwei/gas paid forward to later miners
    is_fake: bool

    @property
    def user_price(self) -> float:
        """Total gas price leaving the transaction creator."""
        return self.payment + self.burn + self.forward


@dataclass(frozen=True)
class SettlementReport:
    entries: tuple[SettlementEntry, ...]
    miner_revenue: float  # gwei, from real transactions only
    burned_total: float  # gwei, across all transactions
    forwarded_total: float  # gwei paid forward out of this block
    paid_forward_received: float  # gwei arriving from earlier blocks

    def entry(self, tx_id: str) -> SettlementEntry:
        for e in self.entries:
            if e.tx_id == tx_id:
                return e
        raise KeyError(tx_id)

    def to_dict(self) -> dict:
        return {
            "entries": [e.__dict__ for e in self.entries],
            "miner_revenue": self.miner_revenue,
            "burned_total": self.burned_total,
            "forwarded_total": self.forwarded_total,
            "paid_forward_received": self.paid_forward_received,
        }


def _beos_block_price(spec: Beos, block: Block, max_gas: int) -> float:
    included = [
        induced_bid(spec, tx.redacted(), block.base_fee, block.height)
        for tx in block.txs
    ]
    included = [b for b in included if b is not None]
    if not included:
        return 0.0
    if block.gas_used >= spec.full_threshold_fraction * max_gas - MARGIN_EPS:
        return min(included)
    return spec.min_fee


def _beos_block_revenue(spec: Beos, block: Block, max_gas: int) -> float:
    return _beos_block_price(spec, block, max_gas) * block.gas_used


def settle(spec: MechanismSpec, chain: ChainState, block: Block) -> SettlementReport:
    """Per-transaction payments, burns, and forwards for a mined block.

    The block must pass :func:`validate_block`; settlement is a pure
    bookkeeping step with no choices left to the miner.
    """
    violations = validate_block(spec, chain, block)
    if violations:
        raise InvalidBlock("; ".join(v.describe() for v in violations))
    r = block.base_fee
    entries = []
    received = 0.0

    lowest_bid = None
    bids = {}
    for tx in block.txs:
        b = induced_bid(spec, tx.redacted(), r, block.height)
        if b is None:
            raise InvalidBlock(f"transaction {tx.id} has no valid bid at this height")
        bids[tx.id] = b
        lowest_bid = b if lowest_bid is None else min(lowest_bid, b)

    if isinstance(spec, Beos):
        price = _beos_block_price(spec, block, chain.env.max_block_size)
        share = 1.0 / spec.window
        for tx in block.txs:
            entries.append(
                SettlementEntry(
                    tx_id=tx.id,
                    gas=tx.gas_limit,
                    bid=bids[tx.id],
                    payment=price * share,
                    burn=0.0,
                    forward=price * (1.0 - share),
                    is_fake=tx.is_fake,
                )
            )
        for past in chain.blocks[-(spec.window - 1):] if spec.window > 1 else ():
            received += share * _beos_block_revenue(spec, past, chain.env.max_block_size)
    else:
        for tx in block.txs:
            b = bids[tx.id]
            if isinstance(spec, FirstPrice):
                p, q, f = b, 0.0, 0.0
            elif isinstance(spec, Vickrey):
                p, q, f = lowest_bid or 0.0, 0.0, 0.0
            elif isinstance(spec, FeeBurningFpa):
                p, q, f = 0.0, b, 0.0
            elif isinstance(spec, M1559):
                p, q, f = b - r, r, 0.0
            elif isinstance(spec, M1559R):
                p, q, f = b, 0.0, 0.0
            elif isinstance(spec, Tipless):
                p, q, f = b - r, r, 0.0
            elif isinstance(spec, Smoothed):
                p, q, f = b - r, 0.0, r
            elif isinstance(spec, Blended):
                p, q, f = b - r, spec.lam * r, (1.0 - spec.lam) * r
            else:
                raise TypeError(f"unknown mechanism: {spec!r}")
            entries.append(
                SettlementEntry(
                    tx_id=tx.id,
                    gas=tx.gas_limit,
                    bid=b,
                    payment=max(0.0, p),
                    burn=q,
                    forward=f,
                    is_fake=tx.is_fake,
                )
            )
        if isinstance(spec, Smoothed):
            received = _window_revenue(chain, spec.window)
        elif isinstance(spec, Blended):
            received = (1.0 - spec.lam) * _window_revenue(chain, spec.window)

    miner_revenue = sum(e.payment * e.gas for e in entries if not e.is_fake)
    burned_total = sum(e.burn * e.gas for e in entries)
    forwarded_total = sum(e.forward * e.gas for e in entries)
    return SettlementReport(
        entries=tuple(entries),
        miner_revenue=miner_revenue,
        burned_total=burned_total,
        forwarded_total=forwarded_total,
        paid_forward_received=received,
    )


def _window_revenue(chain: ChainState, window: int) -> float:
    """Average base fee revenue of the last ``window`` blocks.

    Missing history (near genesis) contributes zero, matching a protocol
    that bootstraps the pay-forward pool empty.
    """
    total = sum(b.base_fee * b.gas_used for b in chain.blocks[-window:])
    return total / window


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    code: str
    tx_id: Optional[str] = None
    detail: str = ""

    def describe(self) -> str:
        where = f" tx={self.tx_id}" if self.tx_id else ""
        return f"{self.code}{where}: {self.detail}" if self.detail else f"{self.code}{where}"


def validate_block(
    spec: MechanismSpec,
    chain: ChainState,
    block: Block,
    rule=None,
    target: Optional[int] = None,
) -> list[Violation]:
    """Protocol-level checks; an empty list means the block is acceptable.

    When an update rule is supplied the block's base fee must match the
    rule applied to the predecessor block.
    """
    violations: list[Violation] = []
    if block.gas_used > chain.env.max_block_size:
        violations.append(
            Violation(
                code="OversizeBlock",
                detail=f"{block.gas_used} > {chain.env.max_block_size}",
            )
        )
    for tx in block.txs:
        try:
            ok = is_protocol_valid(spec, tx.redacted(), block.base_fee)
        except BidVariantMismatch as exc:
            violations.append(Violation(code="BidVariantMismatch", tx_id=tx.id, detail=str(exc)))
            continue
        if not ok:
            code = "BidBelowBase" if isinstance(spec, M1559R) else "FeeCapBelowBase"
            violations.append(Violation(code=code, tx_id=tx.id))
    if rule is not None and chain.blocks:
        from .basefee import next_base_fee

        prev = chain.blocks[-1]
        expected = next_base_fee(
            rule, prev.base_fee, prev, target or chain.env.target_block_size, chain.blocks
        )
        if not math.isclose(expected, block.base_fee, rel_tol=1e-9, abs_tol=1e-9):
            violations.append(
                Violation(
                    code="BaseFeeMismatch",
                    detail=f"expected {expected}, block has {block.base_fee}",
                )
            )
    return violations
