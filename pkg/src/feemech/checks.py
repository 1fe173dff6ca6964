"""Brute-force verifiers for the incentive properties of a mechanism.

Each checker discharges a universally quantified property over a finite
search space and returns a :class:`Verdict`: HOLDS over the searched
grid, or a concrete counterexample witness whose replayed utility gain
exceeds the tolerance.  A HOLDS verdict is evidence, never a proof; the
grids are part of the result.

The searched objects are small :class:`Instance` records: an
environment, a base fee fixed by the chain prefix, a handful of
transactions with private values, and the bid/gas grids used to
enumerate deviations and fake transactions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .agents import (
    UserStrategy,
    make_fake_tx,
    myopic_miner_utility,
    recommended_bid,
    user_utility,
)
from .core import (
    BidParams,
    Block,
    CapOnlyBid,
    ChainState,
    EnvParams,
    FeeCapTipBid,
    FeemechError,
    FpaBid,
    Mempool,
    Transaction,
    bid_params_to_dict,
)
from .mechanisms import (
    FPA_FAMILY,
    MARGIN_EPS,
    MechanismSpec,
    allocate,
    induced_bid,
    is_protocol_valid,
    settle,
)

# Utility comparison tolerance, in gwei.
TOL = 1e-9


class BudgetExceeded(FeemechError):
    """Enumeration would exceed the instance's evaluation budget."""


# ---------------------------------------------------------------------------
# Instances and verdicts


@dataclass(frozen=True)
class InstanceTx:
    """One transaction of a check instance: private value plus a declared bid level."""

    id: str
    value: float
    gas_limit: int
    bid_level: Optional[float] = None  # None means "bid the value"

    @property
    def level(self) -> float:
        return self.value if self.bid_level is None else self.bid_level


@dataclass(frozen=True)
class Instance:
    """Finite search space for one property check."""

    env: EnvParams
    base_fee: float
    txs: tuple[InstanceTx, ...]
    bid_grid: tuple[float, ...]
    gas_grid: tuple[int, ...]
    max_fakes: int = 1
    max_evaluations: int = 2_000_000
    name: str = ""

    def __post_init__(self) -> None:
        if not self.bid_grid or not self.gas_grid:
            raise ValueError("bid_grid and gas_grid must be non-empty")
        if self.max_fakes < 0:
            raise ValueError("max_fakes must be >= 0")
        ids = [t.id for t in self.txs]
        if len(set(ids)) != len(ids):
            raise ValueError("instance tx ids must be unique")

    @property
    def chain(self) -> ChainState:
        return ChainState(blocks=(), env=self.env, next_base_fee=self.base_fee)

    @property
    def mu(self) -> float:
        return self.env.marginal_cost

    def is_excessively_low(self) -> bool:
        threshold = self.base_fee + self.mu
        demand = sum(t.gas_limit for t in self.txs if t.value >= threshold - MARGIN_EPS)
        return demand > self.env.max_block_size

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "env": self.env.to_dict(),
            "base_fee": self.base_fee,
            "txs": [
                {
                    "id": t.id,
                    "value": t.value,
                    "gas_limit": t.gas_limit,
                    "bid_level": t.bid_level,
                }
                for t in self.txs
            ],
            "bid_grid": list(self.bid_grid),
            "gas_grid": list(self.gas_grid),
            "max_fakes": self.max_fakes,
            "max_evaluations": self.max_evaluations,
        }

    @staticmethod
    def from_dict(data: dict) -> "Instance":
        return Instance(
            env=EnvParams.from_dict(data["env"]),
            base_fee=float(data["base_fee"]),
            txs=tuple(
                InstanceTx(
                    id=str(t["id"]),
                    value=float(t["value"]),
                    gas_limit=int(t["gas_limit"]),
                    bid_level=None if t.get("bid_level") is None else float(t["bid_level"]),
                )
                for t in data["txs"]
            ),
            bid_grid=tuple(float(x) for x in data["bid_grid"]),
            gas_grid=tuple(int(x) for x in data["gas_grid"]),
            max_fakes=int(data.get("max_fakes", 1)),
            max_evaluations=int(data.get("max_evaluations", 2_000_000)),
            name=str(data.get("name", "")),
        )


@dataclass(frozen=True)
class Witness:
    """Replayable counterexample: a deviation and the utilities it separates."""

    kind: str
    description: str
    utility: float
    baseline: float
    data: dict

    @property
    def gain(self) -> float:
        return self.utility - self.baseline

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "description": self.description,
            "utility": self.utility,
            "baseline": self.baseline,
            "gain": self.gain,
            "data": self.data,
        }


@dataclass(frozen=True)
class Verdict:
    holds: bool
    witness: Optional[Witness]
    evaluations: int
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "witness": self.witness.to_dict() if self.witness else None,
            "evaluations": self.evaluations,
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# Bid binding helpers


def scalar_bid(spec: MechanismSpec, level: float, r: float) -> BidParams:
    """Bid parameters that realize a scalar bid ``level`` under ``spec``.

    Under mechanisms with a base fee, levels below the base fee yield a
    fee cap below r, which the protocol rejects; such bids simply cannot
    exist on-chain.
    """
    from .mechanisms import Beos, Tipless

    if isinstance(spec, FPA_FAMILY):
        return FpaBid(gas_price=level)
    if isinstance(spec, (Tipless, Beos)):
        return CapOnlyBid(fee_cap=level)
    return FeeCapTipBid(fee_cap=level, tip=max(0.0, level - r))


def bind_mempool(
    spec: MechanismSpec, instance: Instance, strategy: Optional[UserStrategy] = None
) -> Mempool:
    """Materialize the instance mempool with mechanism-appropriate bids."""
    r = instance.base_fee
    mu = instance.mu
    txs = []
    for t in instance.txs:
        if strategy is None:
            params = scalar_bid(spec, t.level, r)
        else:
            params = recommended_bid(strategy, t.value, r, mu)
        txs.append(
            Transaction(id=t.id, gas_limit=t.gas_limit, value=t.value, bid_params=params)
        )
    return Mempool(txs)


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def tick(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise BudgetExceeded(f"evaluation budget {self.limit} exceeded")


def _valid_txs(spec, chain, mempool):
    out = []
    for tx in mempool:
        bid = induced_bid(spec, tx.redacted(), chain.next_base_fee, chain.next_height)
        if bid is None or not is_protocol_valid(spec, tx.redacted(), chain.next_base_fee):
            continue
        out.append(tx)
    return out


def _feasible_subsets(txs, capacity):
    """All subsets fitting the capacity, in deterministic order."""
    txs = sorted(txs, key=lambda t: t.id)
    for k in range(len(txs) + 1):
        for combo in itertools.combinations(txs, k):
            if sum(t.gas_limit for t in combo) <= capacity:
                yield combo


def _fake_multisets(spec, instance):
    """Fake transaction bundles up to max_fakes, drawn from the instance grids."""
    r = instance.base_fee
    types = [
        (gas, level) for gas in instance.gas_grid for level in instance.bid_grid
    ]
    yield ()
    for size in range(1, instance.max_fakes + 1):
        for combo in itertools.combinations_with_replacement(types, size):
            yield tuple(
                make_fake_tx(spec, gas, level, r, tag=f"{i}-{gas}-{level:g}")
                for i, (gas, level) in enumerate(combo)
            )


# ---------------------------------------------------------------------------
# MMIC and costliness


def check_mmic(spec: MechanismSpec, instance: Instance) -> Verdict:
    """Does honest allocation with no fake transactions maximize miner utility?

    Enumerates every fake bundle from the grids and every feasible block
    drawn from the (valid) real transactions plus the bundle.
    """
    chain = instance.chain
    mempool = bind_mempool(spec, instance)
    budget = _Budget(instance.max_evaluations)

    honest_block = allocate(spec, chain, mempool, mode="exact")
    honest_utility = myopic_miner_utility(spec, chain, mempool, (), honest_block)

    best: Optional[Witness] = None
    real_valid = _valid_txs(spec, chain, mempool)
    for fakes in _fake_multisets(spec, instance):
        fake_gas = sum(f.gas_limit for f in fakes)
        if fake_gas > instance.env.max_block_size:
            continue
        for combo in _feasible_subsets(real_valid, instance.env.max_block_size - fake_gas):
            budget.tick()
            txs = tuple(sorted(combo + fakes, key=lambda t: t.id))
            block = Block(height=chain.next_height, base_fee=instance.base_fee, txs=txs)
            utility = myopic_miner_utility(spec, chain, mempool, fakes, block)
            if utility > honest_utility + TOL and (
                best is None or utility > best.utility + TOL
            ):
                best = Witness(
                    kind="miner_deviation",
                    description=(
                        f"miner gains {utility - honest_utility:.6g} gwei with "
                        f"{len(fakes)} fake tx(s)"
                    ),
                    utility=utility,
                    baseline=honest_utility,
                    data={
                        "fakes": [
                            {
                                "gas_limit": f.gas_limit,
                                "bid_params": bid_params_to_dict(f.bid_params),
                            }
                            for f in fakes
                        ],
                        "block_tx_ids": [t.id for t in txs],
                        "honest_block_tx_ids": [t.id for t in honest_block.txs],
                    },
                )
    return Verdict(holds=best is None, witness=best, evaluations=budget.used)


def check_costly(spec: MechanismSpec, instance: Instance, gamma: float) -> Verdict:
    """Does every included fake transaction cost at least ``gamma`` per gas unit?

    Compares miner utility with the fakes against the same block with
    the fakes stripped out.  Fake bundles are taken from the instance
    grids and are always included in the candidate block.
    """
    chain = instance.chain
    mempool = bind_mempool(spec, instance)
    budget = _Budget(instance.max_evaluations)
    real_valid = _valid_txs(spec, chain, mempool)

    stripped_cache: dict[frozenset, float] = {}

    def stripped_utility(combo) -> float:
        key = frozenset(t.id for t in combo)
        if key not in stripped_cache:
            block = Block(
                height=chain.next_height,
                base_fee=instance.base_fee,
                txs=tuple(sorted(combo, key=lambda t: t.id)),
            )
            stripped_cache[key] = myopic_miner_utility(spec, chain, mempool, (), block)
        return stripped_cache[key]

    witness = None
    for fakes in _fake_multisets(spec, instance):
        if not fakes:
            continue
        fake_gas = sum(f.gas_limit for f in fakes)
        if fake_gas > instance.env.max_block_size:
            continue
        for combo in _feasible_subsets(real_valid, instance.env.max_block_size - fake_gas):
            budget.tick()
            txs = tuple(sorted(combo + fakes, key=lambda t: t.id))
            block = Block(height=chain.next_height, base_fee=instance.base_fee, txs=txs)
            with_fakes = myopic_miner_utility(spec, chain, mempool, fakes, block)
            without = stripped_utility(combo)
            bound = without - gamma * fake_gas
            if with_fakes > bound + TOL:
                witness = Witness(
                    kind="miner_deviation",
                    description=(
                        f"fakes cost only {(without - with_fakes) / fake_gas:.6g} "
                        f"per gas, below gamma={gamma:g}"
                    ),
                    utility=with_fakes,
                    baseline=bound,
                    data={
                        "gamma": gamma,
                        "fakes": [
                            {
                                "gas_limit": f.gas_limit,
                                "bid_params": bid_params_to_dict(f.bid_params),
                            }
                            for f in fakes
                        ],
                        "block_tx_ids": [t.id for t in txs],
                    },
                )
                return Verdict(holds=False, witness=witness, evaluations=budget.used)
    return Verdict(holds=True, witness=None, evaluations=budget.used)


# ---------------------------------------------------------------------------
# User incentive checks


def _deviation_bids(
    spec: MechanismSpec,
    grid: Sequence[float],
    tip_grid: Optional[Sequence[float]],
    r: float,
) -> list[BidParams]:
    from .mechanisms import Beos, Tipless

    if isinstance(spec, FPA_FAMILY):
        return [FpaBid(gas_price=x) for x in grid]
    if isinstance(spec, (Tipless, Beos)):
        return [CapOnlyBid(fee_cap=x) for x in grid]
    tips = tuple(tip_grid) if tip_grid is not None else tuple(grid)
    return [FeeCapTipBid(fee_cap=c, tip=d) for c in grid for d in tips]


def check_uic_epne(
    spec: MechanismSpec,
    instance: Instance,
    strategy: UserStrategy,
    tip_grid: Optional[Sequence[float]] = None,
) -> Verdict:
    """Is the strategy a symmetric ex post Nash equilibrium on this instance?

    All bids are set by the strategy; each transaction then tries every
    unilateral deviation from the grids.
    """
    chain = instance.chain
    mempool = bind_mempool(spec, instance, strategy)
    budget = _Budget(instance.max_evaluations)
    deviations = _deviation_bids(spec, instance.bid_grid, tip_grid, instance.base_fee)

    for t in instance.txs:
        rest = mempool.without(t.id)
        tx = mempool.get(t.id)
        budget.tick()
        equilibrium = user_utility(spec, chain, rest, tx, tx.bid_params)
        for dev in deviations:
            budget.tick()
            utility = user_utility(spec, chain, rest, tx, dev)
            if utility > equilibrium + TOL:
                witness = Witness(
                    kind="bid_deviation",
                    description=(
                        f"tx {t.id} gains {utility - equilibrium:.6g} gwei by deviating"
                    ),
                    utility=utility,
                    baseline=equilibrium,
                    data={
                        "tx_id": t.id,
                        "deviation": bid_params_to_dict(dev),
                        "strategy_bid": bid_params_to_dict(tx.bid_params),
                    },
                )
                return Verdict(holds=False, witness=witness, evaluations=budget.used)
    return Verdict(holds=True, witness=None, evaluations=budget.used)


def _opponent_bid(spec: MechanismSpec, level: float, r: float, mu: float) -> BidParams:
    """Opponent bid at a scalar level.

    For cap-only mechanisms this spans the whole bid space.  For fee
    cap plus tip mechanisms, opponents vary their caps while tipping the
    marginal cost; overstated caps are exactly the profiles that make
    the stated demand, and hence the allocation, diverge from the true
    demand.
    """
    from .mechanisms import Beos, Tipless

    if isinstance(spec, FPA_FAMILY):
        return FpaBid(gas_price=level)
    if isinstance(spec, (Tipless, Beos)):
        return CapOnlyBid(fee_cap=level)
    return FeeCapTipBid(fee_cap=level, tip=mu)


def check_dominant(
    spec: MechanismSpec,
    instance: Instance,
    strategy: UserStrategy,
    opponent_levels: Optional[Sequence[float]] = None,
    tip_grid: Optional[Sequence[float]] = None,
) -> Verdict:
    """Is the strategy bid optimal against every enumerated opponent profile?

    Opponents' bids range over scalar levels (default: the instance bid
    grid) via :func:`_opponent_bid`; the checked transaction's deviations
    range over the full deviation grid.  This is the dominant-strategy
    strengthening of the equilibrium check.
    """
    chain = instance.chain
    mu = instance.mu
    levels = tuple(opponent_levels) if opponent_levels is not None else instance.bid_grid
    budget = _Budget(instance.max_evaluations)
    deviations = _deviation_bids(spec, instance.bid_grid, tip_grid, instance.base_fee)

    for t in instance.txs:
        others = [o for o in instance.txs if o.id != t.id]
        strategy_bid = recommended_bid(strategy, t.value, instance.base_fee, mu)
        tx = Transaction(
            id=t.id, gas_limit=t.gas_limit, value=t.value, bid_params=strategy_bid
        )
        for profile in itertools.product(levels, repeat=len(others)):
            pool = Mempool(
                Transaction(
                    id=o.id,
                    gas_limit=o.gas_limit,
                    value=o.value,
                    bid_params=_opponent_bid(spec, level, instance.base_fee, mu),
                )
                for o, level in zip(others, profile)
            )
            budget.tick()
            strategic = user_utility(spec, chain, pool, tx, strategy_bid)
            for dev in deviations:
                budget.tick()
                utility = user_utility(spec, chain, pool, tx, dev)
                if utility > strategic + TOL:
                    witness = Witness(
                        kind="bid_deviation",
                        description=(
                            f"tx {t.id} gains {utility - strategic:.6g} gwei against "
                            f"opponent profile {profile}"
                        ),
                        utility=utility,
                        baseline=strategic,
                        data={
                            "tx_id": t.id,
                            "deviation": bid_params_to_dict(dev),
                            "opponent_levels": dict(
                                zip((o.id for o in others), profile)
                            ),
                        },
                    )
                    return Verdict(holds=False, witness=witness, evaluations=budget.used)
    return Verdict(holds=True, witness=None, evaluations=budget.used)


# ---------------------------------------------------------------------------
# Off-chain agreements


def _oca_leak_per_gas(spec: MechanismSpec, r: float) -> float:
    """Per-gas value leaving a miner-user coalition no matter the bids.

    Mechanisms with a base fee burn (or pay forward) the base fee of
    every included transaction; the others leak nothing once payments
    are moved off-chain.
    """
    from .mechanisms import Blended, M1559, Smoothed, Tipless

    if isinstance(spec, (M1559, Smoothed, Blended, Tipless)):
        return r
    return 0.0


def check_oca_proof(
    spec: MechanismSpec,
    instance: Instance,
    onchain_levels: Optional[Sequence[float]] = None,
) -> Verdict:
    """Can any off-chain agreement beat the best on-chain outcome?

    The on-chain side searches bid vectors over per-transaction
    candidate levels (default: 0, the base fee, base fee plus marginal
    cost, and the transaction's own value — the profile used by the
    direct coalition constructions).  The off-chain side maximizes
    coalition utility over feasible transaction subsets, with transfers
    cancelled out and only the unavoidable per-gas leak charged.
    """
    chain = instance.chain
    mu = instance.mu
    r = instance.base_fee
    budget = _Budget(instance.max_evaluations)
    leak = _oca_leak_per_gas(spec, r)

    txs = sorted(instance.txs, key=lambda t: t.id)
    oca_best = 0.0
    oca_set: tuple[str, ...] = ()
    for combo in _feasible_subsets(
        [Transaction(id=t.id, gas_limit=t.gas_limit, value=t.value, bid_params=FpaBid(0.0)) for t in txs],
        instance.env.max_block_size,
    ):
        budget.tick()
        value = sum((tx.value - mu - leak) * tx.gas_limit for tx in combo)
        if value > oca_best + TOL:
            oca_best = value
            oca_set = tuple(tx.id for tx in combo)

    onchain_best = 0.0
    values = {t.id: t.value for t in txs}
    if onchain_levels is None:
        candidate_sets = [
            sorted({0.0, r, r + mu, t.value}) for t in txs
        ]
    else:
        candidate_sets = [sorted(set(onchain_levels)) for _ in txs]
    for vector in itertools.product(*candidate_sets) if txs else iter([()]):
        pool = Mempool(
            Transaction(
                id=t.id,
                gas_limit=t.gas_limit,
                value=t.value,
                bid_params=scalar_bid(spec, level, r),
            )
            for t, level in zip(txs, vector)
        )
        budget.tick()
        block = allocate(spec, chain, pool, mode="exact")
        report = settle(spec, chain, block)
        joint = sum(
            (values[e.tx_id] - e.burn - e.forward - mu) * e.gas for e in report.entries
        )
        onchain_best = max(onchain_best, joint)

    if onchain_best >= oca_best - TOL:
        return Verdict(holds=True, witness=None, evaluations=budget.used)
    witness = Witness(
        kind="oca",
        description=(
            f"coalition of {list(oca_set)} gains {oca_best - onchain_best:.6g} gwei "
            "over the best on-chain outcome"
        ),
        utility=oca_best,
        baseline=onchain_best,
        data={
            "participants": list(oca_set),
            "oca_bid_level": 0.0 if leak == 0.0 else r,
            "leak_per_gas": leak,
        },
    )
    return Verdict(holds=False, witness=witness, evaluations=budget.used)


# ---------------------------------------------------------------------------
# First-price equivalence of the base fee refund variant


def check_1559r_fpa_equivalence(instance: Instance) -> Verdict:
    """Do the refund mechanism plus off-chain transfers reproduce first-price outcomes?

    An outcome is a feasible set of included transactions together with
    each included creator's net per-gas payment to the miner.  The
    first-price side draws payments from the bid grid; the refund side
    pays the on-chain bid (at least the base fee) plus an off-chain
    transfer drawn from the grid shifted by the base fee.  Outcome sets
    are compared per transaction and on feasible sets (the net-payment
    axis is truncated to the grid window on both sides).
    """
    r = instance.base_fee
    grid = sorted(set(instance.bid_grid))
    budget = _Budget(instance.max_evaluations)

    def close_to_grid(x: float) -> Optional[float]:
        for g in grid:
            if abs(g - x) <= MARGIN_EPS:
                return g
        return None

    fpa_payments = set(grid)
    onchain_bids = sorted({x for x in grid if x >= r - MARGIN_EPS} | {r})
    transfers = sorted({x - r for x in grid})
    refund_payments = set()
    for c in onchain_bids:
        for tau in transfers:
            budget.tick()
            snapped = close_to_grid(c + tau)
            if snapped is not None:
                refund_payments.add(snapped)

    payments_equal = fpa_payments == refund_payments

    from .mechanisms import M1559R

    refund_spec = M1559R()
    gas = [t.gas_limit for t in instance.txs]
    cap = instance.env.max_block_size
    feasible = {
        frozenset(ids)
        for ids in _index_subsets(len(gas))
        if sum(gas[i] for i in ids) <= cap
    }
    budget.tick(len(feasible))
    for t in instance.txs:
        budget.tick()
        probe = Transaction(
            id=t.id,
            gas_limit=t.gas_limit,
            value=t.value,
            bid_params=scalar_bid(refund_spec, r, r),
        )
        if not is_protocol_valid(refund_spec, probe.redacted(), r):
            witness = Witness(
                kind="outcome_mismatch",
                description=f"tx {t.id} cannot be included validly under the refund rule",
                utility=0.0,
                baseline=1.0,
                data={"tx_id": t.id},
            )
            return Verdict(holds=False, witness=witness, evaluations=budget.used)

    if payments_equal:
        return Verdict(
            holds=True,
            witness=None,
            evaluations=budget.used,
            detail=f"{len(feasible)} feasible sets x {len(fpa_payments)} payment levels",
        )
    missing = sorted(fpa_payments - refund_payments)
    extra = sorted(refund_payments - fpa_payments)
    witness = Witness(
        kind="outcome_mismatch",
        description=f"payment sets differ: missing {missing}, extra {extra}",
        utility=float(len(extra)),
        baseline=float(len(missing)),
        data={"missing": missing, "extra": extra},
    )
    return Verdict(holds=False, witness=witness, evaluations=budget.used)


def _index_subsets(n: int):
    for k in range(n + 1):
        yield from itertools.combinations(range(n), k)
