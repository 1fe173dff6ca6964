"""Demand curves, market clearing, and monopoly pricing.

A demand curve D(p) gives the total gas demanded at gas price p
(gwei/gas).  Two variants are supported:

* ``LinearDemand``: D(p) = max(0, b - a*p), the workhorse for the
  trajectory scenarios.
* ``EmpiricalDemand``: the step function induced by a set of pending
  transactions, D(p) = sum of gas over transactions with value >= p.

Monopoly analysis (the revenue maximizer of R(p) = p * D(p), capped
below by the market-clearing price) is defined only for curves with
strictly concave revenue, which here means non-degenerate linear ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .core import FeemechError, FpaBid, Mempool, Transaction


class NonConcaveRevenue(FeemechError):
    """Monopoly analysis requested for a curve without strictly concave revenue."""


@dataclass(frozen=True)
class LinearDemand:
    """D(p) = max(0, intercept_gas - slope_gas_per_gwei * p)."""

    intercept_gas: float
    slope_gas_per_gwei: float

    def __post_init__(self) -> None:
        if self.intercept_gas < 0 or self.slope_gas_per_gwei < 0:
            raise ValueError("intercept and slope must be >= 0")

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "intercept_gas": self.intercept_gas,
            "slope_gas_per_gwei": self.slope_gas_per_gwei,
        }


@dataclass(frozen=True)
class EmpiricalDemand:
    """Step demand derived from (value, gas) pairs, e.g. a mempool snapshot."""

    points: tuple[tuple[float, int], ...]

    def __init__(self, points):
        ordered = tuple(sorted((float(v), int(g)) for v, g in points))
        if any(v < 0 or g < 1 for v, g in ordered):
            raise ValueError("points need value >= 0 and gas >= 1")
        object.__setattr__(self, "points", ordered)

    @staticmethod
    def from_mempool(mempool: Mempool) -> "EmpiricalDemand":
        return EmpiricalDemand((tx.value, tx.gas_limit) for tx in mempool)

    def to_dict(self) -> dict:
        return {"kind": "empirical", "points": [list(p) for p in self.points]}


DemandCurve = Union[LinearDemand, EmpiricalDemand]


def curve_from_dict(data: dict) -> DemandCurve:
    kind = data.get("kind")
    if kind == "linear":
        return LinearDemand(
            intercept_gas=float(data["intercept_gas"]),
            slope_gas_per_gwei=float(data["slope_gas_per_gwei"]),
        )
    if kind == "empirical":
        return EmpiricalDemand(tuple((v, g) for v, g in data["points"]))
    raise ValueError(f"unknown demand curve kind: {kind!r}")


def quantity(curve: DemandCurve, p: float) -> float:
    """Gas demanded at price ``p``; non-increasing in p."""
    if p < 0:
        raise ValueError("price must be >= 0")
    if isinstance(curve, LinearDemand):
        return max(0.0, curve.intercept_gas - curve.slope_gas_per_gwei * p)
    return float(sum(g for v, g in curve.points if v >= p))


def market_clearing_price(curve: DemandCurve, supply: float) -> float:
    """Smallest price at which demand does not exceed ``supply``.

    Zero when the curve demands no more than the supply even for free.
    For step curves the returned price is the infimum of the clearing
    set, which is always one of the recorded values (or zero).
    """
    if supply < 0:
        raise ValueError("supply must be >= 0")
    if quantity(curve, 0.0) <= supply:
        return 0.0
    if isinstance(curve, LinearDemand):
        if curve.slope_gas_per_gwei == 0:
            # Constant demand above supply never clears; price is unbounded.
            raise ValueError("constant demand exceeding supply has no clearing price")
        return (curve.intercept_gas - supply) / curve.slope_gas_per_gwei
    # Step curve: crossing happens at one of the recorded values.
    for v, _ in sorted(curve.points):
        if quantity(curve, v) <= supply:
            return v
    # Demand above every value is zero, so the top value clears.
    return max(v for v, _ in curve.points)


def revenue(curve: DemandCurve, p: float) -> float:
    """R(p) = p * D(p), in gwei."""
    return p * quantity(curve, p)


@dataclass(frozen=True)
class MonopolyPoint:
    """Unconstrained revenue maximizer plus the supply-capped monopoly point."""

    pbar: float
    p_star: float
    q_star: float


def monopoly_point(curve: DemandCurve, max_gas: float) -> MonopolyPoint:
    """Monopoly price and quantity for a supply cap of ``max_gas``.

    p* is the larger of the revenue-maximizing price and the
    market-clearing price for ``max_gas``; q* = D(p*) = min(D(pbar), G).
    Only linear curves with positive slope and intercept qualify.
    """
    if not isinstance(curve, LinearDemand):
        raise NonConcaveRevenue("monopoly analysis requires a linear demand curve")
    b, a = curve.intercept_gas, curve.slope_gas_per_gwei
    if a <= 0 or b <= 0:
        raise NonConcaveRevenue("revenue is not strictly concave for degenerate curves")
    pbar = b / (2 * a)
    p_star = max(pbar, market_clearing_price(curve, max_gas))
    q_star = quantity(curve, p_star)
    return MonopolyPoint(pbar=pbar, p_star=p_star, q_star=q_star)


def mempool_demand(mempool: Mempool, p: float) -> int:
    """Gas of pending transactions whose value is at least ``p``."""
    if p < 0:
        raise ValueError("price must be >= 0")
    return sum(tx.gas_limit for tx in mempool if tx.value >= p)


def is_excessively_low(
    demand: Union[Mempool, DemandCurve], r: float, mu: float, max_gas: float
) -> bool:
    """True when demand at price r + mu strictly exceeds the maximum block size.

    Demand exactly equal to the maximum is not excessively low.
    """
    if r < 0 or mu < 0:
        raise ValueError("r and mu must be >= 0")
    if isinstance(demand, Mempool):
        d = mempool_demand(demand, r + mu)
    else:
        d = quantity(demand, r + mu)
    return d > max_gas


def mempool_from_curve(
    curve: DemandCurve,
    tx_gas: int,
    price_grid_step: float,
    seed: int,
) -> Mempool:
    """Discretize a demand curve into equal-gas transactions.

    Transaction j is placed at the price where cumulative demand reaches
    (j - 1/2) * tx_gas, so the resulting step demand brackets D within
    half a transaction of gas at every price (and in particular at every
    multiple of ``price_grid_step``).  The construction is deterministic;
    the seed only namespaces the generated ids so distinct draws do not
    collide in one mempool.
    """
    if tx_gas < 1:
        raise ValueError("tx_gas must be >= 1")
    if price_grid_step <= 0:
        raise ValueError("price_grid_step must be > 0")
    d0 = quantity(curve, 0.0)
    n = int(d0 / tx_gas + 0.5)
    txs = []
    for j in range(1, n + 1):
        target = (j - 0.5) * tx_gas
        price = _inverse_demand(curve, target)
        bid = FpaBid(gas_price=price)
        txs.append(
            Transaction(
                id=f"d{seed:06d}-{j:06d}",
                gas_limit=tx_gas,
                value=price,
                bid_params=bid,
            )
        )
    return Mempool(txs)


def _inverse_demand(curve: DemandCurve, target_gas: float) -> float:
    """Price at which demand equals ``target_gas`` (largest such price for steps)."""
    if isinstance(curve, LinearDemand):
        if curve.slope_gas_per_gwei == 0:
            return 0.0
        return max(0.0, (curve.intercept_gas - target_gas) / curve.slope_gas_per_gwei)
    candidates = [v for v, _ in curve.points if quantity(curve, v) >= target_gas]
    return max(candidates) if candidates else 0.0
