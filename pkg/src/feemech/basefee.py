"""Base fee update rules and their adjustment functions.

A decomposable rule multiplies the previous base fee by an adjustment
factor that depends only on the size of the previous block:

    r_cur = r_pred * f(s_pred)        with f(s) = 1 + h(s), e^h(s), ...
    h(s)  = learning_rate * (s - target) / target

Variants:

* ``Linear1559``: f = 1 + h.  With the default learning rate of 1/8 a
  double-target block raises the fee 12.5% and an empty block lowers it
  12.5%; a full block followed by an empty one lands at 63/64 of the
  starting fee.
* ``Exponential``: f = e^h.  Path independent: the fee after a sequence
  of blocks depends only on the total gas consumed, not its order.
* ``Taylor2``: f = 1 + h + h^2/2, the quadratic compromise between the
  two above.
* ``SlidingWindow``: keeps only the most recent ``window`` factors of an
  inner rule, so old blocks age out of the fee.

Every rule floors the result at ``min_base_fee``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .core import Block, FeemechError


class InsufficientHistory(FeemechError):
    """Sliding-window rule asked to update with fewer blocks than its window."""


@dataclass(frozen=True)
class Linear1559:
    r0: float
    learning_rate: float = 0.125
    min_base_fee: float = 1.0

    def __post_init__(self) -> None:
        _check_rule(self)


@dataclass(frozen=True)
class Exponential:
    r0: float
    learning_rate: float = 0.125
    min_base_fee: float = 1.0

    def __post_init__(self) -> None:
        _check_rule(self)


@dataclass(frozen=True)
class Taylor2:
    r0: float
    learning_rate: float = 0.125
    min_base_fee: float = 1.0

    def __post_init__(self) -> None:
        _check_rule(self)


@dataclass(frozen=True)
class SlidingWindow:
    window: int
    inner: Union[Linear1559, Exponential, Taylor2]

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")

    @property
    def r0(self) -> float:
        return self.inner.r0

    @property
    def min_base_fee(self) -> float:
        return self.inner.min_base_fee


UpdateRule = Union[Linear1559, Exponential, Taylor2, SlidingWindow]


def _check_rule(rule) -> None:
    if not (0 < rule.learning_rate < 1):
        raise ValueError("learning_rate must be in (0, 1)")
    if rule.min_base_fee < 0:
        raise ValueError("min_base_fee must be >= 0")
    if rule.r0 < rule.min_base_fee:
        raise ValueError("r0 must be >= min_base_fee")


def adjustment(rule: UpdateRule, gas_used: float, target: float) -> float:
    """Dimensionless factor applied to the previous base fee."""
    if isinstance(rule, SlidingWindow):
        return adjustment(rule.inner, gas_used, target)
    h = rule.learning_rate * (gas_used - target) / target
    if isinstance(rule, Linear1559):
        return 1.0 + h
    if isinstance(rule, Exponential):
        return math.exp(h)
    if isinstance(rule, Taylor2):
        return 1.0 + h + h * h / 2.0
    raise TypeError(f"unknown rule: {rule!r}")


def next_base_fee(
    rule: UpdateRule,
    r_pred: float,
    pred_block: Block,
    target: float,
    history: Sequence[Block] = (),
) -> float:
    """Base fee for the block following ``pred_block``.

    For decomposable rules this is r_pred times the adjustment factor.
    For sliding windows, ``history`` must hold at least ``window`` blocks
    ending with ``pred_block``; the result is r0 times the product of the
    last ``window`` factors.
    """
    if isinstance(rule, SlidingWindow):
        if history and history[-1] is not pred_block and history[-1] != pred_block:
            raise ValueError("history must end with pred_block")
        if len(history) < rule.window:
            raise InsufficientHistory(
                f"need {rule.window} blocks, have {len(history)}"
            )
        fee = rule.r0
        for block in history[-rule.window:]:
            fee *= adjustment(rule.inner, block.gas_used, target)
        return max(rule.min_base_fee, fee)
    fee = r_pred * adjustment(rule, pred_block.gas_used, target)
    return max(rule.min_base_fee, fee)


def base_fee_from_history(
    rule: UpdateRule, blocks: Sequence[Block], target: float
) -> float:
    """Fold the update rule over a full block history.

    Decomposable rules floor at every step, matching a block-by-block
    simulation.  Sliding windows use the last ``window`` blocks (or all
    of them while the chain is younger than the window).
    """
    if isinstance(rule, SlidingWindow):
        fee = rule.r0
        for block in blocks[-rule.window:]:
            fee *= adjustment(rule.inner, block.gas_used, target)
        return max(rule.min_base_fee, fee)
    fee = rule.r0
    for block in blocks:
        fee = max(rule.min_base_fee, fee * adjustment(rule, block.gas_used, target))
    return fee


_RULE_NAMES = {
    "linear1559": Linear1559,
    "exponential": Exponential,
    "taylor2": Taylor2,
}


def rule_to_dict(rule: UpdateRule) -> dict:
    if isinstance(rule, SlidingWindow):
        inner = rule_to_dict(rule.inner)
        return {"rule": "sliding_window", "window": rule.window, "inner": inner}
    for name, cls in _RULE_NAMES.items():
        if isinstance(rule, cls):
            return {
                "rule": name,
                "learning_rate": rule.learning_rate,
                "r0": rule.r0,
                "min_base_fee": rule.min_base_fee,
            }
    raise TypeError(f"unknown rule: {rule!r}")


def rule_from_dict(data: dict) -> UpdateRule:
    name = data.get("rule")
    if name == "sliding_window":
        inner = rule_from_dict(data["inner"])
        if isinstance(inner, SlidingWindow):
            raise ValueError("sliding windows do not nest")
        return SlidingWindow(window=int(data["window"]), inner=inner)
    if name not in _RULE_NAMES:
        raise ValueError(f"unknown update rule: {name!r}")
    return _RULE_NAMES[name](
        r0=float(data["r0"]),
        learning_rate=float(data.get("learning_rate", 0.125)),
        min_base_fee=float(data.get("min_base_fee", 1.0)),
    )
