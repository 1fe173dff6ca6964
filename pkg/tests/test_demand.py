import math

import pytest
from hypothesis import given, strategies as st

from feemech.core import EnvParams, FpaBid, Mempool, Transaction
from feemech.demand import (
    EmpiricalDemand,
    LinearDemand,
    NonConcaveRevenue,
    curve_from_dict,
    is_excessively_low,
    market_clearing_price,
    mempool_demand,
    mempool_from_curve,
    monopoly_point,
    quantity,
    revenue,
)

HIGH = LinearDemand(intercept_gas=30_000_000, slope_gas_per_gwei=150_000)
LOW = LinearDemand(intercept_gas=15_000_000, slope_gas_per_gwei=75_000)


def test_linear_quantity_anchors():
    assert quantity(HIGH, 0.0) == 30_000_000
    assert quantity(HIGH, 200.0) == 0.0
    assert abs(quantity(HIGH, 116.667) - 12_500_000) <= 150_000 * 0.001 + 1


def test_market_clearing_prices():
    assert abs(market_clearing_price(HIGH, 12_500_000) - 350.0 / 3.0) < 1e-9
    assert abs(market_clearing_price(LOW, 12_500_000) - 100.0 / 3.0) < 1e-9
    small = LinearDemand(10_000_000, 150_000)
    assert market_clearing_price(small, 12_500_000) == 0.0


def test_revenue_examples():
    assert revenue(HIGH, 100.0) == pytest.approx(1.5e9)
    assert revenue(HIGH, 0.0) == 0.0
    curve = LinearDemand(20_000_000, 150_000)
    peak = revenue(curve, 200.0 / 3.0)
    assert peak == pytest.approx(6.6667e8, rel=1e-3)
    # peak dominates a coarse scan
    assert all(revenue(curve, p) <= peak + 1e-6 for p in range(0, 134))


def test_monopoly_point_supply_bound():
    point = monopoly_point(HIGH, 12_500_000)
    assert point.pbar == pytest.approx(100.0)
    assert point.p_star == pytest.approx(350.0 / 3.0)
    assert point.q_star == pytest.approx(12_500_000)


def test_monopoly_point_interior():
    point = monopoly_point(LinearDemand(20_000_000, 150_000), 12_500_000)
    assert point.p_star == pytest.approx(200.0 / 3.0)
    assert point.q_star == pytest.approx(10_000_000)


def test_monopoly_point_boundary_equals_cap():
    point = monopoly_point(LinearDemand(20_000_000, 150_000), 10_000_000)
    assert point.p_star == pytest.approx(200.0 / 3.0)
    assert point.q_star == pytest.approx(10_000_000)


def test_monopoly_rejects_degenerate_curves():
    with pytest.raises(NonConcaveRevenue):
        monopoly_point(LinearDemand(10_000_000, 0.0), 1_000_000)
    with pytest.raises(NonConcaveRevenue):
        monopoly_point(EmpiricalDemand(((5.0, 10),)), 5)


def mempool_of(*pairs):
    return Mempool(
        Transaction(id=f"t{i}", gas_limit=g, value=v, bid_params=FpaBid(v))
        for i, (v, g) in enumerate(pairs)
    )


def test_mempool_demand_threshold():
    pool = mempool_of((10.0, 5), (3.0, 7))
    assert mempool_demand(Mempool([]), 1.0) == 0
    assert mempool_demand(pool, 5.0) == 5
    assert mempool_demand(pool, 3.0) == 12  # inclusive at the threshold


def test_excessively_low_examples():
    surge = LinearDemand(35_000_000, 175_000)
    assert is_excessively_low(surge, 33.33, 0.0, 25_000_000)
    assert not is_excessively_low(surge, 60.06, 0.0, 25_000_000)
    # demand exactly equal to the block size is not excessively low
    assert not is_excessively_low(HIGH, 100.0 / 3.0, 0.0, 25_000_000)


def test_excessively_low_accepts_mempool_demand():
    pool = mempool_of((10.0, 5), (3.0, 7))
    assert is_excessively_low(pool, 2.0, 0.5, 10)  # demand 12 > 10
    assert not is_excessively_low(pool, 4.0, 0.5, 5)  # demand 5 == 5, not strict


def test_excessively_low_is_monotone_in_r():
    surge = LinearDemand(35_000_000, 175_000)
    prev = True
    for r in [x * 2.0 for x in range(40)]:
        now = is_excessively_low(surge, r, 0.0, 25_000_000)
        assert prev or not now  # once false, stays false
        prev = now


@given(
    a=st.floats(min_value=0.0, max_value=1e6),
    b=st.floats(min_value=0.0, max_value=1e9),
    p=st.floats(min_value=0.0, max_value=1e4),
    q=st.floats(min_value=0.0, max_value=1e4),
)
def test_quantity_non_increasing(a, b, p, q):
    curve = LinearDemand(intercept_gas=b, slope_gas_per_gwei=a)
    lo, hi = sorted([p, q])
    assert quantity(curve, lo) >= quantity(curve, hi)


@given(p=st.floats(min_value=0.0, max_value=199.0))
def test_clearing_price_bounded_by_inverse(p):
    assert market_clearing_price(HIGH, quantity(HIGH, p)) <= p + 1e-6


def test_empirical_demand_step_function():
    curve = EmpiricalDemand(((10.0, 5), (3.0, 7)))
    assert quantity(curve, 0.0) == 12
    assert quantity(curve, 3.0) == 12
    assert quantity(curve, 3.1) == 5
    assert market_clearing_price(curve, 12) == 0.0
    assert market_clearing_price(curve, 6) == 10.0


def test_mempool_from_curve_brackets_demand():
    curve = LinearDemand(100.0, 1.0)
    pool = mempool_from_curve(curve, tx_gas=10, price_grid_step=10.0, seed=3)
    assert len(pool) == 10
    assert sorted(round(t.value) for t in pool) == [5, 15, 25, 35, 45, 55, 65, 75, 85, 95]
    for p in range(0, 101, 10):
        assert abs(mempool_demand(pool, p) - quantity(curve, p)) <= 10


def test_mempool_from_curve_zero_and_deterministic():
    zero = LinearDemand(0.0, 1.0)
    assert len(mempool_from_curve(zero, 10, 1.0, seed=0)) == 0
    curve = LinearDemand(100.0, 1.0)
    assert mempool_from_curve(curve, 10, 1.0, seed=9) == mempool_from_curve(
        curve, 10, 1.0, seed=9
    )


def test_curve_json_round_trip():
    assert curve_from_dict(HIGH.to_dict()) == HIGH
    emp = EmpiricalDemand(((10.0, 5), (3.0, 7)))
    assert curve_from_dict(emp.to_dict()) == emp
    with pytest.raises(ValueError):
        curve_from_dict({"kind": "cubic"})
