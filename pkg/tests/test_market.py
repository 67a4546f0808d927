"""Trade protocol unit tests: match rule, adaptation, pricing, aggregation."""

from fractions import Fraction

import pytest

from deploysim.market import (
    BANK_TRANSFER,
    CASH,
    INSUFFICIENT_FUNDS,
    OUT_OF_STOCK,
    PRICE_TOO_HIGH,
    ROBOTS,
    SETTLERS,
    MonthlyPriceStats,
    Refusal,
    Trade,
    TransactionRecord,
    adapt_prices,
    attempt_trade,
    div_round,
    format_salary,
    format_sale,
    format_transfer,
    production_price,
    record_and_aggregate,
)


def test_trade_at_equal_prices():
    out = attempt_trade(353, 353, 1, 5, 1000)
    assert out == Trade(1, 353)


def test_price_too_high_boundary():
    assert attempt_trade(100, 101, 1, 5, 10000) == Refusal(PRICE_TOO_HIGH)
    assert attempt_trade(101, 101, 1, 5, 10000) == Trade(1, 101)
    # identical inputs in robots mode trade anyway
    assert attempt_trade(100, 101, 1, 5, 10000, ROBOTS) == Trade(1, 0)


def test_quantity_min_rule():
    out = attempt_trade(10, 10, 7, 4, 400)
    assert out == Trade(4, 10)


def test_affordability_floor():
    # floor(900 / 400) = 2 affordable units
    out = attempt_trade(400, 400, 3, 9, 900)
    assert out == Trade(2, 400)


def test_out_of_stock():
    assert attempt_trade(10, 10, 3, 0, 100) == Refusal(OUT_OF_STOCK)
    assert attempt_trade(10, 10, 3, 0, 100, ROBOTS) == Refusal(OUT_OF_STOCK)


def test_insufficient_funds():
    assert attempt_trade(10, 10, 3, 5, 9) == Refusal(INSUFFICIENT_FUNDS)


def test_exhaustive_rule_table_small():
    """Spot version of the acceptance sweep: all pb, ps in [1, 12]."""
    for pb in range(1, 13):
        for ps in range(1, 13):
            out = attempt_trade(pb, ps, 2, 3, 100)
            if pb >= ps:
                assert isinstance(out, Trade)
                assert out.unit_price == ps
                assert out.quantity == min(2, 3, 100 // ps)
            else:
                assert out == Refusal(PRICE_TOO_HIGH)


def test_adapt_success_moves_towards_seller():
    pb, ps = adapt_prices(True, 1200, 1000, 120)
    assert ps == 1200
    assert pb == 1000


def test_adapt_failure_reverses():
    pb, ps = adapt_prices(False, 1000, 1200, 120)
    assert pb == 1200
    assert ps == 1000


def test_adapt_fixed_prices_frozen():
    for success in (True, False):
        assert adapt_prices(success, 77, 123, 120, fixed=True) == (77, 123)


def test_adapt_clamps_at_one():
    pb, ps = adapt_prices(False, 5, 1, 120)
    assert ps == 1  # cannot go below 1
    pb2, ps2 = adapt_prices(True, 1, 1, 120)
    assert pb2 == 1
    assert ps2 == 2  # minimum step of 1 upward


def test_adapt_minimum_step():
    # round(3 * 1.02) == 3 would stall; the step rule forces movement
    pb, ps = adapt_prices(True, 50, 3, 102)
    assert ps == 4
    pb, ps = adapt_prices(False, 50, 3, 102)
    assert ps == 2


def test_adapt_monotonicity_sweep():
    for price in range(1, 60):
        pb_s, ps_s = adapt_prices(True, price, price, 120)
        assert ps_s > price
        assert pb_s <= price
        pb_f, ps_f = adapt_prices(False, price, price, 120)
        assert pb_f > price
        assert ps_f <= price
        for p in (pb_s, ps_s, pb_f, ps_f):
            assert p >= 1


def test_production_price_examples():
    # (600 + 1200) / 30 * 1.2 = 72
    assert production_price(600, 1200, 30, 120) == 72
    # identity benefit
    assert production_price(0, 1200, 1, 100) == 1200
    # benefit scaling: 150 vs 120 scales the pre-rounding ask by 150/120
    a120 = production_price(600, 1200, 30, 120)
    a150 = production_price(600, 1200, 30, 150)
    assert a150 == div_round(a120 * 150, 120)


def test_production_price_floor_is_benefit_100():
    floor = production_price(600, 1200, 30, 100)
    assert floor == 60


def test_production_price_minimum_one():
    assert production_price(0, 0, 10, 120) == 1


def test_production_price_requires_units():
    with pytest.raises(ValueError):
        production_price(1, 1, 0, 120)


def test_div_round_half_up():
    assert div_round(5, 2) == 3
    assert div_round(3, 2) == 2
    assert div_round(7, 3) == 2
    assert div_round(1, 3) == 0


def test_record_and_aggregate_weighted_mean():
    records = [
        TransactionRecord(4, "I_1", "P_1", "wood_kg", 1, 100),
        TransactionRecord(4, "I_2", "P_1", "wood_kg", 3, 200),
    ]
    stats = record_and_aggregate(records)
    assert stats == [MonthlyPriceStats("wood_kg", 4, Fraction(175), 4)]


def test_record_and_aggregate_empty():
    assert record_and_aggregate([]) == []


def test_record_and_aggregate_salary_point():
    stats = record_and_aggregate(
        [TransactionRecord(9, "P_1", "I_5", "workers_n", 1, 1200)]
    )
    assert stats[0].mean_price == 1200
    assert stats[0].volume == 1


def test_record_and_aggregate_rejects_mixed_months():
    records = [
        TransactionRecord(1, "a", "b", "x", 1, 1),
        TransactionRecord(2, "a", "b", "x", 1, 1),
    ]
    with pytest.raises(ValueError):
        record_and_aggregate(records)


def test_log_line_formats():
    sale = TransactionRecord(166, "Indiv_332", "P_garment_1000022", "jacket_n", 1, 353)
    assert (
        format_sale(sale)
        == "Month 166, Indiv_332 buys 1 jacket_n, and pays in cash= 353, from P_garment_1000022"
    )
    assert (
        format_salary(164, "P_carfactory_1000168", "Indiv_332", 1200, CASH)
        == "Month 164, P_carfactory_1000168 pays salary= 1200 in cash to Indiv_332"
    )
    assert (
        format_transfer(167, "Indiv_332", "TheState", "Tax", 130)
        == "Month 167, Indiv_332 transfers Tax= 130 m.u. to TheState"
    )
    assert (
        format_transfer(169, "TheState", "Indiv_332", "unemployPayment", 128)
        == "Month 169, TheState transfers unemployPayment= 128 m.u. to Indiv_332"
    )
    transfer_sale = TransactionRecord(7, "B", "S", "wood_kg", 2, 30, BANK_TRANSFER)
    assert "pays by transfer= 60" in format_sale(transfer_sale)
    robot_sale = TransactionRecord(3, "Indiv_1", "T_pick_1000000", "pin_n", 2, 0)
    assert format_sale(robot_sale) == "Month 3, Indiv_1 buys 2 pin_n from T_pick_1000000"
