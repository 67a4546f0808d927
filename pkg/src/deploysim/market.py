"""Bilateral trade protocol: match rule, price adaptation, cost pricing.

All money is integer monetary units (m.u.).  In the monetary mode a trade
happens iff the buyer's subjective price is >= the seller's ask; the deal
is struck at the seller's ask and quantity is capped by demand, stock and
the buyer's funds.  In the moneyless (robots) modes the price check is
omitted and quantity is simply min(demand, stock).  After every monetary
attempt both sides learn: on success the seller raises its ask and the
buyer lowers its bid by the adaptation factor; on failure the reverse.

Rounding is half-up everywhere and every adjustment moves a price by at
least 1 m.u. unless clamped at the floor of 1, so small integer prices
cannot get stuck.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

SETTLERS = "settlers"
ROBOTS = "robots"

PRICE_TOO_HIGH = "price_too_high"
OUT_OF_STOCK = "out_of_stock"
INSUFFICIENT_FUNDS = "insufficient_funds"

CASH = "cash"
BANK_TRANSFER = "transfer"


@dataclass(slots=True)
class Trade:
    quantity: int
    unit_price: int  # 0 in moneyless modes


@dataclass(slots=True)
class Refusal:
    reason: str


def div_round(num: int, den: int) -> int:
    """Round-half-up division for non-negative num, positive den."""
    return (2 * num + den) // (2 * den)


def attempt_trade(
    buyer_price: int,
    seller_ask: int,
    demand: int,
    supply: int,
    buyer_funds: int,
    mode: str = SETTLERS,
) -> Trade | Refusal:
    """One bilateral attempt.  Stock is checked first, then price, then funds."""
    if supply <= 0:
        return Refusal(OUT_OF_STOCK)
    if mode != SETTLERS:
        qty = min(demand, supply)
        if qty <= 0:
            return Refusal(INSUFFICIENT_FUNDS)
        return Trade(qty, 0)
    if buyer_price < seller_ask:
        return Refusal(PRICE_TOO_HIGH)
    qty = min(demand, supply, buyer_funds // seller_ask)
    if qty <= 0:
        return Refusal(INSUFFICIENT_FUNDS)
    return Trade(qty, seller_ask)


def _scaled_up(price: int, factor_per100: int) -> int:
    new = div_round(price * factor_per100, 100)
    if new == price:
        new = price + 1
    return new


def _scaled_down(price: int, factor_per100: int) -> int:
    new = div_round(price * 100, factor_per100)
    if new == price and price > 1:
        new = price - 1
    return max(1, new)


def adapt_prices(
    success: bool,
    buyer_price: int,
    seller_ask: int,
    factor_per100: int,
    fixed: bool = False,
) -> tuple[int, int]:
    """Post-attempt learning step; returns (new buyer price, new seller ask).

    Success: seller up, buyer down.  Failure: seller down, buyer up.
    With fixed prices both stay at their current value."""
    if fixed or factor_per100 == 100:
        return buyer_price, seller_ask
    if success:
        return (
            _scaled_down(buyer_price, factor_per100),
            _scaled_up(seller_ask, factor_per100),
        )
    return (
        _scaled_up(buyer_price, factor_per100),
        _scaled_down(seller_ask, factor_per100),
    )


def production_price(
    input_cost: int, salaries: int, units_produced: int, benefit_per100: int
) -> int:
    """Per-unit ask from a production cycle: (inputs + salaries) / units,
    scaled by the benefit factor; never below 1 m.u.

    With benefit_per100=100 this is the fabrication-cost floor under which
    a producer should not sell (waived while dismantling)."""
    if units_produced < 1:
        raise ValueError("units_produced must be >= 1")
    price = div_round((input_cost + salaries) * benefit_per100, units_produced * 100)
    return max(1, price)


# --- transaction records and monthly aggregation ---

@dataclass
class TransactionRecord:
    month: int
    buyer: str
    seller: str
    good: str
    quantity: int
    unit_price: int  # 0 in moneyless modes
    channel: str = CASH


@dataclass
class MonthlyPriceStats:
    good: str
    month: int
    mean_price: Fraction
    volume: int


def record_and_aggregate(records: list[TransactionRecord]) -> list[MonthlyPriceStats]:
    """Volume-weighted mean transacted price per good for one month's records.

    Goods with no trades emit no row; caller guarantees a single month."""
    if not records:
        return []
    month = records[0].month
    value: dict[str, int] = {}
    volume: dict[str, int] = {}
    for r in records:
        if r.month != month:
            raise ValueError("records span more than one month")
        value[r.good] = value.get(r.good, 0) + r.quantity * r.unit_price
        volume[r.good] = volume.get(r.good, 0) + r.quantity
    return [
        MonthlyPriceStats(good, month, Fraction(value[good], volume[good]), volume[good])
        for good in value
    ]


# --- event log line formats ---

def format_sale(r: TransactionRecord) -> str:
    total = r.quantity * r.unit_price
    if r.unit_price == 0:
        return f"Month {r.month}, {r.buyer} buys {r.quantity} {r.good} from {r.seller}"
    how = "in cash" if r.channel == CASH else "by transfer"
    return (
        f"Month {r.month}, {r.buyer} buys {r.quantity} {r.good}, "
        f"and pays {how}= {total}, from {r.seller}"
    )


def format_salary(month: int, payer: str, payee: str, amount: int, channel: str) -> str:
    how = "in cash" if channel == CASH else "by transfer"
    return f"Month {month}, {payer} pays salary= {amount} {how} to {payee}"


def format_transfer(month: int, payer: str, payee: str, label: str, amount: int) -> str:
    return f"Month {month}, {payer} transfers {label}= {amount} m.u. to {payee}"
