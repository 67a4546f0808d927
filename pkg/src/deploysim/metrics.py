"""Run outputs: event log, time series, wealth distribution, summaries.

Every series is an append-only list flushed at month boundaries by the
engine; CSV files are written once at the end of a run (one file per
figure family, month as the first column).  The event log streams to
`_DeployersOutput.txt` in the exact line formats of the market module;
single-robot runs append the executed command sequence at the end.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .market import (
    TransactionRecord,
    format_salary,
    format_sale,
    format_transfer,
    record_and_aggregate,
)


@dataclass
class SeriesPoint:
    month: int
    name: str
    value: Fraction


@dataclass
class WealthSnapshot:
    individual: str
    cash: int
    savings: int
    goods_value: int
    producer_value: int
    bank_equity: int

    @property
    def total(self) -> int:
        return (
            self.cash + self.savings + self.goods_value + self.producer_value
            + self.bank_equity
        )


def compute_unemployment(individuals) -> Fraction:
    """Fraction of individuals who sold no labor and earned no producer
    benefit this month."""
    if not individuals:
        return Fraction(0)
    idle = sum(
        1 for ind in individuals if not ind.employed and ind.benefit_this_month == 0
    )
    return Fraction(idle, len(individuals))


def compute_gdp_per_capita(records, n_individuals, total_sales=False) -> Fraction:
    """Final-demand expenditure per head over a batch of sale records:
    purchases by individuals and the State (with `total_sales`, every sale
    counts instead)."""
    if n_individuals <= 0:
        return Fraction(0)
    total = 0
    for r in records:
        if total_sales or r.buyer.startswith("Indiv_") or r.buyer == "TheState":
            total += r.quantity * r.unit_price
    return Fraction(total, n_individuals)


def fit_wealth_tail(totals) -> dict:
    """Log-log CCDF straight-line fit over the top 20% of wealth.

    Returns {"slope", "r2", "flat"}; an all-equal population has no tail
    spread and reports flat."""
    values = sorted((t for t in totals if t > 0), reverse=True)
    k = max(2, len(values) // 5)
    top = values[:k]
    if len(set(top)) < 2:
        return {"slope": 0.0, "r2": 0.0, "flat": True}
    x = np.log(np.asarray(top, dtype=float))
    # CCDF: P(W >= w_i) = rank_i / n
    y = np.log((np.arange(1, len(top) + 1)) / len(values))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return {"slope": float(slope), "r2": r2, "flat": False}


class MetricsStore:
    """Append-only sinks the engine writes into while simulating."""

    def __init__(self, log_sink=None, keep_log=False, keep_records=False):
        self.log_sink = log_sink  # writable text file or None
        self.keep_log = keep_log
        self.log_lines: list[str] = []
        self.keep_records = keep_records
        self.records: list[TransactionRecord] = []
        self.money_events: list[tuple] = []  # (label, month, payer, payee, amount)
        self.prices: list[tuple] = []  # (month, good_name, mean Fraction, volume)
        self.macro: list[tuple] = []  # (month, unemployment, gdp_per_capita)
        self.state_rows: list[tuple] = []
        self.cb_rows: list[tuple] = []
        self.bank_rows: dict[int, list[tuple]] = {}
        self.indiv_rows: dict[int, list[tuple]] = {}
        self.indiv_events: dict[int, list[str]] = {}
        self.command_sequence: list[tuple] = []  # (month, action, good, qty)
        self.wealth: list[WealthSnapshot] = []
        self.first_tx: dict[str, int] = {}

    def emit(self, line: str):
        if self.log_sink is not None:
            self.log_sink.write(line)
            self.log_sink.write("\n")
        if self.keep_log:
            self.log_lines.append(line)

    def log_trade(self, record: TransactionRecord, is_salary: bool):
        if self.log_sink is None and not self.keep_log:
            return
        if is_salary:
            if record.unit_price:
                self.emit(
                    format_salary(
                        record.month, record.buyer, record.seller,
                        record.unit_price, record.channel,
                    )
                )
            else:
                self.emit(format_sale(record))
        else:
            self.emit(format_sale(record))

    def log_transfer(self, month, payer, payee, label, amount):
        if self.log_sink is not None or self.keep_log:
            self.emit(format_transfer(month, payer, payee, label, amount))
        if self.keep_records:
            self.money_events.append((label, month, payer, payee, amount))

    def finalize_log(self):
        if self.command_sequence and (self.log_sink or self.keep_log):
            self.emit("Command sequence:")
            for i, (month, action, good, qty) in enumerate(self.command_sequence, 1):
                self.emit(f"{i}. Month {month}: {action} -> {qty} {good}")
        if self.log_sink is not None:
            self.log_sink.flush()


def monthly_rows_from_records(records) -> list[tuple]:
    """Replay helper: the prices rows a month's trade records imply."""
    stats = record_and_aggregate(records)
    return [(s.month, s.good, s.mean_price, s.volume) for s in stats]


# --- CSV / summary writers ---

def _fmt(value) -> str:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{float(value):.6f}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_artifacts(store: MetricsStore, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "prices.csv"),
        ["month", "good", "mean_price", "volume"],
        store.prices,
    )
    _write_csv(
        os.path.join(out_dir, "macro.csv"),
        ["month", "unemployment", "gdp_per_capita"],
        store.macro,
    )
    if store.state_rows:
        _write_csv(
            os.path.join(out_dir, "state.csv"),
            [
                "month", "cash", "savings", "total", "tax_info", "vat_info",
                "acc_unempl", "purchases", "endowment",
            ],
            store.state_rows,
        )
    if store.cb_rows:
        _write_csv(
            os.path.join(out_dir, "cb.csv"),
            ["month", "reserves", "vault", "loans", "deposits", "circulating"],
            store.cb_rows,
        )
    for bid, rows in store.bank_rows.items():
        _write_csv(
            os.path.join(out_dir, f"bank_{bid}.csv"),
            ["month", "vault", "deposits", "loans", "cb_loan", "interest_earned"],
            rows,
        )
    for uid, rows in store.indiv_rows.items():
        _write_csv(
            os.path.join(out_dir, f"indiv_{uid}.csv"),
            [
                "month", "cash", "savings", "stored_goods_value",
                "immobilized_value", "total", "employed", "events",
            ],
            rows,
        )
    if store.wealth:
        rows = [
            (
                rank,
                snap.individual,
                snap.cash,
                snap.savings,
                snap.goods_value,
                snap.producer_value,
                snap.bank_equity,
                snap.total,
            )
            for rank, snap in enumerate(
                sorted(store.wealth, key=lambda s: (-s.total, s.individual)), 1
            )
        ]
        _write_csv(
            os.path.join(out_dir, "wealth.csv"),
            [
                "rank", "individual", "cash", "savings", "goods_value",
                "producer_value", "bank_equity", "total",
            ],
            rows,
        )


def write_summary(path: str, entries: dict):
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")
