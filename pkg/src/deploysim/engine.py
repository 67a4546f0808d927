"""Deterministic simulation driver.

One run = one thread walking `12 * nYears` months.  Each month the
individuals execute their activity in a freshly shuffled order, then the
state runs its pass, then banks accrue interest and square their reserves,
then metrics flush and the conservation invariant is checked exactly.

Randomness comes from named substreams derived from (seed, name) so that
adding a new random consumer never perturbs the existing ones; identical
(config, seed) pairs produce byte-identical artifacts.

Modes: the monetary settlers economy; the moneyless robots colony (same
machinery, no price/fund checks, no banks or taxes); and the single-robot
sequencer, a tiny robots colony with one homunculus individual per task
and an arrivals schedule, whose output is the executed command sequence.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import agents as ag
from .config import ConfigModel
from .market import CASH, INSUFFICIENT_FUNDS, OUT_OF_STOCK, PRICE_TOO_HIGH, \
    TransactionRecord, div_round
from .metrics import MetricsStore, WealthSnapshot, compute_unemployment

SETTLERS_MODE = "settlers"
ROBOTS_MODE = "robots"
SINGLE_ROBOT_MODE = "single-robot"

WORKERS_NAME = "workers_n"


class Unschedulable(Exception):
    """A required item never arrived / was never produced in the horizon."""


def substream(seed: int, name: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class RngStreams:
    __slots__ = ("seed", "ordering", "neighbors", "lifetimes", "suggestions",
                 "salaries", "banks")

    def __init__(self, seed: int):
        self.seed = seed
        self.ordering = substream(seed, "ordering")
        self.neighbors = substream(seed, "neighbors")
        self.lifetimes = substream(seed, "lifetimes")
        self.suggestions = substream(seed, "suggestions")
        self.salaries = substream(seed, "salaries")
        self.banks = substream(seed, "banks")


@dataclass
class RunArtifacts:
    mode: str
    months_run: int
    seed: int
    store: MetricsStore
    refusals: dict
    first_tx: dict
    state_wishes_done_month: int | None
    command_sequence: list
    violations: list
    world: object = field(repr=False, default=None)

    @property
    def log_lines(self):
        return self.store.log_lines

    @property
    def records(self):
        return self.store.records


class World:
    """All mutable run state plus the services agents rely on."""

    def __init__(self, model: ConfigModel, seed: int, mode: str,
                 store: MetricsStore, strict: bool = True, track=()):
        cv = model.control
        self.cv = cv
        self.mode = mode
        self.monetary = mode == SETTLERS_MODE
        self.fixed_prices = bool(cv.b_fixed_prices)
        self.adapt_factor = max(100, cv.price_adapt_default_per100)
        self.benefit_per100 = cv.price_benefit_per100
        self.vat_per100 = cv.vat_per100 if self.monetary else 0
        self.strict = strict
        self.store = store
        self.violations: list[str] = []
        self.month = 0

        # goods table (workers always present)
        names = model.good_names()
        if WORKERS_NAME not in names:
            names = names + [WORKERS_NAME]
        self.good_names = names
        self.good_index = {n: i for i, n in enumerate(names)}
        n_goods = len(names)
        self.n_goods = n_goods
        self.good_key = n_goods + 1
        self.workers_good = self.good_index[WORKERS_NAME]
        self.primary_goods = {
            self.good_index[n] for n in model.primary_resources
        }
        self.lifetime = [0] * n_goods
        for spec in model.producers:
            for prod in spec.products:
                gi = self.good_index[prod.good]
                if prod.lifetime_steps and not self.lifetime[gi]:
                    self.lifetime[gi] = prod.lifetime_steps

        self.producer_specs = [
            self._compile_spec(i, spec) for i, spec in enumerate(model.producers)
        ]
        self.wishes_individual = [
            (self.good_index[w.good], w.quantity, w.recurring)
            for w in model.wishes_individual
        ]
        self.arrivals = sorted(
            (a.month, self.good_index[a.good], a.quantity) for a in model.arrivals
        )

        self.rng = RngStreams(seed)
        self.rng_neighbors = self.rng.neighbors
        self.rng_suggestions = self.rng.suggestions
        self.rng_banks = self.rng.banks
        self._lifetime_rng = self.rng.lifetimes

        # market bookkeeping
        self.ever_traded = [False] * n_goods
        self.first_tx: dict[int, int] = {}
        self.last_mean: dict[int, int] = {}
        self.month_value = [0] * n_goods
        self.month_volume = [0] * n_goods
        self.salary_hist: list[tuple[int, int]] = []  # (value, qty) last 12 months
        self.final_sales_year = 0
        self.final_sales_month = 0
        self.refusals = {PRICE_TOO_HIGH: 0, OUT_OF_STOCK: 0, INSUFFICIENT_FUNDS: 0}

        # agents
        n = cv.n_individuals
        monetary_base = cv.monetary_base_per_capita * n
        self.cb = ag.CentralBank(
            monetary_base, cv.liability_rate_per1000, cv.asset_rate_per1000
        )
        self.banks: list[ag.Bank] = []
        self.state = ag.StateAgent(monetary_base)
        self.state.bank = self.cb
        if self.monetary:
            self.state.deposit = monetary_base
            self.cb.total_deposits = monetary_base
        self.state.wishes = [
            [self.good_index[w.good], w.quantity, 0] for w in model.wishes_state
        ]
        salaries = self.rng.salaries
        w = self.workers_good
        self.individuals = [
            ag.Individual(i, salaries.randint(500, 5000), w) for i in range(n)
        ]
        self.pool: list = []
        for ind in self.individuals:
            ind.pool_idx = len(self.pool)
            self.pool.append(ind)
        self.month_perm: list = []
        self.all_producers: list[ag.Producer] = []
        self._next_pid = 1000000
        self.track_set = set(track)
        self.track_order = tuple(sorted(self.track_set))
        self.state_wishes_done_month: int | None = None
        self.command_log = [] if mode == SINGLE_ROBOT_MODE else None

        if mode == SINGLE_ROBOT_MODE:
            self._setup_single_robot()

    # -- compilation --

    def _compile_spec(self, index, spec):
        products = []
        for prod in spec.products:
            worker_num = worker_den = 0
            consumed = []
            for g, coef in prod.consumed.items():
                gi = self.good_index[g]
                if gi == self.workers_good:
                    worker_num, worker_den = coef.numerator, coef.denominator
                else:
                    consumed.append((gi, coef.numerator, coef.denominator))
            non_consumed = []
            for g, coef in prod.non_consumed.items():
                gi = self.good_index[g]
                if gi == self.workers_good:
                    worker_num, worker_den = coef.numerator, coef.denominator
                    continue
                waiver = spec.immobilized_minimums.get(g)
                if waiver is not None and waiver > 0:
                    wnum, wden = waiver.numerator, waiver.denominator
                else:
                    wnum, wden = 0, 1
                non_consumed.append(
                    (gi, coef.numerator, coef.denominator, wnum, wden)
                )
            products.append(
                ag.CompiledProduct(
                    self.good_index[prod.good],
                    prod.lifetime_steps or 0,
                    prod.duration_steps or 0,
                    consumed,
                    non_consumed,
                    worker_num,
                    worker_den,
                )
            )
        required = []
        for cp in products:
            for gi, _, _ in cp.consumed:
                if gi not in required:
                    required.append(gi)
            for gi, _, _, wnum, _ in cp.non_consumed:
                if wnum == 0 and gi not in required:
                    required.append(gi)
        return ag.CompiledProducerSpec(index, spec.name, products, required)

    def _setup_single_robot(self):
        """One homunculus per task producer; Indiv_0 holds the goals and
        the arriving parts tray."""
        needed = 1 + len(self.producer_specs)
        while len(self.individuals) < needed:
            i = len(self.individuals)
            ind = ag.Individual(i, 1, self.workers_good)
            self.individuals.append(ind)
            ind.pool_idx = len(self.pool)
            self.pool.append(ind)
        del self.individuals[needed:]
        self.pool = [a for a in self.pool if a.kind != ag.INDIV or a.uid < needed]
        for idx, a in enumerate(self.pool):
            a.pool_idx = idx
        for i, spec in enumerate(self.producer_specs, start=1):
            owner = self.individuals[i]
            producer = ag.Producer(self.next_pid(), spec, owner, 0)
            owner.producer = producer
            self.all_producers.append(producer)

    # -- services used by agents --

    def next_pid(self) -> int:
        pid = self._next_pid
        self._next_pid += 1
        return pid

    def draw_lifetime(self, lifetime: int) -> int:
        u = 0.9 + 0.2 * self._lifetime_rng.random()
        return max(1, int(lifetime * u + 0.5))

    def begin_month(self):
        """Reshuffle the interaction permutation; each agent's neighbor
        sample is a fixed window into it, which is an exactly uniform
        without-replacement draw at a fraction of the RNG cost."""
        perm = self.pool[:]
        self.rng_neighbors.shuffle(perm)
        self.month_perm = perm

    def sample_neighbors(self, agent) -> list:
        perm = self.month_perm
        n = len(perm)
        if n == 0:
            return []
        k = self.cv.n_max_interacting_neighbors
        if k >= n:
            return [a for a in perm if a is not agent]
        start = (agent.uid * 2654435761) % n
        end = start + k + 1
        window = perm[start:end]
        if end > n:
            window += perm[: end - n]
        try:
            window.remove(agent)
        except ValueError:
            window.pop()
        return window

    def pool_add(self, agent):
        agent.pool_idx = len(self.pool)
        self.pool.append(agent)

    def pool_remove(self, agent):
        idx = agent.pool_idx
        if idx < 0:
            return
        last = self.pool[-1]
        self.pool[idx] = last
        last.pool_idx = idx
        self.pool.pop()
        agent.pool_idx = -1

    def cash_buffer(self, ind) -> int:
        return 2 * self.reservation_wage(ind)

    def reservation_wage(self, ind) -> int:
        """Believed cost of one month of recurring wishes; a worker will
        not undercut below subsistence."""
        total = 0
        beliefs = ind.beliefs
        for good, qty, recurring in self.wishes_individual:
            if recurring:
                total += qty * beliefs.get(good, 1)
        return total if total > 0 else 1

    def reference_salary(self) -> int:
        value = qty = 0
        for v, q in self.salary_hist:
            value += v
            qty += q
        if qty == 0:
            return 1
        return max(1, div_round(value, qty))

    def record_trade(self, buyer, seller, good, qty, price, channel):
        total = qty * price
        self.month_value[good] += total
        self.month_volume[good] += qty
        if not self.ever_traded[good]:
            self.ever_traded[good] = True
            self.first_tx[good] = self.month
        if buyer.kind != ag.PRODUCER and good != self.workers_good:
            self.final_sales_month += total
        store = self.store
        is_salary = good == self.workers_good
        if store.keep_records:
            store.records.append(
                TransactionRecord(
                    self.month, buyer.name, seller.name,
                    self.good_names[good], qty, price, channel,
                )
            )
        if store.log_sink is not None or store.keep_log:
            record = TransactionRecord(
                self.month, buyer.name, seller.name,
                self.good_names[good], qty, price, channel,
            )
            store.log_trade(record, is_salary)

    def log_transfer(self, payer, payee, label, amount):
        self.store.log_transfer(self.month, payer.name, payee.name, label, amount)

    def track_event(self, ind, event: str):
        if ind.uid in self.track_set:
            self.store.indiv_events.setdefault(ind.uid, []).append(
                f"m{self.month}:{event}"
            )

    def violation(self, message: str):
        msg = f"month {self.month}: {message}"
        if self.strict:
            raise ag.InvariantViolation(msg)
        self.violations.append(msg)

    # -- wealth valuation --

    def value_goods(self, holder, beliefs) -> int:
        total = 0
        for good, qty in holder.items():
            price = beliefs.get(good) or self.last_mean.get(good, 1)
            total += qty * price
        return total

    def wealth_components(self, ind):
        savings = ind.deposit - ind.loan
        goods_value = self.value_goods(ind.home, ind.beliefs) + self.value_goods(
            ind.on_sale, ind.beliefs
        )
        producer_value = 0
        p = ind.producer
        if p is not None and p.state != ag.DISMANTLING:
            producer_value = (
                p.cash + p.deposit - p.loan
                + self.value_goods(p.held, p.beliefs)
                + self.value_goods(p.on_sale, p.asks)
            )
        bank_equity = 0
        for bank in self.banks:
            if bank.owner is ind:
                bank_equity += bank.equity()
        return savings, goods_value, producer_value, bank_equity


# --- monthly passes beyond individuals ---

def state_monthly(world: World):
    st = world.state
    demand = {}
    wanted = []
    for wish in st.wishes:
        need = wish[1] - wish[2]
        if need > 0:
            demand[wish[0]] = need
            wanted.append(wish[0])
    st.demand = demand  # stays visible to producers as a standing tender
    if wanted:
        neighbors = world.sample_neighbors(st)
        ag.buy_goods(world, st, neighbors, wanted)
    if not world.monetary:
        return
    ben = div_round(world.cv.pay_unempl_per100 * world.reference_salary(), 100)
    if ben > 0:
        for ind in world.individuals:
            if ind.employed or ind.benefit_this_month:
                continue
            if st.cash + st.deposit < ben:
                break
            if ag.pay(world, st, ind, ben) is None:
                break
            st.acc_unempl += ben
            world.log_transfer(st, ind, "unemployPayment", ben)
    if world.month % 12 == 11:
        collect_income_tax(world)


def collect_income_tax(world: World):
    """Progressive annual personal income tax: three brackets anchored at
    the configured rate, split at the terciles of positive incomes."""
    cv = world.cv
    incomes = sorted(
        ind.annual_income for ind in world.individuals if ind.annual_income > 0
    )
    if incomes:
        t1 = incomes[len(incomes) // 3]
        t2 = incomes[(2 * len(incomes)) // 3]
        st = world.state
        for ind in world.individuals:
            income = ind.annual_income
            ind.annual_income = 0
            if income <= 0:
                continue
            if income <= t1:
                mult = cv.tax_low_mult_per100
            elif income <= t2:
                mult = cv.tax_mid_mult_per100
            else:
                mult = cv.tax_high_mult_per100
            tax = min(div_round(income * cv.tax_per100 * mult, 100 * 100),
                      ind.funds())
            if tax > 0 and ag.pay(world, ind, st, tax) is not None:
                st.tax_info += tax
                world.log_transfer(ind, st, "Tax", tax)


def banks_monthly(world: World):
    if not world.monetary:
        return
    cv = world.cv
    cb = world.cb
    # interest on client accounts (the state, as owner of the CB, earns none)
    for ind in world.individuals:
        _accrue(ind)
        p = ind.producer
        if p is not None:
            _accrue(p)
    # commercial banks square reserves against the CB and accrue on cb_loan
    for bank in world.banks:
        required = -(-cv.reserve_ratio_per100 * bank.total_deposits // 100)
        if bank.vault < required:
            ag._bank_ensure_liquidity(world, bank, required)
            if bank.vault < required:
                world.violation(
                    f"{bank.name} reserves {bank.vault} below required {required}"
                )
        else:
            excess = bank.vault - 2 * required
            if excess > 0:
                bank.vault -= excess
                cb.vault += excess
                bank.cb_loan -= excess
        if bank.cb_loan > 0:
            bank.cb_loan += div_round(bank.cb_loan * cb.asset_rate, 1000)
        elif bank.cb_loan < 0:
            bank.cb_loan -= div_round(-bank.cb_loan * cb.liability_rate, 1000)
    # new banks appear when CB depositors cross the capital threshold
    if cv.max_n_banks is None or len(world.banks) < cv.max_n_banks:
        capital = cv.banks_init_capital
        for ind in world.individuals:
            if ind.bank is cb and ind.deposit >= capital:
                if ag.found_bank(world, ind) is None:
                    break
                if (cv.max_n_banks is not None
                        and len(world.banks) >= cv.max_n_banks):
                    break


def _accrue(agent):
    bank = agent.bank
    if bank is None:
        return
    if agent.deposit:
        interest = div_round(agent.deposit * bank.liability_rate, 1000)
        if interest:
            agent.deposit += interest
            bank.total_deposits += interest
    if agent.loan:
        interest = div_round(agent.loan * bank.asset_rate, 1000)
        if interest:
            agent.loan += interest
            bank.total_loans += interest
            bank.interest_earned += interest


def check_conservation(world: World):
    total = world.state.cash + world.cb.vault
    for ind in world.individuals:
        total += ind.cash
        p = ind.producer
        if p is not None:
            total += p.cash
    for bank in world.banks:
        total += bank.vault
    if total != world.cb.monetary_base:
        world.violation(
            f"monetary base {world.cb.monetary_base} != circulating total {total}"
        )


def flush_month(world: World):
    store = world.store
    month = world.month
    names = world.good_names
    value = world.month_value
    volume = world.month_volume
    w = world.workers_good
    salary_point = (value[w], volume[w])
    for good in range(world.n_goods):
        q = volume[good]
        if q:
            mean = Fraction(value[good], q)
            store.prices.append((month, names[good], mean, q))
            world.last_mean[good] = div_round(value[good], q)
            value[good] = 0
            volume[good] = 0
    world.salary_hist.append(salary_point)
    if len(world.salary_hist) > 12:
        del world.salary_hist[0]
    unemployment = compute_unemployment(world.individuals)
    world.final_sales_year += world.final_sales_month
    world.final_sales_month = 0
    if month % 12 == 11:
        gdp = Fraction(world.final_sales_year, max(1, len(world.individuals)))
        world.final_sales_year = 0
    else:
        gdp = ""
    store.macro.append((month, unemployment, gdp))
    if world.monetary:
        st = world.state
        store.state_rows.append(
            (
                month, st.cash, st.deposit, st.cash + st.deposit, st.tax_info,
                st.vat_info, st.acc_unempl, st.purchases_info, st.endowment,
            )
        )
        cb = world.cb
        cb_loans = cb.total_loans + sum(
            b.cb_loan for b in world.banks if b.cb_loan > 0
        )
        circulating = cb.monetary_base - cb.vault
        store.cb_rows.append(
            (
                month, cb.monetary_base, cb.vault, cb_loans, cb.total_deposits,
                circulating,
            )
        )
        for bank in world.banks:
            store.bank_rows.setdefault(bank.bid, []).append(
                (
                    month, bank.vault, bank.total_deposits, bank.total_loans,
                    bank.cb_loan, bank.interest_earned,
                )
            )
    for uid in world.track_order:
        ind = world.individuals[uid]
        savings, goods_value, producer_value, bank_equity = (
            world.wealth_components(ind)
        )
        immobilized = 0
        p = ind.producer
        if p is not None and p.state != ag.DISMANTLING:
            immobilized = world.value_goods(p.held, p.beliefs)
        events = ";".join(store.indiv_events.pop(uid, []))
        total = ind.cash + savings + goods_value + producer_value + bank_equity
        store.indiv_rows.setdefault(uid, []).append(
            (
                month, ind.cash, savings, goods_value, immobilized, total,
                int(ind.employed), events,
            )
        )
    if world.state_wishes_done_month is None and world.state.wishes:
        if all(wish[2] >= wish[1] for wish in world.state.wishes):
            world.state_wishes_done_month = month
    check_conservation(world)


def take_wealth_snapshot(world: World):
    store = world.store
    for ind in world.individuals:
        savings, goods_value, producer_value, bank_equity = (
            world.wealth_components(ind)
        )
        store.wealth.append(
            WealthSnapshot(
                ind.name, ind.cash, savings, goods_value, producer_value,
                bank_equity,
            )
        )


def run_simulation(
    model: ConfigModel,
    seed: int | None = None,
    mode: str | None = None,
    out_sink=None,
    keep_log: bool = False,
    keep_records: bool = False,
    strict: bool = True,
    track=(),
    stop_when_state_done: bool = False,
) -> RunArtifacts:
    """Simulate `model` and return the run artifacts.

    `mode` overrides the config flags; `out_sink` is an optional writable
    text stream for the event log; `track` lists individual ids whose
    monthly wealth rows are collected (the inspect feature)."""
    if mode is None:
        if model.control.b_single_robot:
            mode = SINGLE_ROBOT_MODE
        elif model.control.b_robots_colony:
            mode = ROBOTS_MODE
        else:
            mode = SETTLERS_MODE
    if seed is None:
        seed = model.control.rng_seed
    store = MetricsStore(out_sink, keep_log, keep_records)
    world = World(model, seed, mode, store, strict=strict, track=track)
    months = 12 * model.control.n_years
    individuals = world.individuals
    rng_order = world.rng.ordering
    arrivals = world.arrivals
    arrival_pos = 0
    months_run = 0
    for month in range(months):
        world.month = month
        world.begin_month()
        if arrivals is not None and arrival_pos < len(arrivals):
            tray = individuals[0].on_sale if individuals else None
            while arrival_pos < len(arrivals) and arrivals[arrival_pos][0] <= month:
                _, good, qty = arrivals[arrival_pos]
                arrival_pos += 1
                if tray is not None:
                    tray[good] = tray.get(good, 0) + qty
        for ind in individuals:
            ind.employed = False
            ind.salary_tried = False
            ind.benefit_this_month = 0
            ind.attempted.clear()
            p = ind.producer
            if p is not None:
                p.attempted.clear()
        world.state.attempted.clear()
        order = individuals[:]
        rng_order.shuffle(order)
        for ind in order:
            ag.individual_monthly_activity(world, ind)
        state_monthly(world)
        banks_monthly(world)
        flush_month(world)
        months_run = month + 1
        if world.command_log is not None or stop_when_state_done:
            if _goals_complete(world):
                break
    take_wealth_snapshot(world)
    if world.command_log is not None:
        store.command_sequence = world.command_log
    store.finalize_log()
    first_tx = {world.good_names[g]: m for g, m in world.first_tx.items()}
    artifacts = RunArtifacts(
        mode=mode,
        months_run=months_run,
        seed=seed,
        store=store,
        refusals=dict(world.refusals),
        first_tx=first_tx,
        state_wishes_done_month=world.state_wishes_done_month,
        command_sequence=list(store.command_sequence),
        violations=list(world.violations),
        world=world,
    )
    if world.command_log is not None:
        _check_schedulable(world)
    return artifacts


def _goals_complete(world: World) -> bool:
    if world.state.wishes and world.state_wishes_done_month is None:
        return False
    if world.mode == SINGLE_ROBOT_MODE and world.individuals:
        home = world.individuals[0].home
        for good, qty, _ in world.wishes_individual:
            if home.get(good, 0) < qty:
                return False
    return True


def _check_schedulable(world: World):
    if not world.individuals:
        return
    home = world.individuals[0].home
    missing = [
        world.good_names[good]
        for good, qty, _ in world.wishes_individual
        if home.get(good, 0) < qty
    ]
    if missing:
        raise Unschedulable(
            "goals not reachable within the horizon, missing: " + ", ".join(missing)
        )
