"""Agent state and monthly procedures: individuals, producers, banks, state.

Agents are plain slotted classes keyed by integer good ids for speed; all
display naming happens at the logging boundary.  The monthly procedures
follow a fixed order per agent: an individual feeds, decays worn goods,
samples interaction partners, shops, prunes and founds businesses, then
runs its producer; a producer polls demand, shops for inputs and labor,
produces, sells, services its loans, hands surplus to its owner, and pays
annual tax in month 11 of each year.

Money is integer m.u. and physically conserved: every unit is either an
agent's pocket cash or sits in a bank vault (the central bank's vault
holds the unissued remainder of the monetary base).  Deposits and loans
are ledger numbers on top; credit creation is capped for commercial banks
by the reserve ratio and uncapped for the central bank.
"""

from __future__ import annotations

from .market import (
    BANK_TRANSFER,
    CASH,
    INSUFFICIENT_FUNDS,
    OUT_OF_STOCK,
    PRICE_TOO_HIGH,
    Refusal,
    Trade,
    adapt_prices,
    attempt_trade,
    div_round,
    production_price,
)

LATENT = 0
ACTIVE = 1
DISMANTLING = 2

INDIV = "indiv"
PRODUCER = "producer"
STATE = "state"


class InvariantViolation(Exception):
    pass


# --- compiled recipe forms (integer arithmetic in the hot loop) ---

class CompiledProduct:
    __slots__ = (
        "good", "lifetime", "duration", "consumed", "non_consumed",
        "worker_num", "worker_den",
    )

    def __init__(self, good, lifetime, duration, consumed, non_consumed,
                 worker_num, worker_den):
        self.good = good
        self.lifetime = lifetime  # 0 = never wears out
        self.duration = duration  # 0 = same-month delivery
        self.consumed = consumed  # [(good, num, den)]
        # [(good, num, den, waiver_num, waiver_den)]; the waiver is the
        # immobilized-minimums threshold (0/1 when absent: never waived)
        self.non_consumed = non_consumed
        self.worker_num = worker_num  # 0 when the recipe needs no labor
        self.worker_den = worker_den


class CompiledProducerSpec:
    __slots__ = ("index", "name", "products", "required_inputs")

    def __init__(self, index, name, products, required_inputs):
        self.index = index
        self.name = name
        self.products = products
        # goods that must already circulate before the business idea makes
        # sense: consumed inputs plus non-waivable capital goods
        self.required_inputs = required_inputs


def ceil_mul(qty: int, num: int, den: int) -> int:
    """ceil(qty * num / den) for non-negative qty."""
    return -((-qty * num) // den)


# --- agents ---

class Individual:
    __slots__ = (
        "uid", "name", "kind", "cash", "bank", "deposit", "loan", "home",
        "on_sale", "beliefs", "demand", "expiries", "producer", "employed",
        "salary_tried", "benefit_this_month", "annual_income", "unmet_food",
        "attempted", "pool_idx",
    )

    def __init__(self, idx: int, salary_ask: int, workers_good: int):
        self.uid = idx
        self.name = f"Indiv_{idx}"
        self.kind = INDIV
        self.cash = 0
        self.bank = None
        self.deposit = 0
        self.loan = 0
        self.home: dict[int, int] = {}
        self.on_sale: dict[int, int] = {}
        self.beliefs: dict[int, int] = {workers_good: salary_ask}
        self.demand: dict[int, int] = {}
        self.expiries: dict[int, list] = {}
        self.producer = None
        self.employed = False
        self.salary_tried = False
        self.benefit_this_month = 0
        self.annual_income = 0
        self.unmet_food = 0
        self.attempted: set[int] = set()
        self.pool_idx = -1

    def funds(self) -> int:
        return self.cash + self.deposit


class Producer:
    __slots__ = (
        "uid", "name", "kind", "spec", "owner", "state", "cash", "bank",
        "deposit", "loan", "held", "on_sale", "asks", "floors", "beliefs",
        "demand", "demand_seen", "sales_hist", "ever_sold", "months_inactive",
        "workers_held", "salaries_month", "input_spend_month", "revenue_month",
        "revenue_ema", "cost_num", "cost_den", "batches", "tax_base",
        "attempted", "pool_idx", "created_month",
    )

    def __init__(self, pid: int, spec: CompiledProducerSpec, owner: Individual,
                 month: int):
        self.uid = pid
        self.name = f"{spec.name}_{pid}"
        self.kind = PRODUCER
        self.spec = spec
        self.owner = owner
        self.state = LATENT
        self.cash = 0
        self.bank = None
        self.deposit = 0
        self.loan = 0
        self.held: dict[int, int] = {}
        self.on_sale: dict[int, int] = {}
        self.asks: dict[int, int] = {}
        self.floors: dict[int, int] = {}
        self.beliefs: dict[int, int] = {}
        self.demand: dict[int, int] = {}
        self.demand_seen: dict[int, int] = {}
        # per product good: month -> units sold that month
        self.sales_hist: dict[int, dict[int, int]] = {
            p.good: {} for p in spec.products
        }
        self.ever_sold: dict[int, bool] = {p.good: False for p in spec.products}
        self.months_inactive = 0
        self.workers_held = 0
        self.salaries_month = 0
        self.input_spend_month = 0
        self.revenue_month = 0
        self.revenue_ema = 0
        self.cost_num: dict[int, int] = {}
        self.cost_den: dict[int, int] = {}
        self.batches: dict[int, tuple[int, int, int]] = {}  # good -> (due, qty, cost)
        self.tax_base = 0
        self.attempted: set[int] = set()
        self.pool_idx = -1
        self.created_month = month

    def funds(self) -> int:
        return self.cash + self.deposit


class StateAgent:
    __slots__ = (
        "uid", "name", "kind", "cash", "bank", "deposit", "loan", "beliefs",
        "demand", "on_sale", "holdings", "wishes", "tax_info", "vat_info",
        "acc_unempl", "purchases_info", "endowment", "attempted", "pool_idx",
    )

    def __init__(self, endowment: int):
        self.uid = -1
        self.name = "TheState"
        self.kind = STATE
        self.cash = 0
        self.bank = None
        self.deposit = 0
        self.loan = 0
        self.beliefs: dict[int, int] = {}
        self.demand: dict[int, int] = {}
        self.on_sale: dict[int, int] = {}
        self.holdings: dict[int, int] = {}
        self.wishes: list[list] = []  # [good, qty, delivered]
        self.tax_info = 0
        self.vat_info = 0
        self.acc_unempl = 0
        self.purchases_info = 0
        self.endowment = endowment
        self.attempted: set[int] = set()
        self.pool_idx = -1

    def funds(self) -> int:
        return self.cash + self.deposit


class Bank:
    __slots__ = (
        "bid", "name", "kind", "owner", "vault", "total_deposits",
        "total_loans", "cb_loan", "liability_rate", "asset_rate",
        "interest_earned",
    )

    def __init__(self, bid, name, owner, vault, liability_rate, asset_rate):
        self.bid = bid
        self.name = name
        self.kind = "bank"
        self.owner = owner
        self.vault = vault
        self.total_deposits = 0
        self.total_loans = 0
        self.cb_loan = 0  # negative = deposit parked at the central bank
        self.liability_rate = liability_rate
        self.asset_rate = asset_rate
        self.interest_earned = 0

    def equity(self) -> int:
        return self.vault + self.total_loans - self.total_deposits - self.cb_loan


class CentralBank(Bank):
    __slots__ = ("monetary_base",)

    def __init__(self, monetary_base, liability_rate, asset_rate):
        super().__init__(0, "CentralBank", None, monetary_base, liability_rate,
                         asset_rate)
        self.kind = "cb"
        self.monetary_base = monetary_base


# --- money plumbing ---

def open_account(world, agent):
    """Choose a bank for an agent: commercial if any exist, else the CB."""
    if agent.bank is not None:
        return agent.bank
    if world.banks:
        bank = world.banks[world.rng_banks.randrange(len(world.banks))]
    else:
        bank = world.cb
    agent.bank = bank
    return bank


def _bank_ensure_liquidity(world, bank, amount) -> bool:
    """Top up a bank's vault from the CB so it can pay out `amount`."""
    if bank.vault >= amount or bank is world.cb:
        return bank.vault >= amount
    shortfall = amount - bank.vault
    cb = world.cb
    if cb.vault < shortfall:
        return False
    cb.vault -= shortfall
    bank.vault += shortfall
    bank.cb_loan += shortfall
    return True


def deposit_cash(world, agent, amount):
    if amount <= 0:
        return
    bank = open_account(world, agent)
    agent.cash -= amount
    agent.deposit += amount
    bank.vault += amount
    bank.total_deposits += amount


def pay(world, payer, payee, amount) -> str | None:
    """Move money; returns the channel used or None if not payable.

    Pocket cash is spent first; any remainder is drawn from the payer's
    account.  Account-funded payments credit the payee's account when it
    has one (cross-bank payments settle in vault cash), otherwise the
    payer's bank pays out cash."""
    if amount <= 0:
        return CASH
    if payer.cash >= amount:
        payer.cash -= amount
        payee.cash += amount
        return CASH
    bank = payer.bank
    from_deposit = amount - payer.cash
    if bank is None or payer.deposit < from_deposit:
        return None
    payee_bank = payee.bank
    if payee_bank is bank:
        # pocket cash joins the payer's account, then a book transfer
        if payer.cash:
            bank.vault += payer.cash
            bank.total_deposits += payer.cash
            payer.deposit += payer.cash
            payer.cash = 0
        payer.deposit -= amount
        payee.deposit += amount
        return BANK_TRANSFER
    if not _bank_ensure_liquidity(world, bank, from_deposit):
        return None
    payer.deposit -= from_deposit
    bank.total_deposits -= from_deposit
    bank.vault -= from_deposit
    cash_part = payer.cash
    payer.cash = 0
    total = cash_part + from_deposit
    if payee_bank is not None:
        payee.deposit += total
        payee_bank.vault += total
        payee_bank.total_deposits += total
    else:
        payee.cash += total
    return BANK_TRANSFER


def bank_grant_loan(world, borrower, amount) -> bool:
    """Credit a loan as a deposit.

    Every lender applies a debt-service limit (startup allowance, trailing
    revenue, and the owner's own wealth as collateral); without it, zombie
    borrowers roll debt forever and credit expands without bound.  The CB
    lends freely within that limit; a commercial bank additionally needs
    post-loan reserves at or above the reserve ratio."""
    if amount <= 0:
        return False
    if borrower.kind == PRODUCER:
        cap = 24 * world.reference_salary() + 6 * borrower.revenue_ema \
            + borrower.owner.funds()
        if borrower.loan + amount > cap:
            return False
    bank = open_account(world, borrower)
    if bank is not world.cb:
        ratio = world.cv.reserve_ratio_per100
        if bank.vault * 100 < ratio * (bank.total_deposits + amount):
            return False
    borrower.loan += amount
    borrower.deposit += amount
    bank.total_loans += amount
    bank.total_deposits += amount
    return True


def repay_loan(world, agent, amount):
    """Pay down principal from deposit first, then pocket cash."""
    bank = agent.bank
    if bank is None:
        return
    amount = min(amount, agent.loan, agent.deposit + agent.cash)
    if amount <= 0:
        return
    from_deposit = min(agent.deposit, amount)
    agent.deposit -= from_deposit
    bank.total_deposits -= from_deposit
    rest = amount - from_deposit
    if rest:
        agent.cash -= rest
        bank.vault += rest
    agent.loan -= amount
    bank.total_loans -= amount


def found_bank(world, individual) -> Bank | None:
    """A CB depositor at or above the capital threshold opens a bank; the
    founding balance becomes the new bank's vault (capital as equity, the
    rest as the founder's first deposit)."""
    cv = world.cv
    if individual.bank is not world.cb or individual.deposit < cv.banks_init_capital:
        return None
    if cv.max_n_banks is not None and len(world.banks) >= cv.max_n_banks:
        return None
    cb = world.cb
    move = individual.deposit
    if cb.vault < move:
        return None
    bid = len(world.banks) + 1
    bank = Bank(
        bid,
        f"Bank_{bid}",
        individual,
        0,
        cv.liability_rate_per1000 * cv.banks_rate_factor,
        cv.asset_rate_per1000 * cv.banks_rate_factor,
    )
    capital = cv.banks_init_capital
    rest = move - capital
    cb.vault -= move
    cb.total_deposits -= move
    bank.vault += move
    individual.deposit = rest
    if rest:
        bank.total_deposits += rest
    individual.bank = bank
    world.banks.append(bank)
    world.track_event(individual, f"founds:{bank.name}")
    return bank


def migrate_deposits(world, agent) -> None:
    """Once commercial banks exist, loan-free CB depositors move over."""
    if agent.bank is not world.cb or agent.loan or not agent.deposit:
        return
    if not world.banks:
        return
    bank = world.banks[world.rng_banks.randrange(len(world.banks))]
    move = agent.deposit
    if not _bank_ensure_liquidity(world, world.cb, move):
        return
    cb = world.cb
    cb.vault -= move
    cb.total_deposits -= move
    bank.vault += move
    bank.total_deposits += move
    agent.bank = bank


# --- the trade path ---

def execute_trade(world, buyer, seller, good):
    """One bilateral attempt for `good`; respects the once-per-pairing-
    per-month rule and runs the full protocol: match, funds (with a
    producer's loan fallback), payment, VAT, recording, price adaptation.

    The match and adaptation arithmetic is the market module's rule set
    inlined for speed; test_agents pins the equivalence."""
    demand = buyer.demand.get(good, 0)
    if demand <= 0:
        return
    key = seller.uid * world.good_key + good
    attempted = buyer.attempted
    if key in attempted:
        return
    attempted.add(key)
    if seller.kind == PRODUCER:
        seen = seller.demand_seen
        seen[good] = seen.get(good, 0) + demand
    supply = seller.on_sale.get(good, 0)
    if not world.monetary:
        if supply <= 0:
            world.refusals[OUT_OF_STOCK] += 1
            return
        qty = demand if demand < supply else supply
        _settle_goods(world, buyer, seller, good, qty, 0, CASH)
        return
    if supply <= 0:
        world.refusals[OUT_OF_STOCK] += 1
        return
    if seller.kind == PRODUCER:
        ask = seller.asks.get(good, 0)
        if ask < 1:
            return
    else:
        ask = seller.beliefs.get(good)
        if ask is None:
            ask = world.last_mean.get(good, 1)
            seller.beliefs[good] = ask
    beliefs = buyer.beliefs
    pb = beliefs.get(good)
    if pb is None:
        pb = ask  # first encounter with this good: adopt the seller's price
        beliefs[good] = ask
    success = False
    if pb >= ask:
        funds = buyer.cash + buyer.deposit
        qty = demand if demand < supply else supply
        afford = funds // ask
        if afford < qty and buyer.kind == PRODUCER:
            if bank_grant_loan(world, buyer, ask * qty - funds):
                afford = (buyer.cash + buyer.deposit) // ask
        if afford < qty:
            qty = afford
        if qty > 0:
            total = qty * ask
            channel = pay(world, buyer, seller, total)
            if channel is None:  # cross-bank settlement impossible right now
                world.refusals[INSUFFICIENT_FUNDS] += 1
                return
            success = True
            _settle_goods(world, buyer, seller, good, qty, ask, channel)
            if world.vat_per100 and buyer.kind != PRODUCER:
                vat = div_round(total * world.vat_per100, 100)
                if vat > 0 and pay(world, seller, world.state, vat) is not None:
                    world.state.vat_info += vat
                    if seller.kind == PRODUCER:
                        seller.tax_base -= vat
                    world.log_transfer(seller, world.state, "VAT", vat)
        else:
            world.refusals[INSUFFICIENT_FUNDS] += 1
    else:
        world.refusals[PRICE_TOO_HIGH] += 1
    factor = world.adapt_factor
    if world.fixed_prices or factor == 100:
        return
    if success:
        # buyer down, seller up (minimum movement of 1, floor of 1)
        new_pb = (200 * pb + factor) // (2 * factor)
        if new_pb == pb and pb > 1:
            new_pb = pb - 1
        beliefs[good] = new_pb if new_pb > 0 else 1
        new_ask = (2 * ask * factor + 100) // 200
        if new_ask == ask:
            new_ask = ask + 1
    else:
        new_pb = (2 * pb * factor + 100) // 200
        beliefs[good] = new_pb + 1 if new_pb == pb else new_pb
        new_ask = (200 * ask + factor) // (2 * factor)
        if new_ask == ask and ask > 1:
            new_ask = ask - 1
        if new_ask < 1:
            new_ask = 1
    _set_ask(seller, good, new_ask)


def _set_ask(seller, good, new_ask):
    if seller.kind == PRODUCER:
        floor = seller.floors.get(good, 1)
        if seller.state != DISMANTLING and new_ask < floor:
            new_ask = floor
        seller.asks[good] = new_ask
    else:
        seller.beliefs[good] = new_ask


def _settle_goods(world, buyer, seller, good, qty, price, channel):
    """Move goods, book revenue/demand/holdings, and record the trade."""
    remaining = seller.on_sale[good] - qty
    if remaining:
        seller.on_sale[good] = remaining
    else:
        del seller.on_sale[good]
    total = qty * price
    if seller.kind == PRODUCER:
        seller.tax_base += total
        seller.revenue_month += total
        hist = seller.sales_hist.get(good)
        if hist is not None:
            month = world.month
            hist[month] = hist.get(month, 0) + qty
            seller.ever_sold[good] = True
    left = buyer.demand[good] - qty
    if left > 0:
        buyer.demand[good] = left
    else:
        del buyer.demand[good]
    kind = buyer.kind
    if kind == INDIV:
        buyer.home[good] = buyer.home.get(good, 0) + qty
        lifetime = world.lifetime[good]
        if lifetime:
            due = world.month + world.draw_lifetime(lifetime)
            buyer.expiries.setdefault(due, []).append((good, qty))
    elif kind == PRODUCER:
        buyer.held[good] = buyer.held.get(good, 0) + qty
        buyer.cost_num[good] = buyer.cost_num.get(good, 0) + total
        buyer.cost_den[good] = buyer.cost_den.get(good, 0) + qty
        buyer.input_spend_month += total
        buyer.tax_base -= total
    else:  # state
        buyer.holdings[good] = buyer.holdings.get(good, 0) + qty
        buyer.purchases_info += total
        for wish in buyer.wishes:
            if wish[0] == good:
                wish[2] += qty
                break
    world.record_trade(buyer, seller, good, qty, price, channel)


# --- individual monthly steps ---

def monthly_feed(world, ind):
    for good, qty, recurring in world.wishes_individual:
        if not recurring:
            continue
        have = ind.home.get(good, 0)
        if have >= qty:
            left = have - qty
            if left:
                ind.home[good] = left
            else:
                del ind.home[good]
        else:
            if have:
                del ind.home[good]
            ind.unmet_food += 1


def products_decay(world, ind):
    lots = ind.expiries.pop(world.month, None)
    if not lots:
        return
    home = ind.home
    for good, qty in lots:
        have = home.get(good, 0)
        keep = have - qty
        if keep > 0:
            home[good] = keep
        elif have:
            del home[good]


def make_goods_to_buy(world, ind) -> list[int]:
    """Ordered demand list: consumables first, then durables cheapest-first
    by current belief (goods of unknown price last).  Refreshes ind.demand."""
    wanted: list[int] = []
    durables: list[tuple[int, int]] = []
    demand: dict[int, int] = {}
    home = ind.home
    beliefs = ind.beliefs
    for good, qty, recurring in world.wishes_individual:
        need = qty - home.get(good, 0)
        if need <= 0:
            continue
        demand[good] = need
        if recurring:
            wanted.append(good)
        else:
            durables.append((beliefs.get(good, 1 << 60), good))
    durables.sort()
    wanted.extend(g for _, g in durables)
    ind.demand = demand
    return wanted


def buy_goods(world, buyer, neighbors, wanted):
    """Scan the month's partners once for candidate sellers of the wanted
    goods, then attempt purchases in priority order."""
    demand = buyer.demand
    if not demand:
        return
    candidates: dict[int, list] = {}
    for nb in neighbors:
        sale = nb.on_sale
        if sale:
            for good in sale:
                if good in demand:
                    lst = candidates.get(good)
                    if lst is None:
                        candidates[good] = [nb]
                    else:
                        lst.append(nb)
    if not candidates:
        return
    for good in wanted:
        sellers = candidates.get(good)
        if not sellers:
            continue
        for seller in sellers:
            if buyer.demand.get(good, 0) <= 0:
                break
            execute_trade(world, buyer, seller, good)


def try_startup_new_producer(world, ind):
    """Random business idea; kept only if every required input is already
    on the market (or primary).  The new producer waits latent for demand."""
    if ind.producer is not None or not world.producer_specs:
        return None
    if world.rng_suggestions.randrange(1000) >= world.cv.suggest_prob_per1000:
        return None
    spec = world.producer_specs[
        world.rng_suggestions.randrange(len(world.producer_specs))
    ]
    ever = world.ever_traded
    primary = world.primary_goods
    for good in spec.required_inputs:
        if not ever[good] and good not in primary:
            return None
    producer = Producer(world.next_pid(), spec, ind, world.month)
    ind.producer = producer
    world.all_producers.append(producer)
    return producer


def closedown_inactive_producers(world, ind):
    p = ind.producer
    if p is not None and p.months_inactive >= world.cv.max_unused_timesteps:
        dismantle_producer(world, p)


def dismantle_producer(world, p):
    """Shut a producer down: goods and money go to the owner (goods become
    the owner's sale stock, free of any cost floor), debt follows too."""
    owner = p.owner
    for src in (p.held, p.on_sale):
        for good, qty in src.items():
            owner.on_sale[good] = owner.on_sale.get(good, 0) + qty
            if good not in owner.beliefs:
                price = (
                    p.asks.get(good)
                    or p.beliefs.get(good)
                    or world.last_mean.get(good, 1)
                )
                owner.beliefs[good] = price
        src.clear()
    owner.cash += p.cash
    p.cash = 0
    bank = p.bank
    if bank is not None and (p.deposit or p.loan):
        # net the account, write off any unpaid remainder (the bank absorbs
        # the loss), and hand the deposit remainder to the owner
        offset = min(p.deposit, p.loan)
        if offset:
            p.deposit -= offset
            p.loan -= offset
            bank.total_deposits -= offset
            bank.total_loans -= offset
        if p.loan:
            bank.total_loans -= p.loan
            p.loan = 0
        if p.deposit:
            if owner.bank is None:
                owner.bank = bank
            if owner.bank is bank:
                owner.deposit += p.deposit
            elif _bank_ensure_liquidity(world, bank, p.deposit):
                bank.vault -= p.deposit
                bank.total_deposits -= p.deposit
                owner.deposit += p.deposit
                owner.bank.vault += p.deposit
                owner.bank.total_deposits += p.deposit
            else:
                bank.total_deposits -= p.deposit  # stranded claim, CB is dry
            p.deposit = 0
    if p.state == ACTIVE:
        world.pool_remove(p)
    p.state = DISMANTLING
    p.demand = {}
    owner.producer = None
    world.track_event(owner, f"closedown:{p.spec.name}")


def individual_money_sweep(world, ind):
    """End-of-activity hygiene: keep a cash buffer of about two months of
    believed consumption, bank the rest, service inherited debt."""
    keep = world.cash_buffer(ind)
    if ind.loan and ind.funds() > keep:
        repay_loan(world, ind, ind.funds() - keep)
    excess = ind.cash - keep
    if excess > 0:
        if world.banks and ind.bank is world.cb and not ind.loan:
            migrate_deposits(world, ind)
        deposit_cash(world, ind, excess)


def individual_monthly_activity(world, ind):
    monthly_feed(world, ind)
    products_decay(world, ind)
    neighbors = world.sample_neighbors(ind)
    wanted = make_goods_to_buy(world, ind)
    buy_goods(world, ind, neighbors, wanted)
    closedown_inactive_producers(world, ind)
    try_startup_new_producer(world, ind)
    p = ind.producer
    if p is not None:
        producer_monthly_activity(world, p)
    if world.monetary:
        individual_money_sweep(world, ind)


# --- producer monthly steps ---

def _poll_demand(world, p, neighbors):
    """Demand estimate per product: the larger of polled demand (neighbors
    plus the state's standing procurement list) and inquiries accumulated
    since the last activity."""
    seen = p.demand_seen
    state_demand = world.state.demand
    est = {}
    for product in p.spec.products:
        good = product.good
        polled = state_demand.get(good, 0)
        for nb in neighbors:
            polled += nb.demand.get(good, 0)
        inquired = seen.get(good, 0)
        est[good] = polled if polled > inquired else inquired
    seen.clear()
    return est


def _production_target(world, p, good, demand):
    """Respond to demand but never outrun recent sales by more than 1.5x."""
    if demand <= 0:
        return 0
    if not p.ever_sold[good]:
        return demand
    hist = p.sales_hist[good]
    month = world.month
    recent = hist.get(month - 1, 0) + hist.get(month - 2, 0) + hist.get(month - 3, 0)
    cap = max(1, ceil_mul(recent, 1, 2))  # 1.5 * mean of 3 = recent / 2
    if len(hist) > 8:
        for m in [m for m in hist if m < month - 4]:
            del hist[m]
    return min(demand, cap)


def _input_needs(world, p, targets):
    """Aggregate purchase list for the month's targets: gross requirements
    across products minus held stock.  Returns (needs, workers needed)."""
    gross: dict[int, int] = {}
    workers = 0
    for product in p.spec.products:
        t = targets.get(product.good, 0)
        if t <= 0 or product.good in p.batches:
            continue
        for good, num, den in product.consumed:
            gross[good] = gross.get(good, 0) + ceil_mul(t, num, den)
        for good, num, den, wnum, wden in product.non_consumed:
            if t * num * wden <= wnum * den:
                continue  # below the immobilized minimum: waived
            gross[good] = gross.get(good, 0) + ceil_mul(t, num, den)
        if product.worker_num:
            workers += ceil_mul(t, product.worker_num, product.worker_den)
    held = p.held
    needs = {}
    for good, req in gross.items():
        lack = req - held.get(good, 0)
        if lack > 0:
            needs[good] = lack
    return needs, workers


def _workers_for_feasible(world, p, targets):
    """Labor worth hiring after the shopping round: enough for the output
    the held materials actually support, not the aspirational target."""
    held = p.held
    pool_used: dict[int, int] = {}
    workers = 0
    for product in p.spec.products:
        t = targets.get(product.good, 0)
        if t <= 0 or product.good in p.batches:
            continue
        u = t
        for good, num, den, wnum, wden in product.non_consumed:
            have = held.get(good, 0) - pool_used.get(good, 0)
            cap = max(have * wden, wnum)
            u = min(u, cap * den // (num * wden))
        for good, num, den in product.consumed:
            u = min(u, held.get(good, 0) * den // num)
        if u <= 0:
            continue
        for good, num, den, wnum, wden in product.non_consumed:
            pool_used[good] = pool_used.get(good, 0) + ceil_mul(u, num, den)
        if product.worker_num:
            workers += ceil_mul(u, product.worker_num, product.worker_den)
    return workers


def _take_from_owner(world, p, needs):
    """Re-use the owner's salvaged goods before going to the market."""
    owner_stock = p.owner.on_sale
    if not owner_stock:
        return
    for good in list(needs):
        have = owner_stock.get(good, 0)
        if not have:
            continue
        take = min(have, needs[good])
        left = have - take
        if left:
            owner_stock[good] = left
        else:
            del owner_stock[good]
        p.held[good] = p.held.get(good, 0) + take
        if take == needs[good]:
            del needs[good]
        else:
            needs[good] -= take


def hire_workers(world, p, neighbors, count):
    """Hire up to `count` person-months from unemployed individual
    neighbors at their salary ask (moneyless modes just allocate).

    Each person enters at most one salary negotiation per month, and the
    employer's wage belief adapts once per hiring round, on whether the
    round filled its plan.  Per-hire adaptation would compound across a
    bulk hire (or across many employers hammering one jobless worker) and
    ratchet the whole wage distribution to the floor."""
    w = world.workers_good
    monetary = world.monetary
    if not monetary:
        for nb in neighbors:
            if count <= 0:
                break
            if nb.kind != INDIV or nb.employed or nb.salary_tried:
                continue
            nb.salary_tried = True
            nb.employed = True
            p.workers_held += 1
            count -= 1
            world.record_trade(p, nb, w, 1, 0, CASH)
        return
    candidates = sorted(
        (nb.beliefs[w], nb.uid, nb)
        for nb in neighbors
        if nb.kind == INDIV and not nb.employed and not nb.salary_tried
    )
    attempted_any = False
    pb = None
    top_paid = 0
    for ask, _, nb in candidates:
        if count <= 0:
            break
        if nb.employed or nb.salary_tried:
            continue
        nb.salary_tried = True
        attempted_any = True
        if pb is None:
            pb = p.beliefs.get(w)
            if pb is None:
                pb = ask  # first hire ever: adopt the asked salary
                p.beliefs[w] = pb
        outcome = attempt_trade(pb, ask, 1, 1, p.funds())
        if isinstance(outcome, Refusal) and outcome.reason == INSUFFICIENT_FUNDS:
            if bank_grant_loan(world, p, ask - p.funds()):
                outcome = attempt_trade(pb, ask, 1, 1, p.funds())
        if isinstance(outcome, Trade):
            channel = pay(world, p, nb, ask)
            if channel is None:
                world.refusals[INSUFFICIENT_FUNDS] += 1
                continue
            nb.employed = True
            nb.annual_income += ask
            p.workers_held += 1
            p.salaries_month += ask
            p.tax_base -= ask
            count -= 1
            if ask > top_paid:
                top_paid = ask
            world.record_trade(p, nb, w, 1, ask, channel)
            if not world.fixed_prices:
                nb.beliefs[w] = adapt_prices(True, pb, ask, world.adapt_factor)[1]
        else:
            world.refusals[outcome.reason] += 1
            if not world.fixed_prices:
                down = adapt_prices(False, pb, ask, world.adapt_factor)[1]
                floor = world.reservation_wage(nb)
                nb.beliefs[w] = down if down > floor else floor
    if monetary and attempted_any and not world.fixed_prices and pb is not None:
        if count <= 0:
            # plan filled: try cheaper next round, but a rational employer
            # never believes labor costs less than it demonstrably just paid
            down = adapt_prices(True, pb, pb, world.adapt_factor)[0]
            p.beliefs[w] = down if down > top_paid else top_paid
        else:
            p.beliefs[w] = adapt_prices(False, pb, pb, world.adapt_factor)[0]


def _unit_cost(p, good) -> int:
    den = p.cost_den.get(good, 0)
    if not den:
        return 0
    return div_round(p.cost_num[good], den)


def run_producer(world, p, targets) -> dict[int, int]:
    """Produce what held inputs allow, capped by the month's targets.

    Non-consumed goods are shared monthly capacity pools (with the
    immobilized-minimums waiver); consumed goods are drawn down; labor is
    the month's hired pool.  Fixed-duration products consume inputs now and
    deliver after `duration` months, locked meanwhile.  Returns units
    delivered per good this month."""
    made: dict[int, int] = {}
    month = world.month
    held = p.held
    for good in list(p.batches):
        due, qty, cost = p.batches[good]
        if due <= month:
            del p.batches[good]
            p.on_sale[good] = p.on_sale.get(good, 0) + qty
            made[good] = made.get(good, 0) + qty
            if world.monetary:
                _reprice(world, p, good, cost, 0, qty)
    workers_left = p.workers_held
    pool_used: dict[int, int] = {}
    total_salaries = p.salaries_month
    total_worker_used = 0
    plans: list[tuple[CompiledProduct, int, int, int]] = []
    for product in p.spec.products:
        if targets.get(product.good, 0) <= 0 or product.good in p.batches:
            continue
        # produce at the capacity of what is on hand: hired person-months
        # are indivisible, so spreading them over a full batch is what
        # keeps unit costs sane (shopping and hiring were demand-sized)
        u = 1 << 62
        if product.worker_num:
            u = workers_left * product.worker_den // product.worker_num
        for good, num, den, wnum, wden in product.non_consumed:
            have = held.get(good, 0) - pool_used.get(good, 0)
            cap = max(have * wden, wnum)  # the waiver floor
            u = min(u, cap * den // (num * wden))
        for good, num, den in product.consumed:
            u = min(u, held.get(good, 0) * den // num)
        if u <= 0 or u >= 1 << 62:
            continue
        used_w = 0
        if product.worker_num:
            used_w = ceil_mul(u, product.worker_num, product.worker_den)
            workers_left -= used_w
            total_worker_used += used_w
        for good, num, den, wnum, wden in product.non_consumed:
            pool_used[good] = pool_used.get(good, 0) + ceil_mul(u, num, den)
        input_cost = 0
        for good, num, den in product.consumed:
            used = ceil_mul(u, num, den)
            left = held.get(good, 0) - used
            if left > 0:
                held[good] = left
            else:
                held.pop(good, None)
            input_cost += used * _unit_cost(p, good)
        plans.append((product, u, input_cost, used_w))
    for product, u, input_cost, used_w in plans:
        if total_worker_used and used_w:
            salary_share = div_round(total_salaries * used_w, total_worker_used)
        elif not total_worker_used:
            salary_share = div_round(total_salaries, len(plans))
        else:
            salary_share = 0
        if product.duration:
            p.batches[product.good] = (
                month + product.duration, u, input_cost + salary_share,
            )
        else:
            p.on_sale[product.good] = p.on_sale.get(product.good, 0) + u
            made[product.good] = made.get(product.good, 0) + u
            if world.monetary:
                _reprice(world, p, product.good, input_cost, salary_share, u)
    return made


def _reprice(world, p, good, input_cost, salaries, units):
    ask = production_price(input_cost, salaries, units, world.benefit_per100)
    floor = production_price(input_cost, salaries, units, 100)
    if world.fixed_prices:
        p.asks.setdefault(good, ask)
        p.floors.setdefault(good, floor)
    else:
        p.asks[good] = ask
        p.floors[good] = floor


def sell_to_neighbors(world, p, neighbors):
    stock = p.on_sale
    if not stock:
        return
    for nb in neighbors:
        if not stock:
            break
        nd = nb.demand
        if not nd:
            continue
        for good in list(stock):
            if nd.get(good, 0) > 0:
                execute_trade(world, nb, p, good)


def return_loans(world, p):
    if not p.loan:
        return
    buffer = 2 * (p.input_spend_month + p.salaries_month)
    available = p.funds() - buffer
    if available > 0:
        repay_loan(world, p, available)


def transfer_benefit(world, p):
    if p.loan:
        return
    buffer = 2 * (p.input_spend_month + p.salaries_month)
    excess = p.funds() - buffer
    if excess > 0 and pay(world, p, p.owner, excess) is not None:
        p.owner.benefit_this_month += excess
        p.owner.annual_income += excess
        world.log_transfer(p, p.owner, "benefit", excess)


def pay_annual_tax(world, p):
    base = p.tax_base
    p.tax_base = 0
    if base <= 0:
        return
    tax = min(div_round(base * world.cv.tax_per100, 100), p.funds())
    if tax > 0 and pay(world, p, world.state, tax) is not None:
        world.state.tax_info += tax
        world.log_transfer(p, world.state, "Tax", tax)


def producer_monthly_activity(world, p):
    if p.state == DISMANTLING:
        return
    neighbors = world.sample_neighbors(p)
    estimates = _poll_demand(world, p, neighbors)
    if p.state == LATENT:
        if not any(estimates.values()):
            p.months_inactive += 1
            return
        p.state = ACTIVE
        world.pool_add(p)
        world.track_event(p.owner, f"startup:{p.spec.name}")
    targets = {
        good: _production_target(world, p, good, est)
        for good, est in estimates.items()
    }
    needs, _ = _input_needs(world, p, targets)
    _take_from_owner(world, p, needs)
    p.demand = needs
    if needs:
        buy_goods(world, p, neighbors, list(needs))
    workers_needed = _workers_for_feasible(world, p, targets)
    if workers_needed > p.workers_held:
        hire_workers(world, p, neighbors, workers_needed - p.workers_held)
    made = run_producer(world, p, targets)
    if made and world.command_log is not None:
        for good, qty in made.items():
            world.command_log.append(
                (world.month, p.spec.name, world.good_names[good], qty)
            )
    sell_to_neighbors(world, p, neighbors)
    if world.monetary:
        return_loans(world, p)
        transfer_benefit(world, p)
        if world.month % 12 == 11:
            pay_annual_tax(world, p)
    if made or p.batches:
        p.months_inactive = 0
    else:
        p.months_inactive += 1
    # hired labor is a person-month, it does not carry over; the unmet part
    # of the input list stays visible to sellers until the next activity
    p.revenue_ema = (3 * p.revenue_ema + p.revenue_month) // 4
    p.revenue_month = 0
    p.workers_held = 0
    p.salaries_month = 0
    p.input_spend_month = 0
