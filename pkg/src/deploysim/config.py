"""Declarative input file: parsing, validation and serialization.

The input file describes an economy as data: a GOODS list, PRODUCERS with
their activity patterns (per-unit input coefficients, lifetimes, fixed
durations, immobilized minimums), CONTROL_VARIABLES, wish lists and, for
single-robot runs, an ARRIVALS schedule.  The grammar is brace-block based
and whitespace-insensitive; CONTROL_VARIABLES entries are value-first
("120 nYears").  Comments are `#` lines and `//` to end of line.

Quantities of goods and money are integers everywhere downstream, so
recipe coefficients are parsed as exact decimal fractions (Fraction with a
power-of-ten denominator), never binary floats.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from fractions import Fraction


class ParseError(Exception):
    """Raised on malformed input; carries 1-based line/column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int = 0
    col: int = 0

    def __str__(self):
        where = f" (line {self.line})" if self.line else ""
        return f"{self.severity}: {self.message}{where}"


@dataclass
class Good:
    index: int
    name: str


@dataclass
class ProductSpec:
    good: str
    lifetime_steps: int | None = None
    duration_steps: int | None = None
    consumed: dict[str, Fraction] = field(default_factory=dict)
    non_consumed: dict[str, Fraction] = field(default_factory=dict)


@dataclass
class ProducerSpec:
    name: str
    immobilized_minimums: dict[str, Fraction] = field(default_factory=dict)
    products: list[ProductSpec] = field(default_factory=list)


@dataclass
class WishEntry:
    good: str
    quantity: int
    recurring: bool = False


@dataclass
class Arrival:
    month: int
    good: str
    quantity: int


# DSL name -> (attribute, default).  MaxNBanks defaults to "unlimited"
# (None); booleans default off.
CONTROL_VARS: dict[str, tuple[str, int | None]] = {
    "nYears": ("n_years", 1),
    "nIndividuals": ("n_individuals", 1),
    "nMaxInteractingNeighbors": ("n_max_interacting_neighbors", 40),
    "PriceBenefitPer100": ("price_benefit_per100", 120),
    "PriceAdaptDefaultPer100": ("price_adapt_default_per100", 120),
    "MonetaryBasePerCapita": ("monetary_base_per_capita", 100000),
    "LiabilityRatePer1000": ("liability_rate_per1000", 1),
    "AssetRatePer1000": ("asset_rate_per1000", 3),
    "BanksInitCapital": ("banks_init_capital", 200000),
    "BanksRateFactor": ("banks_rate_factor", 2),
    "ReserveRatioPer100": ("reserve_ratio_per100", 1),
    "VATPer100": ("vat_per100", 15),
    "TaxPer100": ("tax_per100", 20),
    "PayUnemplPer100": ("pay_unempl_per100", 10),
    "MaxUnusedTimesteps": ("max_unused_timesteps", 18),
    "MaxNBanks": ("max_n_banks", None),
    "SuggestProbPer1000": ("suggest_prob_per1000", 83),
    "TaxLowMultPer100": ("tax_low_mult_per100", 50),
    "TaxMidMultPer100": ("tax_mid_mult_per100", 100),
    "TaxHighMultPer100": ("tax_high_mult_per100", 150),
    "bFixedPrices": ("b_fixed_prices", 0),
    "bRobotsColony": ("b_robots_colony", 0),
    "bSingleRobot": ("b_single_robot", 0),
    "bGdpTotalSales": ("b_gdp_total_sales", 0),
    "rngSeed": ("rng_seed", 0),
}

_ATTR_TO_DSL = {attr: dsl for dsl, (attr, _) in CONTROL_VARS.items()}


@dataclass
class ControlVars:
    n_years: int = 1
    n_individuals: int = 1
    n_max_interacting_neighbors: int = 40
    price_benefit_per100: int = 120
    price_adapt_default_per100: int = 120
    monetary_base_per_capita: int = 100000
    liability_rate_per1000: int = 1
    asset_rate_per1000: int = 3
    banks_init_capital: int = 200000
    banks_rate_factor: int = 2
    reserve_ratio_per100: int = 1
    vat_per100: int = 15
    tax_per100: int = 20
    pay_unempl_per100: int = 10
    max_unused_timesteps: int = 18
    max_n_banks: int | None = None
    suggest_prob_per1000: int = 83
    tax_low_mult_per100: int = 50
    tax_mid_mult_per100: int = 100
    tax_high_mult_per100: int = 150
    b_fixed_prices: int = 0
    b_robots_colony: int = 0
    b_single_robot: int = 0
    b_gdp_total_sales: int = 0
    rng_seed: int = 0


@dataclass
class ConfigModel:
    goods: list[Good] = field(default_factory=list)
    primary_resources: list[str] = field(default_factory=list)
    producers: list[ProducerSpec] = field(default_factory=list)
    control: ControlVars = field(default_factory=ControlVars)
    wishes_individual: list[WishEntry] = field(default_factory=list)
    wishes_state: list[WishEntry] = field(default_factory=list)
    arrivals: list[Arrival] = field(default_factory=list)
    parse_warnings: list[Diagnostic] = field(default_factory=list, compare=False)

    def good_names(self) -> list[str]:
        return [g.name for g in self.goods]

    def good_index(self, name: str) -> int:
        for g in self.goods:
            if g.name == name:
                return g.index
        raise KeyError(name)


# --- Tokenizer ---

_TOKEN_RE = re.compile(r"-?\d+(?:\.\d+)?|[A-Za-z_][A-Za-z0-9_]*|[{}=]|\S")

NAME, NUMBER, LBRACE, RBRACE, EQUALS, EOF = "name", "number", "{", "}", "=", "eof"


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _strip_comments(line: str) -> str:
    if line.lstrip().startswith("#"):
        return ""
    cut = line.find("//")
    if cut >= 0:
        return line[:cut]
    return line


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comments(raw)
        for m in _TOKEN_RE.finditer(line):
            tok = m.group(0)
            col = m.start() + 1
            if tok in "{}=":
                kind = tok
            elif tok[0].isdigit() or (tok[0] == "-" and len(tok) > 1):
                kind = NUMBER
            elif tok[0].isalpha() or tok[0] == "_":
                kind = NAME
            else:
                raise ParseError(f"unexpected character {tok!r}", lineno, col)
            tokens.append(_Token(kind, tok, lineno, col))
    last_line = text.count("\n") + 1
    tokens.append(_Token(EOF, "", last_line, 1))
    return tokens


def _number_to_fraction(text: str) -> Fraction:
    if "." in text:
        whole, frac = text.split(".")
        sign = -1 if whole.startswith("-") else 1
        whole = whole.lstrip("-")
        num = int(whole or "0") * 10 ** len(frac) + int(frac or "0")
        return Fraction(sign * num, 10 ** len(frac))
    return Fraction(int(text))


def fraction_to_decimal(value: Fraction) -> str:
    """Render a fraction with a 2^a*5^b denominator as an exact decimal."""
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        raise ValueError(f"{value} has no exact decimal form")
    k = max(twos, fives)
    scaled = abs(num) * 10**k // den
    digits = str(scaled).rjust(k + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{digits[:-k]}.{digits[-k:]}"


# --- Parser ---

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.model = ConfigModel()
        self.good_set: dict[str, _Token] = {}
        # References to resolve after all blocks are read: (name, token, context)
        self.refs: list[tuple[str, _Token, str]] = []
        self.seen_blocks: set[str] = set()

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            got = tok.text or "end of file"
            raise ParseError(f"expected {what}, got {got!r}", tok.line, tok.col)
        return tok

    def error(self, msg: str, tok: _Token):
        raise ParseError(msg, tok.line, tok.col)

    def warn(self, msg: str, tok: _Token):
        self.model.parse_warnings.append(Diagnostic("warning", msg, tok.line, tok.col))

    # top level

    def parse(self) -> ConfigModel:
        while self.peek().kind != EOF:
            head = self.expect(NAME, "a block name")
            if head.text in self.seen_blocks:
                self.error(f"duplicate block {head.text!r}", head)
            self.seen_blocks.add(head.text)
            self.expect(LBRACE, "'{'")
            if head.text == "GOODS":
                self.parse_goods()
            elif head.text == "PRIMARY_RESOURCES":
                self.parse_primaries()
            elif head.text == "PRODUCERS":
                self.parse_producers()
            elif head.text == "CONTROL_VARIABLES":
                self.parse_control_vars()
            elif head.text == "GOODS_I_WISH":
                self.parse_wishes()
            elif head.text == "ARRIVALS":
                self.parse_arrivals()
            else:
                self.error(f"unknown block {head.text!r}", head)
        self.resolve()
        return self.model

    def declare_good(self, tok: _Token, implicit: bool = False):
        name = tok.text
        if name in self.good_set:
            if implicit:
                return
            self.error(f"duplicate declaration of good {name!r}", tok)
        self.good_set[name] = tok
        self.model.goods.append(Good(len(self.model.goods), name))

    def parse_goods(self):
        while self.peek().kind == NAME:
            self.declare_good(self.next())
        self.expect(RBRACE, "'}' or a good name")

    def parse_primaries(self):
        while self.peek().kind == NAME:
            tok = self.next()
            if tok.text in self.model.primary_resources:
                self.error(f"duplicate primary resource {tok.text!r}", tok)
            self.model.primary_resources.append(tok.text)
            self.refs.append((tok.text, tok, "PRIMARY_RESOURCES"))
        self.expect(RBRACE, "'}' or a good name")

    def parse_assignment_block(self, context: str) -> dict[str, Fraction]:
        """Inner `{ name = number ... }` (the '{' is already consumed by caller)."""
        out: dict[str, Fraction] = {}
        while self.peek().kind == NAME:
            key = self.next()
            self.expect(EQUALS, "'='")
            val = self.expect(NUMBER, "a number")
            if key.text in out:
                self.error(f"duplicate entry {key.text!r} in {context}", key)
            frac = _number_to_fraction(val.text)
            lowest = 0 if context == "immobilizedMinimums" else 1
            if frac < 0 or (lowest and frac <= 0):
                self.error(f"{context} value for {key.text!r} must be > 0", val)
            out[key.text] = frac
            self.refs.append((key.text, key, context))
        self.expect(RBRACE, "'}' or an entry")
        return out

    def parse_producers(self):
        names_seen = set()
        while self.peek().kind == NAME:
            name_tok = self.next()
            if name_tok.text in names_seen:
                self.error(f"duplicate producer {name_tok.text!r}", name_tok)
            names_seen.add(name_tok.text)
            self.expect(LBRACE, "'{'")
            producer = ProducerSpec(name_tok.text)
            while self.peek().kind == NAME:
                section = self.next()
                self.expect(LBRACE, "'{'")
                if section.text == "immobilizedMinimums":
                    mins = self.parse_assignment_block("immobilizedMinimums")
                    producer.immobilized_minimums.update(mins)
                elif section.text == "products_data":
                    self.parse_products(producer)
                else:
                    self.error(
                        f"unknown producer section {section.text!r}", section
                    )
            self.expect(RBRACE, "'}'")
            if not producer.products:
                self.error(
                    f"producer {producer.name!r} declares no products", name_tok
                )
            for key in producer.immobilized_minimums:
                if not any(key in p.non_consumed for p in producer.products):
                    self.error(
                        f"immobilizedMinimums good {key!r} not in any "
                        f"nonConsumedPerUnit of {producer.name!r}",
                        name_tok,
                    )
            self.model.producers.append(producer)
        self.expect(RBRACE, "'}' or a producer name")

    def parse_products(self, producer: ProducerSpec):
        while self.peek().kind == NAME:
            good_tok = self.next()
            self.expect(LBRACE, "'{'")
            product = ProductSpec(good_tok.text)
            self.declare_good(good_tok, implicit=True)
            while self.peek().kind == NAME:
                entry = self.next()
                if entry.text in ("lifetimeSteps", "durationSteps"):
                    self.expect(EQUALS, "'='")
                    val = self.expect(NUMBER, "an integer")
                    frac = _number_to_fraction(val.text)
                    if frac.denominator != 1 or frac < 1:
                        self.error(f"{entry.text} must be a positive integer", val)
                    if entry.text == "lifetimeSteps":
                        product.lifetime_steps = int(frac)
                    else:
                        product.duration_steps = int(frac)
                elif entry.text == "nonConsumedPerUnit":
                    self.expect(LBRACE, "'{'")
                    product.non_consumed.update(
                        self.parse_assignment_block("nonConsumedPerUnit")
                    )
                elif entry.text in ("ConsumedPerUnit", "consumedPerUnit"):
                    self.expect(LBRACE, "'{'")
                    product.consumed.update(
                        self.parse_assignment_block("ConsumedPerUnit")
                    )
                else:
                    self.error(f"unknown product entry {entry.text!r}", entry)
            self.expect(RBRACE, "'}'")
            overlap = set(product.consumed) & set(product.non_consumed)
            if overlap:
                self.error(
                    f"goods {sorted(overlap)} appear in both ConsumedPerUnit "
                    f"and nonConsumedPerUnit of {good_tok.text!r}",
                    good_tok,
                )
            producer.products.append(product)
        self.expect(RBRACE, "'}' or a product name")

    def parse_control_vars(self):
        control = self.model.control
        while self.peek().kind != RBRACE and self.peek().kind != EOF:
            val_tok = self.next()
            if val_tok.kind != NUMBER:
                self.error(
                    "CONTROL_VARIABLES entries are value-first "
                    f"('<integer> <name>'); got {val_tok.text!r} first",
                    val_tok,
                )
            frac = _number_to_fraction(val_tok.text)
            if frac.denominator != 1:
                self.error("control variable values must be integers", val_tok)
            name_tok = self.expect(NAME, "a control variable name")
            known = CONTROL_VARS.get(name_tok.text)
            if known is None:
                self.warn(f"unknown control variable {name_tok.text!r}", name_tok)
                continue
            setattr(control, known[0], int(frac))
        self.expect(RBRACE, "'}'")
        if control.n_years < 0 or control.n_individuals < 0:
            self.error("nYears and nIndividuals must be >= 0", self.tokens[self.pos - 1])
        if not (0 <= control.reserve_ratio_per100 <= 100):
            self.error("ReserveRatioPer100 must lie in [0, 100]", self.tokens[self.pos - 1])

    def parse_wishes(self):
        while self.peek().kind == NAME:
            owner_tok = self.next()
            if owner_tok.text not in ("INDIVIDUAL", "STATE"):
                self.error(
                    f"wish section must be INDIVIDUAL or STATE, got {owner_tok.text!r}",
                    owner_tok,
                )
            target = (
                self.model.wishes_individual
                if owner_tok.text == "INDIVIDUAL"
                else self.model.wishes_state
            )
            if target:
                self.error(f"duplicate {owner_tok.text} wish section", owner_tok)
            self.expect(LBRACE, "'{'")
            while self.peek().kind == NAME and self.peek().text != "recurring":
                good_tok = self.next()
                self.expect(EQUALS, "'='")
                qty_tok = self.expect(NUMBER, "a quantity")
                qty = _number_to_fraction(qty_tok.text)
                if qty.denominator != 1 or qty < 1:
                    self.error("wish quantities must be integers >= 1", qty_tok)
                recurring = False
                if self.peek().kind == NAME and self.peek().text == "recurring":
                    self.next()
                    recurring = True
                target.append(WishEntry(good_tok.text, int(qty), recurring))
                self.refs.append((good_tok.text, good_tok, "GOODS_I_WISH"))
            self.expect(RBRACE, "'}'")
        self.expect(RBRACE, "'}'")

    def parse_arrivals(self):
        while self.peek().kind == NUMBER:
            month_tok = self.next()
            month = _number_to_fraction(month_tok.text)
            if month.denominator != 1 or month < 0:
                self.error("arrival month must be an integer >= 0", month_tok)
            good_tok = self.expect(NAME, "a good name")
            qty_tok = self.expect(NUMBER, "a quantity")
            qty = _number_to_fraction(qty_tok.text)
            if qty.denominator != 1 or qty < 1:
                self.error("arrival quantities must be integers >= 1", qty_tok)
            self.model.arrivals.append(Arrival(int(month), good_tok.text, int(qty)))
            self.refs.append((good_tok.text, good_tok, "ARRIVALS"))
        self.expect(RBRACE, "'}' or an arrival entry")

    def resolve(self):
        """Cross-reference pass: every referenced good must resolve to a
        declared good or a producer-type name (producers count as goods but
        are not traded)."""
        producer_names = {p.name for p in self.model.producers}
        for name, tok, context in self.refs:
            if name in self.good_set:
                continue
            if name in producer_names:
                self.warn(
                    f"producer type {name!r} referenced as a good in {context}; "
                    "producers are not tradeable",
                    tok,
                )
                continue
            self.error(f"unknown good {name!r} referenced in {context}", tok)


def parse_config(text: str) -> ConfigModel:
    """Parse an input file into a ConfigModel.  Raises ParseError."""
    return _Parser(_tokenize(text)).parse()


# --- Serializer ---

def _wish_lines(entries: list[WishEntry], indent: str) -> list[str]:
    out = []
    for e in entries:
        suffix = " recurring" if e.recurring else ""
        out.append(f"{indent}{e.good} = {e.quantity}{suffix}")
    return out


def serialize_config(model: ConfigModel) -> str:
    """Emit canonical text whose re-parse equals `model` (round-trip fixpoint).

    Goods and producers keep declaration order; control variables are
    value-first per the grammar.
    """
    out: list[str] = []
    out.append("GOODS {")
    names = model.good_names()
    for i in range(0, len(names), 6):
        out.append("  " + " ".join(names[i : i + 6]))
    out.append("}")
    if model.primary_resources:
        out.append("PRIMARY_RESOURCES {")
        out.append("  " + " ".join(model.primary_resources))
        out.append("}")
    out.append("PRODUCERS {")
    for p in model.producers:
        out.append(f"  {p.name} {{")
        if p.immobilized_minimums:
            out.append("    immobilizedMinimums {")
            for k, v in p.immobilized_minimums.items():
                out.append(f"      {k} = {fraction_to_decimal(v)}")
            out.append("    }")
        out.append("    products_data {")
        for prod in p.products:
            out.append(f"      {prod.good} {{")
            if prod.lifetime_steps is not None:
                out.append(f"        lifetimeSteps = {prod.lifetime_steps}")
            if prod.duration_steps is not None:
                out.append(f"        durationSteps = {prod.duration_steps}")
            if prod.non_consumed:
                out.append("        nonConsumedPerUnit {")
                for k, v in prod.non_consumed.items():
                    out.append(f"          {k} = {fraction_to_decimal(v)}")
                out.append("        }")
            if prod.consumed:
                out.append("        ConsumedPerUnit {")
                for k, v in prod.consumed.items():
                    out.append(f"          {k} = {fraction_to_decimal(v)}")
                out.append("        }")
            out.append("      }")
        out.append("    }")
        out.append("  }")
    out.append("}")
    out.append("CONTROL_VARIABLES {")
    for f in fields(ControlVars):
        value = getattr(model.control, f.name)
        if value is None:
            continue
        out.append(f"  {value} {_ATTR_TO_DSL[f.name]}")
    out.append("}")
    if model.wishes_individual or model.wishes_state:
        out.append("GOODS_I_WISH {")
        if model.wishes_individual:
            out.append("  INDIVIDUAL {")
            out.extend(_wish_lines(model.wishes_individual, "    "))
            out.append("  }")
        if model.wishes_state:
            out.append("  STATE {")
            out.extend(_wish_lines(model.wishes_state, "    "))
            out.append("  }")
        out.append("}")
    if model.arrivals:
        out.append("ARRIVALS {")
        for a in model.arrivals:
            out.append(f"  {a.month} {a.good} {a.quantity}")
        out.append("}")
    return "\n".join(out) + "\n"


# --- Validation (diagnostics beyond grammar) ---

def _suppliable_goods(model: ConfigModel) -> set[str]:
    """Transitive closure of goods obtainable from primaries and labor.

    A good is suppliable if it is primary, is labor, or is a product of a
    producer whose consumed inputs are all suppliable and whose
    non-consumed inputs are each suppliable or waived (waived = listed in
    immobilizedMinimums with a threshold > 0; below the threshold the
    producer can bootstrap without that capital good)."""
    suppliable = set(model.primary_resources)
    suppliable.add("workers_n")
    changed = True
    while changed:
        changed = False
        for producer in model.producers:
            for product in producer.products:
                if product.good in suppliable:
                    continue
                ok = all(c in suppliable for c in product.consumed)
                if ok:
                    for g in product.non_consumed:
                        if g in suppliable:
                            continue
                        if producer.immobilized_minimums.get(g, 0) > 0:
                            continue
                        ok = False
                        break
                if ok:
                    suppliable.add(product.good)
                    changed = True
    return suppliable


def validate_config(model: ConfigModel) -> list[Diagnostic]:
    """Semantic diagnostics on a parsed model.  Errors mean the economy
    cannot function as written; warnings flag likely mistakes."""
    diags: list[Diagnostic] = list(model.parse_warnings)
    produced = {p.good for spec in model.producers for p in spec.products}
    used: set[str] = set(model.primary_resources)
    used.update(e.good for e in model.wishes_individual)
    used.update(e.good for e in model.wishes_state)
    used.update(a.good for a in model.arrivals)
    for spec in model.producers:
        used.update(spec.immobilized_minimums)
        for p in spec.products:
            used.update(p.consumed)
            used.update(p.non_consumed)
    for g in model.goods:
        if g.name not in produced and g.name not in used and g.name != "workers_n":
            diags.append(Diagnostic("warning", f"unused good {g.name!r}"))
    for g in model.goods:
        if (
            g.name not in produced
            and g.name not in model.primary_resources
            and g.name != "workers_n"
            and g.name in used
        ):
            diags.append(
                Diagnostic(
                    "warning",
                    f"good {g.name!r} is never produced and not a primary resource",
                )
            )
    for spec in model.producers:
        for p in spec.products:
            if "workers_n" not in p.consumed and "workers_n" not in p.non_consumed:
                diags.append(
                    Diagnostic(
                        "warning",
                        f"product {p.good!r} of {spec.name!r} needs no workers_n",
                    )
                )
    suppliable = _suppliable_goods(model)
    for spec in model.producers:
        for p in spec.products:
            for c in p.consumed:
                if c not in suppliable:
                    diags.append(
                        Diagnostic(
                            "error",
                            f"consumed input {c!r} of product {p.good!r} "
                            f"({spec.name!r}) can never be supplied: no producer "
                            "chain reaches it from primary resources",
                        )
                    )
    if model.control.reserve_ratio_per100 == 0:
        diags.append(Diagnostic("warning", "ReserveRatioPer100 = 0: unlimited credit"))
    if model.control.n_years == 0:
        diags.append(Diagnostic("warning", "nYears = 0: simulation produces no months"))
    return diags
