"""Goods/producer dependency graph and producibility queries.

Nodes are goods plus producer types.  Each producer has one output edge
per product and one input edge per recipe coefficient, tagged with the
input's role (consumed, nonConsumed, immobilized — an input can be both
nonConsumed and immobilized).  Layering answers "in what order can goods
first appear": layer 0 is the primary resources plus labor, and a good
sits one layer above the deepest input its cheapest producer route needs.
Capital inputs below an immobilized-minimums threshold are waived for
layering, because production can bootstrap below the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import ConfigModel

UNREACHABLE = None

CONSUMED = "consumed"
NON_CONSUMED = "nonConsumed"
IMMOBILIZED = "immobilized"
OUTPUT = "output"

WORKERS = "workers_n"


@dataclass(frozen=True)
class GdnEdge:
    producer: str
    good: str
    roles: frozenset[str]


@dataclass
class GdnGraph:
    goods: list[str]
    producer_names: list[str]
    input_edges: list[GdnEdge] = field(default_factory=list)
    output_edges: list[GdnEdge] = field(default_factory=list)
    # producer -> product good -> (consumed goods, required non-consumed goods,
    # waivable non-consumed goods); used by layering.
    recipes: dict[str, dict[str, tuple[set[str], set[str], set[str]]]] = field(
        default_factory=dict
    )

    def nodes(self) -> list[str]:
        return self.goods + self.producer_names

    def producers_of(self, good: str) -> list[str]:
        return [e.producer for e in self.output_edges if e.good == good]


def build_gdn(model: ConfigModel) -> GdnGraph:
    """Assemble the dependency graph from producer specs.

    Node and edge order follows declaration order, so the graph is
    deterministic for a given model."""
    graph = GdnGraph(
        goods=model.good_names(),
        producer_names=[p.name for p in model.producers],
    )
    for spec in model.producers:
        graph.recipes[spec.name] = {}
        for product in spec.products:
            graph.output_edges.append(
                GdnEdge(spec.name, product.good, frozenset([OUTPUT]))
            )
            roles: dict[str, set[str]] = {}
            for g in product.consumed:
                roles.setdefault(g, set()).add(CONSUMED)
            for g in product.non_consumed:
                roles.setdefault(g, set()).add(NON_CONSUMED)
                if g in spec.immobilized_minimums:
                    roles[g].add(IMMOBILIZED)
            for g, r in roles.items():
                graph.input_edges.append(GdnEdge(spec.name, g, frozenset(r)))
            waivable = {
                g
                for g in product.non_consumed
                if spec.immobilized_minimums.get(g, 0) > 0
            }
            required_non_consumed = {
                g for g in product.non_consumed if g not in waivable and g != WORKERS
            }
            graph.recipes[spec.name][product.good] = (
                set(product.consumed),
                required_non_consumed,
                waivable,
            )
    return graph


def producibility_layers(
    graph: GdnGraph, primaries: set[str] | list[str]
) -> dict[str, int | None]:
    """Map each good to its earliest-possible layer, or UNREACHABLE (None).

    Layer 0: primaries and labor.  A good reaches layer k+1 when some
    producer route has every consumed input and every required (non-waived)
    non-consumed input at layers <= k."""
    layers: dict[str, int | None] = {g: UNREACHABLE for g in graph.goods}
    for g in primaries:
        if g in layers:
            layers[g] = 0
    if WORKERS in layers:
        layers[WORKERS] = 0
    current = 0
    while True:
        advanced = False
        for producer, products in graph.recipes.items():
            for good, (consumed, required, _waivable) in products.items():
                if layers.get(good) is not None:
                    continue
                deps = consumed | required
                if all(
                    layers.get(d) is not None and layers[d] <= current for d in deps
                ):
                    layers[good] = current + 1
                    advanced = True
        if not advanced:
            break
        current += 1
    return layers


def first_appearance_order(
    layers: dict[str, int | None]
) -> list[tuple[str, str]]:
    """The partial order implied by layers: (a, b) pairs where a must be
    able to appear in the market no later than b.  Unreachable goods and
    same-layer goods are incomparable."""
    reachable = sorted(
        ((g, l) for g, l in layers.items() if l is not None),
        key=lambda item: (item[1], item[0]),
    )
    pairs: list[tuple[str, str]] = []
    for a, la in reachable:
        for b, lb in reachable:
            if la < lb:
                pairs.append((a, b))
    return pairs


def consumed_ancestors(graph: GdnGraph, good: str) -> set[str]:
    """Transitive closure of inputs every route to `good` must trade for:
    consumed inputs and required non-consumed inputs, intersected across
    the producers able to make the good (a good obtainable two ways only
    *must* be preceded by inputs common to both)."""
    closure: set[str] = set()
    frontier = [good]
    seen = {good}
    while frontier:
        g = frontier.pop()
        routes = []
        for producer, products in graph.recipes.items():
            if g in products:
                consumed, required, _ = products[g]
                routes.append(consumed | required)
        if not routes:
            continue
        common = set.intersection(*routes)
        for dep in common:
            if dep not in closure:
                closure.add(dep)
                if dep not in seen:
                    seen.add(dep)
                    frontier.append(dep)
    closure.discard(good)
    return closure


def export_edge_list(graph: GdnGraph) -> str:
    """Text edge list for external graph tooling: producer TAB role TAB good."""
    lines = []
    for e in graph.input_edges:
        role = "+".join(sorted(e.roles))
        lines.append(f"{e.producer}\t{role}\t{e.good}")
    for e in graph.output_edges:
        lines.append(f"{e.producer}\t{OUTPUT}\t{e.good}")
    return "\n".join(lines) + "\n"
