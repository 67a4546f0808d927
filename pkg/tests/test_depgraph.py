"""Dependency graph construction and layering tests."""

from deploysim.config import parse_config
from deploysim.depgraph import (
    build_gdn,
    consumed_ancestors,
    export_edge_list,
    first_appearance_order,
    producibility_layers,
)

from test_config import GARMENT_TEXT

CHAIN_TEXT = """
GOODS { workers_n a_kg b_kg c_kg }
PRIMARY_RESOURCES { a_kg }
PRODUCERS {
  P_a { products_data { a_kg { nonConsumedPerUnit { workers_n = 0.1 } } } }
  P_b { products_data { b_kg { nonConsumedPerUnit { workers_n = 0.1 } ConsumedPerUnit { a_kg = 1 } } } }
  P_c { products_data { c_kg { nonConsumedPerUnit { workers_n = 0.1 } ConsumedPerUnit { b_kg = 1 } } } }
}
CONTROL_VARIABLES { 1 nYears 1 nIndividuals }
"""


def _bfs_layers_oracle(model, primaries):
    """Independent closure oracle: repeated sweeps over raw recipe dicts."""
    layers = {g.name: None for g in model.goods}
    for p in primaries:
        layers[p] = 0
    layers["workers_n"] = 0
    for _ in range(len(model.goods) + 1):
        for spec in model.producers:
            for prod in spec.products:
                if layers.get(prod.good) is not None:
                    continue
                deps = set(prod.consumed)
                for g in prod.non_consumed:
                    if g == "workers_n":
                        continue
                    if spec.immobilized_minimums.get(g, 0) > 0:
                        continue
                    deps.add(g)
                if all(layers.get(d) is not None for d in deps):
                    layers[prod.good] = 1 + max(
                        [layers[d] for d in deps], default=0
                    )
    return layers


def test_gdn_edges_garment():
    model = parse_config(GARMENT_TEXT)
    graph = build_gdn(model)
    inputs = {(e.producer, e.good): e.roles for e in graph.input_edges}
    assert inputs[("P_garment", "cotton_kg")] == frozenset(["consumed"])
    assert inputs[("P_garment", "building_100m2")] == frozenset(
        ["nonConsumed", "immobilized"]
    )
    outputs = {(e.producer, e.good) for e in graph.output_edges}
    assert ("P_garment", "trousers_n") in outputs
    assert ("P_garment", "jacket_n") in outputs


def test_gdn_workers_only_producer():
    graph = build_gdn(parse_config(CHAIN_TEXT))
    edges_pa = [e for e in graph.input_edges if e.producer == "P_a"]
    assert len(edges_pa) == 1
    assert edges_pa[0].good == "workers_n"


def test_gdn_shared_input_not_merged():
    text = """
GOODS { workers_n wood_kg }
PRODUCERS {
  P_x { products_data { x_n { nonConsumedPerUnit { workers_n = 1 } ConsumedPerUnit { wood_kg = 1 } } } }
  P_y { products_data { y_n { nonConsumedPerUnit { workers_n = 1 } ConsumedPerUnit { wood_kg = 2 } } } }
}
CONTROL_VARIABLES { 1 nYears 1 nIndividuals }
"""
    graph = build_gdn(parse_config(text))
    wood_edges = [e for e in graph.input_edges if e.good == "wood_kg"]
    assert len(wood_edges) == 2
    assert {e.producer for e in wood_edges} == {"P_x", "P_y"}


def test_chain_layers():
    model = parse_config(CHAIN_TEXT)
    graph = build_gdn(model)
    layers = producibility_layers(graph, set(model.primary_resources))
    assert layers["a_kg"] == 0
    assert layers["b_kg"] == 1
    assert layers["c_kg"] == 2
    assert layers["workers_n"] == 0
    assert layers == _bfs_layers_oracle(model, model.primary_resources)


def test_empty_producers_unreachable():
    text = "GOODS { workers_n x_kg }\nPRODUCERS { }\nCONTROL_VARIABLES { 1 nYears 1 nIndividuals }"
    model = parse_config(text)
    layers = producibility_layers(build_gdn(model), set())
    assert layers["x_kg"] is None
    assert layers["workers_n"] == 0


def test_waiver_skips_immobilized_threshold():
    model = parse_config(GARMENT_TEXT + "PRIMARY_RESOURCES { cotton_kg }")
    layers = producibility_layers(build_gdn(model), {"cotton_kg"})
    # building_100m2 has no producer but its minimum (2) is waivable, so
    # trousers are reachable straight from cotton.
    assert layers["trousers_n"] == 1
    assert layers["building_100m2"] is None


def test_first_appearance_order_pairs():
    model = parse_config(CHAIN_TEXT)
    layers = producibility_layers(build_gdn(model), {"a_kg"})
    pairs = set(first_appearance_order(layers))
    assert ("a_kg", "b_kg") in pairs
    assert ("b_kg", "c_kg") in pairs
    assert ("a_kg", "c_kg") in pairs
    assert ("b_kg", "a_kg") not in pairs
    # same-layer goods are incomparable
    assert ("a_kg", "workers_n") not in pairs
    assert ("workers_n", "a_kg") not in pairs


def test_consumed_ancestors_chain():
    graph = build_gdn(parse_config(CHAIN_TEXT))
    assert consumed_ancestors(graph, "c_kg") == {"a_kg", "b_kg"}
    assert consumed_ancestors(graph, "b_kg") == {"a_kg"}
    assert consumed_ancestors(graph, "a_kg") == set()


def test_export_edge_list_format():
    graph = build_gdn(parse_config(CHAIN_TEXT))
    text = export_edge_list(graph)
    lines = text.strip().split("\n")
    assert "P_b\tconsumed\ta_kg" in lines
    assert "P_b\toutput\tb_kg" in lines
    for line in lines:
        assert len(line.split("\t")) == 3
