"""Parser, serializer and validator tests for the input DSL."""

from fractions import Fraction

import pytest

from deploysim.config import (
    Diagnostic,
    ParseError,
    parse_config,
    serialize_config,
    validate_config,
)

# Completed version of the garment-producer example file: same structure
# and numbers, with the elided jacket product filled in.
GARMENT_TEXT = """
GOODS {
workers_n food_kg window_n home_n car_n
door_n jacket_n cotton_kg wheat_kg roads_km
hydroElDam_n building_100m2
}
PRODUCERS {
  P_garment {
    immobilizedMinimums {
      building_100m2 = 2
    }
    products_data {
      trousers_n {
        lifetimeSteps = 24
        nonConsumedPerUnit {
          workers_n = 0.02
          building_100m2 = 0.02
        }
        ConsumedPerUnit {
          cotton_kg = 0.5
        }
      }
      jacket_n {
        lifetimeSteps = 36
        nonConsumedPerUnit {
          workers_n = 0.04
          building_100m2 = 0.02
        }
        ConsumedPerUnit {
          cotton_kg = 1.0
        }
      }
    }
  }
}

CONTROL_VARIABLES {
  120 nYears
  2000 nIndividuals
  40 nMaxInteractingNeighbors
  120 PriceBenefitPer100
  120 PriceAdaptDefaultPer100
  100000 MonetaryBasePerCapita
  1 LiabilityRatePer1000
  3 AssetRatePer1000
  200000 BanksInitCapital
  2 BanksRateFactor
  1 ReserveRatioPer100
  15 VATPer100
  20 TaxPer100
  10 PayUnemplPer100
}
"""

MINIMAL_TEXT = """
GOODS {
}
PRODUCERS {
}
CONTROL_VARIABLES {
  1 nYears
  1 nIndividuals
}
"""


def test_parse_garment_example():
    model = parse_config(GARMENT_TEXT)
    assert [p.name for p in model.producers] == ["P_garment"]
    garment = model.producers[0]
    assert garment.immobilized_minimums == {"building_100m2": Fraction(2)}
    trousers = garment.products[0]
    assert trousers.good == "trousers_n"
    assert trousers.lifetime_steps == 24
    assert trousers.non_consumed["workers_n"] == Fraction(2, 100)
    assert trousers.consumed["cotton_kg"] == Fraction(5, 10)
    # products are implicitly declared goods
    assert "trousers_n" in model.good_names()
    assert model.control.n_years == 120
    assert model.control.price_adapt_default_per100 == 120


def test_parse_empty_system():
    model = parse_config(MINIMAL_TEXT)
    assert model.producers == []
    assert model.goods == []
    assert model.control.n_years == 1


def test_parse_defaults_applied():
    model = parse_config(MINIMAL_TEXT)
    assert model.control.b_fixed_prices == 0
    assert model.control.b_robots_colony == 0
    assert model.control.max_n_banks is None  # unlimited


def test_unknown_good_reference_positioned():
    text = GARMENT_TEXT.replace("cotton_kg = 0.5", "steel_kg = 0.5")
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert "steel_kg" in str(exc.value)
    assert exc.value.line > 0


def test_duplicate_good_rejected():
    text = MINIMAL_TEXT.replace("GOODS {", "GOODS {\n wood_kg wood_kg")
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert "duplicate" in str(exc.value)


def test_value_first_grammar_enforced():
    text = MINIMAL_TEXT.replace("1 nYears", "nYears 1")
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert "value-first" in str(exc.value)


def test_unknown_control_variable_warns():
    text = MINIMAL_TEXT.replace("1 nYears", "1 nYears\n  7 FutureKnob")
    model = parse_config(text)
    assert any("FutureKnob" in d.message for d in model.parse_warnings)
    assert model.control.n_years == 1


def test_unclosed_block():
    text = "GOODS {\n wood_kg\n"
    with pytest.raises(ParseError):
        parse_config(text)


def test_malformed_number():
    text = MINIMAL_TEXT.replace("1 nYears", "1.5 nYears")
    with pytest.raises(ParseError):
        parse_config(text)


def test_comments_never_alter_parse():
    base = parse_config(GARMENT_TEXT)
    lines = GARMENT_TEXT.splitlines()
    commented = []
    for i, line in enumerate(lines):
        commented.append("# full-line comment %d" % i)
        if "=" in line:
            line = line + "  // trailing note"
        commented.append(line)
    assert parse_config("\n".join(commented)) == base


def test_roundtrip_fixpoint_garment():
    model = parse_config(GARMENT_TEXT)
    text = serialize_config(model)
    assert "lifetimeSteps = 24" in text
    again = parse_config(text)
    assert again == model
    # fixpoint: serializing the reparse is byte-identical
    assert serialize_config(again) == text


def test_roundtrip_minimal():
    model = parse_config(MINIMAL_TEXT)
    assert parse_config(serialize_config(model)) == model


def test_serialize_preserves_declaration_order():
    text = """
GOODS { workers_n a_kg b_kg c_kg }
PRODUCERS {
  P_c { products_data { c_n { nonConsumedPerUnit { workers_n = 1 } ConsumedPerUnit { c_kg = 1 } } } }
  P_a { products_data { a_n { nonConsumedPerUnit { workers_n = 1 } ConsumedPerUnit { a_kg = 1 } } } }
  P_b { products_data { b_n { nonConsumedPerUnit { workers_n = 1 } ConsumedPerUnit { b_kg = 1 } } } }
}
CONTROL_VARIABLES { 1 nYears 1 nIndividuals }
"""
    model = parse_config(text)
    out = serialize_config(model)
    assert out.index("P_c") < out.index("P_a") < out.index("P_b")
    assert out.index("a_kg") < out.index("b_kg") < out.index("c_kg")


def test_wishes_and_arrivals_roundtrip():
    text = MINIMAL_TEXT.replace("GOODS {", "GOODS {\n food_kg home_n pin_n") + """
GOODS_I_WISH {
  INDIVIDUAL {
    food_kg = 30 recurring
    home_n = 1
  }
  STATE {
    home_n = 5
  }
}
ARRIVALS {
  0 pin_n 4
  3 pin_n 2
}
"""
    model = parse_config(text)
    assert model.wishes_individual[0].recurring
    assert not model.wishes_individual[1].recurring
    assert model.wishes_state[0].quantity == 5
    assert model.arrivals[1].month == 3
    assert parse_config(serialize_config(model)) == model


# --- validate_config ---

def test_validate_garment_no_errors():
    text = GARMENT_TEXT + "\nPRIMARY_RESOURCES { cotton_kg wheat_kg }\n"
    model = parse_config(text)
    diags = validate_config(model)
    assert not [d for d in diags if d.severity == "error"]


def test_validate_unused_good_warns():
    model = parse_config(MINIMAL_TEXT.replace("GOODS {", "GOODS {\n lonely_kg"))
    diags = validate_config(model)
    assert any("unused good" in d.message for d in diags)


def test_validate_reserve_ratio_zero_warns():
    model = parse_config(MINIMAL_TEXT.replace("1 nIndividuals", "1 nIndividuals\n 0 ReserveRatioPer100"))
    diags = validate_config(model)
    assert any("ReserveRatio" in d.message for d in diags)


def test_validate_unsuppliable_chain_error():
    # 5-good example; hand-built closure: primaries {ore_kg}; chain
    # ore -> iron -> tool is suppliable; gadget needs ghost_kg which nothing
    # produces, so the closure = {ore, workers, iron_kg, tool_n} and gadget's
    # recipe must be flagged.
    text = """
GOODS { workers_n ore_kg ghost_kg }
PRIMARY_RESOURCES { ore_kg }
PRODUCERS {
  P_ore { products_data { ore_kg { nonConsumedPerUnit { workers_n = 0.1 } } } }
  P_iron { products_data { iron_kg { nonConsumedPerUnit { workers_n = 0.1 } ConsumedPerUnit { ore_kg = 2 } } } }
  P_tool { products_data { tool_n { nonConsumedPerUnit { workers_n = 0.5 } ConsumedPerUnit { iron_kg = 3 } } } }
  P_gadget { products_data { gadget_n { nonConsumedPerUnit { workers_n = 0.5 } ConsumedPerUnit { ghost_kg = 1 } } } }
}
CONTROL_VARIABLES { 1 nYears 1 nIndividuals }
"""
    model = parse_config(text)
    errors = [d for d in validate_config(model) if d.severity == "error"]
    assert len(errors) == 1
    assert "ghost_kg" in errors[0].message


def test_validate_missing_workers_warns():
    text = """
GOODS { workers_n sun_kg }
PRIMARY_RESOURCES { sun_kg }
PRODUCERS {
  P_sun { products_data { sun_kg { nonConsumedPerUnit { sun_kg = 1 } } } }
}
CONTROL_VARIABLES { 1 nYears 1 nIndividuals }
"""
    diags = validate_config(parse_config(text))
    assert any("workers_n" in d.message for d in diags)


def test_diagnostic_str():
    d = Diagnostic("warning", "something odd", 3, 1)
    assert "warning" in str(d) and "line 3" in str(d)


MUTATIONS = [
    GARMENT_TEXT.replace("products_data {", "products_data {", 1)[:-3],  # truncated tail
    GARMENT_TEXT.replace("}", "", 1),
    GARMENT_TEXT.replace("{", "", 1),
    GARMENT_TEXT.replace("= 0.5", "= 0..5"),
    GARMENT_TEXT.replace("= 0.5", "="),
    GARMENT_TEXT.replace("cotton_kg = 0.5", "unobtainium_kg = 1"),
    GARMENT_TEXT.replace("120 nYears", "nYears"),
    GARMENT_TEXT.replace("lifetimeSteps = 24", "lifetimeSteps = 0"),
    GARMENT_TEXT.replace("lifetimeSteps = 24", "lifetimeSteps = 2.5"),
    GARMENT_TEXT.replace("workers_n = 0.02", "workers_n = -0.02"),
    GARMENT_TEXT.replace("GOODS {", "GOODS { workers_n"),
    GARMENT_TEXT.replace("PRODUCERS", "PRODUCERS_TYPO"),
    GARMENT_TEXT.replace("immobilizedMinimums", "immobilizedMaximums"),
    GARMENT_TEXT + "GOODS { extra_kg }",
    GARMENT_TEXT.replace("ConsumedPerUnit {\n          cotton_kg = 0.5\n        }", "ConsumedPerUnit { workers_n = 0.5 }"),
    GARMENT_TEXT.replace("1 ReserveRatioPer100", "150 ReserveRatioPer100"),
    GARMENT_TEXT.replace("  P_garment {", "  P_garment { products_data { } }\n  P_garment {"),
    "GOODS {} PRODUCERS {} CONTROL_VARIABLES { 1 nYears } GOODS_I_WISH { SOMEONE { } }",
    "GOODS { a_kg } ARRIVALS { -1 a_kg 2 }",
    "GOODS { a_kg } ARRIVALS { 1 a_kg 0 }",
]


@pytest.mark.parametrize("idx", range(len(MUTATIONS)))
def test_mutations_error_with_position(idx):
    """Malformed inputs must raise a positioned ParseError, never crash."""
    with pytest.raises(ParseError) as exc:
        parse_config(MUTATIONS[idx])
    assert exc.value.line >= 1
    assert exc.value.col >= 1
