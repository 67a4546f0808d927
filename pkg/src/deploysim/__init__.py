"""deploysim: a deterministic agent-based engine that grows a production
and marketing economy (or a moneyless robot colony, or a single robot's
action sequence) from one declarative input file."""

from .config import (
    ConfigModel,
    Diagnostic,
    ParseError,
    parse_config,
    serialize_config,
    validate_config,
)
from .depgraph import (
    build_gdn,
    consumed_ancestors,
    export_edge_list,
    first_appearance_order,
    producibility_layers,
)
from .engine import (
    ROBOTS_MODE,
    SETTLERS_MODE,
    SINGLE_ROBOT_MODE,
    RunArtifacts,
    Unschedulable,
    run_simulation,
)
from .agents import InvariantViolation
from .market import (
    MonthlyPriceStats,
    Refusal,
    Trade,
    TransactionRecord,
    adapt_prices,
    attempt_trade,
    production_price,
    record_and_aggregate,
)
from .metrics import (
    compute_gdp_per_capita,
    compute_unemployment,
    fit_wealth_tail,
    write_artifacts,
    write_summary,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigModel",
    "Diagnostic",
    "ParseError",
    "parse_config",
    "serialize_config",
    "validate_config",
    "build_gdn",
    "consumed_ancestors",
    "export_edge_list",
    "first_appearance_order",
    "producibility_layers",
    "run_simulation",
    "RunArtifacts",
    "Unschedulable",
    "InvariantViolation",
    "SETTLERS_MODE",
    "ROBOTS_MODE",
    "SINGLE_ROBOT_MODE",
    "attempt_trade",
    "adapt_prices",
    "production_price",
    "record_and_aggregate",
    "Trade",
    "Refusal",
    "TransactionRecord",
    "MonthlyPriceStats",
    "compute_unemployment",
    "compute_gdp_per_capita",
    "fit_wealth_tail",
    "write_artifacts",
    "write_summary",
    "__version__",
]
