"""Leader-follower energy trading for a smart community.

A shared facility controller (the leader) buys energy for common
equipment from residential units (the followers) and the main grid. It
announces a price, every unit responds with how much surplus it will
sell at that price, and the controller keeps the cheapest price it
finds. The package computes that stable point in-process, verifies it by
sampled deviations, compares it against the all-grid baseline and the
full-information benchmark, and can play the whole negotiation over a
socket protocol in which unit parameters never leave the unit.
"""

from .core import (
    Allocation,
    MarketPrices,
    RuParams,
    Scenario,
    ScenarioError,
    baseline_cost,
    quantize,
    ru_utility,
    scenario_violations,
    sfc_cost,
    social_cost,
    validate_scenario,
)
from .equilibrium import (
    ComparisonReport,
    ComparisonRow,
    EquilibriumOutcome,
    VerificationReport,
    compare_schemes,
    complete_outcome,
    compute_se,
    verify_se,
)
from .follower import (
    BestResponse,
    best_response,
    best_response_oracle,
    utility_curve,
)
from .leader import (
    SweepConfig,
    SweepTrace,
    analytic_price,
    centralized_optimum,
    sweep_price,
    unclamped_optimum_price,
)
from .scenarios import GenerateSpec, generate_rus, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BestResponse",
    "ComparisonReport",
    "ComparisonRow",
    "EquilibriumOutcome",
    "GenerateSpec",
    "MarketPrices",
    "RuParams",
    "Scenario",
    "ScenarioError",
    "SweepConfig",
    "SweepTrace",
    "VerificationReport",
    "analytic_price",
    "baseline_cost",
    "best_response",
    "best_response_oracle",
    "centralized_optimum",
    "compare_schemes",
    "complete_outcome",
    "compute_se",
    "generate_rus",
    "load_scenario",
    "parse_scenario",
    "quantize",
    "ru_utility",
    "scenario_violations",
    "sfc_cost",
    "social_cost",
    "sweep_price",
    "unclamped_optimum_price",
    "utility_curve",
    "validate_scenario",
    "verify_se",
]
