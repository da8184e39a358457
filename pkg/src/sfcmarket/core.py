"""Domain types and cost/utility evaluators for the community energy market.

Three parties trade: residential units (RUs) with rooftop generation, a
shared facility controller (SFC) that must procure a fixed amount of
energy for common equipment, and the main grid that sells high and buys
low. Energy is in kWh, prices in cents/kWh; utilities and costs are
plain double-precision scalars in the same value units.

Everything here is a pure function of immutable inputs and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WIRE_DECIMALS",
    "Allocation",
    "MarketPrices",
    "RuParams",
    "Scenario",
    "ScenarioError",
    "baseline_cost",
    "quantize",
    "ru_utility",
    "scenario_violations",
    "sfc_cost",
    "social_cost",
    "trade_cost",
    "validate_scenario",
]

# Resolution of every number that crosses the negotiation wire (1e-6 of a
# cent or of a kWh). Keeping one global resolution lets in-process sweeps
# and socket sessions agree bit for bit.
WIRE_DECIMALS = 6
WIRE_SCALE = 10.0 ** WIRE_DECIMALS


class ScenarioError(ValueError):
    """A scenario (or one of its parts) violates a market invariant.

    ``violations`` lists every broken invariant as ``"<field path>: <what>"``.
    """

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def quantize(x: float) -> float:
    """Round a number to the market's wire resolution (6 decimal places).

    ``round()`` applies round-half-even to ``x * 1e6``, exactly like
    ``np.rint`` in the array kernels, and the result survives a ``"%.6f"``
    encode/decode round trip unchanged. Do not "simplify" this to
    ``round(x, 6)``: the two differ on some inputs, and bit-stability
    between the scalar and array paths is what makes distributed sessions
    reproduce in-process sweeps exactly.
    """
    return round(x * WIRE_SCALE) / WIRE_SCALE


@dataclass(frozen=True)
class RuParams:
    """One residential unit's private data.

    k is the consumption preference weight (must be positive), e_gen the
    energy generated in the trading window, e_min the base load the unit
    must always cover. A unit participates only when e_gen > e_min.
    """

    ru_id: int
    k: float
    e_gen: float
    e_min: float = 0.0


@dataclass(frozen=True)
class MarketPrices:
    """Grid selling/buying prices and the facility's offered price.

    The grid buys noticeably below what it charges, and the facility's
    offer must sit between the two so that trading locally is worthwhile
    for both sides. Violations raise ScenarioError at construction.
    """

    grid_sell: float
    grid_buy: float
    sfc_price: float

    def __post_init__(self):
        v = []
        if not 0.0 < self.grid_buy:
            v.append("grid_buy: must be positive")
        if not self.grid_buy < self.grid_sell:
            v.append("grid_buy: must be below grid_sell")
        if not self.grid_buy <= self.sfc_price <= self.grid_sell:
            v.append("sfc_price: must lie within [grid_buy, grid_sell]")
        if v:
            raise ScenarioError(v)


@dataclass(frozen=True)
class Scenario:
    """A full game instance: the RU population, the SFC requirement, and grid prices."""

    rus: tuple[RuParams, ...]
    e_req: float
    grid_sell: float
    grid_buy: float
    seed: int | None = None

    @property
    def n_rus(self) -> int:
        return len(self.rus)

    def k_values(self) -> np.ndarray:
        return np.array([ru.k for ru in self.rus], dtype=np.float64)

    def e_gen_values(self) -> np.ndarray:
        return np.array([ru.e_gen for ru in self.rus], dtype=np.float64)

    def e_min_values(self) -> np.ndarray:
        return np.array([ru.e_min for ru in self.rus], dtype=np.float64)


@dataclass(frozen=True)
class Allocation:
    """Consumption levels, one per RU, aligned with Scenario.rus.

    What each unit does not consume is offered for sale:
    offer = e_gen - consumption.
    """

    consumptions: tuple[float, ...]

    def offers(self, scenario: Scenario) -> tuple[float, ...]:
        if len(self.consumptions) != scenario.n_rus:
            raise ValueError(
                f"allocation has {len(self.consumptions)} entries for "
                f"{scenario.n_rus} RUs"
            )
        return tuple(
            ru.e_gen - e for ru, e in zip(scenario.rus, self.consumptions)
        )


def ru_utility(ru: RuParams, e_n: float, price: float) -> float:
    """Utility a unit gets from consuming e_n and selling the rest at price.

    Diminishing returns on own consumption (k * ln(1 + e_n)) plus linear
    revenue price * (e_gen - e_n). Strictly concave in e_n.
    """
    if price <= 0.0:
        raise ValueError(f"price must be positive, got {price}")
    if not ru.e_min <= e_n <= ru.e_gen:
        raise ValueError(
            f"consumption {e_n} outside [{ru.e_min}, {ru.e_gen}] for RU {ru.ru_id}"
        )
    return ru.k * math.log(1.0 + e_n) + price * (ru.e_gen - e_n)


def trade_cost(price: float, total_offer: float, e_req: float, grid_sell: float) -> float:
    """SFC cost of buying total_offer from units and the remainder from the grid.

    This expression must stay token-identical with the sweep kernels and
    the session leader; all three paths have to produce bit-equal costs.
    """
    return price * total_offer + (e_req - total_offer) * grid_sell


def sfc_cost(scenario: Scenario, offers, price: float) -> float:
    """Total procurement cost for the facility at the given offer vector.

    When offers exceed the requirement the grid term goes negative: the
    surplus is implicitly resold to the grid at its selling price. Callers
    that care flag this regime (see EquilibriumOutcome.surplus_flag).
    """
    offers = tuple(offers)
    if len(offers) != scenario.n_rus:
        raise ValueError(
            f"offer list has {len(offers)} entries for {scenario.n_rus} RUs"
        )
    total = 0.0
    for off in offers:  # left-to-right; order is part of the bit contract
        total += off
    return trade_cost(price, total, scenario.e_req, scenario.grid_sell)


def baseline_cost(scenario: Scenario) -> float:
    """Cost of the no-trading scheme: buy everything from the grid."""
    validate_scenario(scenario)
    return scenario.e_req * scenario.grid_sell


def social_cost(scenario: Scenario, alloc: Allocation, price: float) -> float:
    """Facility cost minus the sum of unit utilities.

    The price transfers between facility and units cancel, so the result
    does not depend on the offered price (up to float noise); the price
    argument only fixes the intermediate terms.
    """
    offers = alloc.offers(scenario)
    cost = sfc_cost(scenario, offers, price)
    total_utility = 0.0
    for ru, e_n in zip(scenario.rus, alloc.consumptions):
        total_utility += ru_utility(ru, e_n, price)
    return cost - total_utility


def scenario_violations(scenario: Scenario) -> list[str]:
    """All invariant violations in a scenario, each tagged with its field path."""
    v: list[str] = []
    if not scenario.rus:
        v.append("rus: at least one RU is required")
    seen_ids: set[int] = set()
    for i, ru in enumerate(scenario.rus):
        path = f"rus[{i}]"
        if ru.ru_id in seen_ids:
            v.append(f"{path}.ru_id: duplicate id {ru.ru_id}")
        seen_ids.add(ru.ru_id)
        if not (math.isfinite(ru.k) and ru.k > 0.0):
            v.append(f"{path}.k: must be positive")
        if not (math.isfinite(ru.e_min) and ru.e_min >= 0.0):
            v.append(f"{path}.e_min: must be nonnegative")
        if not (math.isfinite(ru.e_gen) and ru.e_min < ru.e_gen):
            v.append(f"{path}.e_gen: generation must exceed base load")
    if not (math.isfinite(scenario.e_req) and scenario.e_req > 0.0):
        v.append("e_req: required energy must be positive")
    if not (math.isfinite(scenario.grid_buy) and scenario.grid_buy > 0.0):
        v.append("grid_buy: must be positive")
    if not (math.isfinite(scenario.grid_sell) and scenario.grid_buy < scenario.grid_sell):
        v.append("grid_sell: must exceed grid_buy")
    return v


def validate_scenario(scenario: Scenario) -> Scenario:
    """Return the scenario unchanged, or raise ScenarioError listing every violation."""
    v = scenario_violations(scenario)
    if v:
        raise ScenarioError(v)
    return scenario
