"""Equilibrium assembly, deviation-based verification, and scheme comparisons.

`compute_se` runs the price sweep and packages the stable point: the
facility's cost-minimising price together with every unit's best
response to it. `verify_se` then checks the defining property directly,
by sampling consumption deviations for each unit and re-scanning the
price grid for a cheaper price. `compare_schemes` scores the outcome
against the all-grid baseline and the full-information benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core import (
    Allocation,
    MarketPrices,
    Scenario,
    baseline_cost,
    quantize,
    ru_utility,
    trade_cost,
    validate_scenario,
)
from .follower import best_response
from .leader import (
    SweepConfig,
    centralized_optimum,
    price_grid,
    resolve_sweep,
    sweep_price,
)

__all__ = [
    "ComparisonReport",
    "ComparisonRow",
    "EquilibriumOutcome",
    "VerificationReport",
    "compare_schemes",
    "complete_outcome",
    "compute_se",
    "verify_se",
]


@dataclass(frozen=True)
class EquilibriumOutcome:
    """The negotiated stable point.

    Offers are wire-resolution values, the ones that actually cross the
    market. The private side (allocation, utilities, social cost) is
    None when the outcome was assembled by a session leader, which never
    learns unit parameters; `complete_outcome` fills it in where the full
    scenario is known.
    """

    price: float
    offers: tuple[float, ...]
    sfc_cost: float
    surplus_flag: bool  # total offers exceed the requirement (grid term negative)
    allocation: Allocation | None = None
    utilities: tuple[float, ...] | None = None
    social_cost: float | None = None

    def market_fields(self) -> dict:
        """The fields both a session leader and an in-process sweep can produce."""
        return {
            "price": self.price,
            "offers": self.offers,
            "sfc_cost": self.sfc_cost,
            "surplus_flag": self.surplus_flag,
        }


def complete_outcome(
    scenario: Scenario, price: float, offers: tuple[float, ...]
) -> EquilibriumOutcome:
    """Assemble a full outcome from market results plus the private side.

    Consumptions are recovered from the wire offers and clamped back into
    [e_min, e_gen] (wire rounding can overshoot a bound by under 1e-6).
    """
    if len(offers) != scenario.n_rus:
        raise ValueError(
            f"offer list has {len(offers)} entries for {scenario.n_rus} RUs"
        )
    MarketPrices(scenario.grid_sell, scenario.grid_buy, price)
    total = 0.0
    for off in offers:
        total += off
    cost = trade_cost(price, total, scenario.e_req, scenario.grid_sell)
    consumptions = []
    utilities = []
    for ru, off in zip(scenario.rus, offers):
        e_n = ru.e_gen - off
        if e_n < ru.e_min:
            e_n = ru.e_min
        elif e_n > ru.e_gen:
            e_n = ru.e_gen
        consumptions.append(e_n)
        utilities.append(ru_utility(ru, e_n, price))
    total_utility = 0.0
    for u in utilities:
        total_utility += u
    return EquilibriumOutcome(
        price=price,
        offers=tuple(offers),
        sfc_cost=cost,
        surplus_flag=total > scenario.e_req,
        allocation=Allocation(tuple(consumptions)),
        utilities=tuple(utilities),
        social_cost=cost - total_utility,
    )


def compute_se(
    scenario: Scenario, config: SweepConfig | None = None
) -> EquilibriumOutcome:
    """Run the price sweep and package the stable point. Deterministic."""
    best_price, best_cost, _trace = sweep_price(scenario, config)
    offers = tuple(
        quantize(ru.e_gen - best_response(ru, best_price).e_star)
        for ru in scenario.rus
    )
    outcome = complete_outcome(scenario, best_price, offers)
    if outcome.sfc_cost != best_cost:
        # the scalar re-derivation and the sweep kernel must agree bit for bit
        raise RuntimeError(
            "re-derived offers do not reproduce the sweep cost "
            f"({outcome.sfc_cost!r} vs {best_cost!r})"
        )
    return outcome


@dataclass(frozen=True)
class VerificationReport:
    """Worst deviations found when probing an outcome for instability."""

    deviations_per_ru: int
    tolerance: float
    utility_violations: int
    worst_utility_gap: float  # max over samples of U(deviation) - U(stored)
    worst_utility_ru: int | None
    price_violations: int
    worst_price_gap: float  # stored cost - cheapest swept cost

    @property
    def ok(self) -> bool:
        return self.utility_violations == 0 and self.price_violations == 0

    def lines(self) -> list[str]:
        status = "stable" if self.ok else "UNSTABLE"
        return [
            f"verification: {status}",
            f"unit deviations tried per RU: {self.deviations_per_ru}",
            f"utility violations: {self.utility_violations}"
            + (
                f" (worst gap {self.worst_utility_gap:.3e} at RU {self.worst_utility_ru})"
                if self.utility_violations
                else ""
            ),
            f"price violations: {self.price_violations}"
            + (f" (worst gap {self.worst_price_gap:.3e})" if self.price_violations else ""),
        ]


def verify_se(
    outcome: EquilibriumOutcome,
    scenario: Scenario,
    deviations: int = 1000,
    *,
    config: SweepConfig | None = None,
    seed: int = 0,
    tolerance: float = 1e-9,
) -> VerificationReport:
    """Probe an outcome for profitable unilateral deviations.

    For every unit, `deviations` uniformly drawn consumptions must not
    beat the stored utility beyond the tolerance; and no price on the
    sweep grid may undercut the stored cost beyond the tolerance. Raises
    ValueError when the outcome does not belong to this scenario/config.
    """
    validate_scenario(scenario)
    if len(outcome.offers) != scenario.n_rus:
        raise ValueError(
            f"outcome has {len(outcome.offers)} offers for {scenario.n_rus} RUs"
        )
    if outcome.sfc_cost != trade_cost(
        outcome.price, _seq_sum(outcome.offers), scenario.e_req, scenario.grid_sell
    ):
        raise ValueError("outcome cost does not match its own price and offers")

    if outcome.allocation is not None:
        consumptions = outcome.allocation.consumptions
        if len(consumptions) != scenario.n_rus:
            raise ValueError("outcome allocation does not match the scenario")
    else:
        full = complete_outcome(scenario, outcome.price, outcome.offers)
        consumptions = full.allocation.consumptions
    stored_utilities = (
        outcome.utilities
        if outcome.utilities is not None
        else tuple(
            ru_utility(ru, e_n, outcome.price)
            for ru, e_n in zip(scenario.rus, consumptions)
        )
    )
    for ru, e_n, u in zip(scenario.rus, consumptions, stored_utilities):
        if u != ru_utility(ru, e_n, outcome.price):
            raise ValueError("outcome utilities do not match the scenario")

    rng = np.random.default_rng(seed)
    utility_violations = 0
    worst_gap = -np.inf
    worst_ru = None
    for ru, u_star in zip(scenario.rus, stored_utilities):
        draws = rng.uniform(ru.e_min, ru.e_gen, deviations)
        u_dev = ru.k * np.log(1.0 + draws) + outcome.price * (ru.e_gen - draws)
        gap = float(np.max(u_dev) - u_star)
        if gap > worst_gap:
            worst_gap = gap
            worst_ru = ru.ru_id
        utility_violations += int(np.count_nonzero(u_dev > u_star + tolerance))

    lo, hi, step = resolve_sweep(config, scenario.grid_buy, scenario.grid_sell)
    prices = price_grid(lo, hi, step)
    if not np.any(prices == outcome.price):
        raise ValueError(
            f"outcome price {outcome.price} is not on the sweep grid "
            f"[{lo}, {hi}] step {step}"
        )
    _offers, costs = kernels.sweep_offers_costs(
        prices,
        scenario.k_values(),
        scenario.e_min_values(),
        scenario.e_gen_values(),
        scenario.e_req,
        scenario.grid_sell,
    )
    price_gap = float(outcome.sfc_cost - np.min(costs))
    price_violations = int(np.count_nonzero(costs < outcome.sfc_cost - tolerance))

    return VerificationReport(
        deviations_per_ru=deviations,
        tolerance=tolerance,
        utility_violations=utility_violations,
        worst_utility_gap=worst_gap,
        worst_utility_ru=worst_ru,
        price_violations=price_violations,
        worst_price_gap=price_gap,
    )


def _seq_sum(values) -> float:
    total = 0.0
    for v in values:
        total += v
    return total


@dataclass(frozen=True)
class ComparisonRow:
    axis_value: float
    proposed_cost: float
    baseline_cost: float
    reduction_fraction: float  # 1 - proposed/baseline
    se_social_cost: float
    centralized_social_cost: float
    social_gap_abs: float  # SE - centralized (>= 0)
    social_gap_rel: float  # gap / |centralized|


@dataclass(frozen=True)
class ComparisonReport:
    axis: str  # "e_req" or "n_rus"
    rows: tuple[ComparisonRow, ...]


def compare_schemes(
    scenario: Scenario,
    axis: str,
    values,
    config: SweepConfig | None = None,
    generator=None,
) -> ComparisonReport:
    """Score the negotiated scheme along an axis of scenario variants.

    axis "e_req" varies the requirement on the given scenario; axis
    "n_rus" regenerates the unit population per point and needs the
    GenerateSpec the scenario came from. Rows are ordered by axis value.
    """
    values = list(values)
    if not values:
        raise ValueError("axis range must be nonempty")
    rows = []
    for value in sorted(values):
        if axis == "e_req":
            variant = replace(scenario, e_req=float(value))
        elif axis == "n_rus":
            if generator is None:
                raise ValueError(
                    "axis 'n_rus' needs the GenerateSpec the scenario came from"
                )
            from .scenarios import generate_rus

            count = int(value)
            rus = generate_rus(replace(generator, count=count))
            variant = replace(scenario, rus=rus)
        else:
            raise ValueError(f"unknown axis {axis!r} (expected 'e_req' or 'n_rus')")
        validate_scenario(variant)
        outcome = compute_se(variant, config)
        base = baseline_cost(variant)
        _alloc, central_social = centralized_optimum(variant)
        gap = outcome.social_cost - central_social
        rows.append(
            ComparisonRow(
                axis_value=float(value),
                proposed_cost=outcome.sfc_cost,
                baseline_cost=base,
                reduction_fraction=1.0 - outcome.sfc_cost / base,
                se_social_cost=outcome.social_cost,
                centralized_social_cost=central_social,
                social_gap_abs=gap,
                social_gap_rel=gap / abs(central_social)
                if central_social != 0.0
                else float("nan"),
            )
        )
    return ComparisonReport(axis=axis, rows=tuple(rows))
