"""The facility controller's price decision.

`sweep_price` is the production path: enumerate candidate prices from
the grid buying price up to its selling price, collect every unit's
response at each step, and keep the cheapest (ties go to the later,
higher price). `analytic_price` minimises the same cost over the
continuous price interval and serves as the sweep's oracle.
`centralized_optimum` is the full-information benchmark that minimises
social cost directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (
    Allocation,
    Scenario,
    WIRE_SCALE,
    baseline_cost,
    social_cost,
    trade_cost,
    validate_scenario,
)

__all__ = [
    "SweepConfig",
    "SweepTrace",
    "analytic_price",
    "centralized_optimum",
    "iteration_count",
    "price_grid",
    "resolve_sweep",
    "sweep_price",
    "unclamped_optimum_price",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
GOLDEN_TOL = 1e-6  # cents/kWh; far below any physical price resolution


@dataclass(frozen=True)
class SweepConfig:
    """Price enumeration settings; lo/hi default to the scenario's grid prices."""

    price_step: float = 0.5
    price_lo: float | None = None
    price_hi: float | None = None


def resolve_sweep(
    config: SweepConfig | None, grid_buy: float, grid_sell: float
) -> tuple[float, float, float]:
    """Fill config defaults from the grid prices and validate the result."""
    cfg = config if config is not None else SweepConfig()
    lo = cfg.price_lo if cfg.price_lo is not None else grid_buy
    hi = cfg.price_hi if cfg.price_hi is not None else grid_sell
    step = cfg.price_step
    problems = []
    if not (math.isfinite(step) and step > 0.0):
        problems.append(f"price_step must be positive, got {step}")
    if lo > hi:
        problems.append(f"price_lo {lo} exceeds price_hi {hi}")
    if lo < grid_buy:
        problems.append(f"price_lo {lo} below grid buying price {grid_buy}")
    if hi > grid_sell:
        problems.append(f"price_hi {hi} above grid selling price {grid_sell}")
    if hi > lo and step > hi - lo:
        problems.append(f"price_step {step} exceeds the price range {hi - lo}")
    if problems:
        raise ValueError("invalid sweep config: " + "; ".join(problems))
    return lo, hi, step


def iteration_count(lo: float, hi: float, step: float) -> int:
    # Epsilon guard: decimal inputs whose range divides evenly must not
    # lose the final grid point to binary rounding.
    return int(math.floor((hi - lo) / step + 1e-9)) + 1


def price_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Candidate prices lo, lo+step, ..., quantized to wire resolution."""
    n = iteration_count(lo, hi, step)
    grid = lo + step * np.arange(n, dtype=np.float64)
    return np.rint(grid * WIRE_SCALE) / WIRE_SCALE


@dataclass
class SweepTrace:
    """Per-iteration record of a price sweep (arrays all share length)."""

    prices: np.ndarray
    offers: np.ndarray  # shape (iterations, n_rus), wire resolution
    costs: np.ndarray
    best_prices: np.ndarray
    best_costs: np.ndarray

    def __len__(self) -> int:
        return int(self.prices.shape[0])


def sweep_price(
    scenario: Scenario, config: SweepConfig | None = None
) -> tuple[float, float, SweepTrace]:
    """Enumerate prices, keep the cost-minimising incumbent, return the full trace.

    The incumbent starts at (price 0, all-grid baseline cost) and is
    replaced whenever an iteration's cost is <= the incumbent cost, so
    among equal-cost prices the last (highest) one wins.
    """
    validate_scenario(scenario)
    lo, hi, step = resolve_sweep(config, scenario.grid_buy, scenario.grid_sell)
    prices = price_grid(lo, hi, step)
    offers, costs = kernels.sweep_offers_costs(
        prices,
        scenario.k_values(),
        scenario.e_min_values(),
        scenario.e_gen_values(),
        scenario.e_req,
        scenario.grid_sell,
    )
    baseline = baseline_cost(scenario)
    n = len(prices)
    # Vectorised incumbent scan, equivalent to the sequential <= update:
    # an iteration fires iff its cost is <= the best cost seen before it.
    running_min = np.minimum.accumulate(costs)
    best_before = np.empty(n)
    best_before[0] = baseline
    best_before[1:] = running_min[:-1]
    fired = costs <= best_before  # fired[0] always holds: costs never exceed baseline
    last_fired = np.maximum.accumulate(np.where(fired, np.arange(n), -1))
    best_prices = prices[last_fired]
    best_costs = np.minimum(running_min, baseline)
    trace = SweepTrace(prices, offers, costs, best_prices, best_costs)
    return float(best_prices[-1]), float(best_costs[-1]), trace


def _cost_of_price(scenario: Scenario):
    """Continuous cost-of-price function with substituted unit responses.

    Full precision (no wire rounding): this is the continuum oracle the
    discrete sweep is compared against.
    """
    k = scenario.k_values()
    e_min = scenario.e_min_values()
    e_gen = scenario.e_gen_values()

    def cost(price: float) -> float:
        e = np.clip(k / price - 1.0, e_min, e_gen)
        total = float(np.sum(e_gen - e))
        return trade_cost(price, total, scenario.e_req, scenario.grid_sell)

    return cost


def _golden_min(f, a: float, b: float, tol: float = GOLDEN_TOL) -> float:
    """Golden-section argmin of a unimodal f on [a, b]."""
    while b - a > tol:
        span = (b - a) * _INV_PHI
        c = b - span
        d = a + span
        if f(c) <= f(d):
            b = d
        else:
            a = c
    return 0.5 * (a + b)


def analytic_price(scenario: Scenario) -> tuple[float, float]:
    """Minimise the facility's cost over the continuous price interval.

    The cost is piecewise smooth in the price: each unit's response
    switches branch at k/(1+e_gen) and k/(1+e_min), and the cost can dip
    again after such a switch, so a single golden-section pass over the
    whole interval is not safe. Instead the interval is cut at every
    switch point, each convex piece is minimised by golden section, and
    the best candidate wins (ties go to the lowest price, which also
    settles the degenerate scenario where no unit ever sells).
    """
    validate_scenario(scenario)
    lo, hi = scenario.grid_buy, scenario.grid_sell
    cost = _cost_of_price(scenario)

    cut_set = {lo, hi}
    for ru in scenario.rus:
        for bound in (ru.e_gen, ru.e_min):
            p_switch = ru.k / (1.0 + bound)
            if lo < p_switch < hi:
                cut_set.add(p_switch)
    cuts = sorted(cut_set)

    candidates = [(p, cost(p)) for p in cuts]
    for a, b in zip(cuts, cuts[1:]):
        if b - a > GOLDEN_TOL:
            p_mid = _golden_min(cost, a, b)
            candidates.append((p_mid, cost(p_mid)))

    best_p, best_c = candidates[0]
    for p, c in sorted(candidates):
        if c < best_c:
            best_p, best_c = p, c
    return best_p, best_c


def unclamped_optimum_price(scenario: Scenario) -> float:
    """Closed-form optimal price assuming every unit responds interior.

    sqrt(grid_sell * sum(k) / sum(e_gen + 1)); valid only when no unit
    clamps anywhere in the price range. Kept as a cross-check for tests,
    not used by the production path.
    """
    validate_scenario(scenario)
    total_k = float(np.sum(scenario.k_values()))
    total_cap = float(np.sum(scenario.e_gen_values() + 1.0))
    return math.sqrt(scenario.grid_sell * total_k / total_cap)


def centralized_optimum(scenario: Scenario) -> tuple[Allocation, float]:
    """Full-information allocation minimising social cost, and that cost.

    Price transfers cancel out of social cost, so the problem separates
    per unit: consume clamp(k/grid_sell - 1, e_min, e_gen).
    """
    validate_scenario(scenario)
    consumptions = []
    for ru in scenario.rus:
        e = ru.k / scenario.grid_sell - 1.0
        if e < ru.e_min:
            e = ru.e_min
        elif e > ru.e_gen:
            e = ru.e_gen
        consumptions.append(e)
    alloc = Allocation(tuple(consumptions))
    return alloc, social_cost(scenario, alloc, scenario.grid_sell)
