"""Each unit's consumption decision for an announced price.

The utility k*ln(1+e) + price*(e_gen - e) is strictly concave in e, so
the maximiser over [e_min, e_gen] is the stationary point k/price - 1
projected onto the interval. `best_response` computes that closed form;
`best_response_oracle` checks it the hard way by scanning a fine grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import RuParams, ru_utility

__all__ = [
    "CLAMPED_HIGH",
    "CLAMPED_LOW",
    "INTERIOR",
    "BestResponse",
    "best_response",
    "best_response_oracle",
    "utility_curve",
]

INTERIOR = "interior"
CLAMPED_LOW = "clamped_low"
CLAMPED_HIGH = "clamped_high"


@dataclass(frozen=True)
class BestResponse:
    """A unit's optimal consumption, the offer it implies, and which branch fired."""

    e_star: float
    offer: float
    utility: float
    boundary_flag: str


def best_response(ru: RuParams, price: float) -> BestResponse:
    """Utility-maximising consumption for the announced price.

    Closed form: clamp(k/price - 1, e_min, e_gen). A stationary point
    landing exactly on a bound is labelled interior (the value is the
    same either way; the label must be deterministic).
    """
    if price <= 0.0:
        raise ValueError(f"price must be positive, got {price}")
    e_raw = ru.k / price - 1.0  # keep this expression identical to the sweep kernels
    if e_raw < ru.e_min:
        e_star, flag = ru.e_min, CLAMPED_LOW
    elif e_raw > ru.e_gen:
        e_star, flag = ru.e_gen, CLAMPED_HIGH
    else:
        e_star, flag = e_raw, INTERIOR
    return BestResponse(e_star, ru.e_gen - e_star, ru_utility(ru, e_star, price), flag)


def best_response_oracle(ru: RuParams, price: float, step: float = 1e-5) -> BestResponse:
    """Brute-force grid argmax of the utility on {e_min, e_min+step, ..., e_gen}.

    Exhaustive by construction and independent of the closed form above;
    agreement within one step is what the closed form is tested against.
    """
    if price <= 0.0:
        raise ValueError(f"price must be positive, got {price}")
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    e_star, utility = kernels.utility_grid_argmax(
        ru.k, ru.e_min, ru.e_gen, price, step
    )
    if e_star <= ru.e_min:
        flag = CLAMPED_LOW
    elif e_star >= ru.e_gen:
        flag = CLAMPED_HIGH
    else:
        flag = INTERIOR
    return BestResponse(e_star, ru.e_gen - e_star, utility, flag)


def utility_curve(ru: RuParams, price: float, samples: int = 101) -> np.ndarray:
    """Evenly spaced (consumption, utility) samples across [e_min, e_gen].

    Returns an array of shape (samples, 2) ready for CSV output. The
    sampled maximum moves toward lower consumption as the price rises.
    """
    if price <= 0.0:
        raise ValueError(f"price must be positive, got {price}")
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    e = np.linspace(ru.e_min, ru.e_gen, samples)
    u = ru.k * np.log(1.0 + e) + price * (ru.e_gen - e)
    return np.column_stack((e, u))
