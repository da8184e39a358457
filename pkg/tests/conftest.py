import numpy as np
import pytest

from sfcmarket import GenerateSpec, RuParams, Scenario, generate_rus


@pytest.fixture
def five_identical() -> Scenario:
    """Five identical k=120 units; the deterministic reference case."""
    return Scenario(
        rus=tuple(RuParams(i, 120.0, 10.0) for i in range(5)),
        e_req=50.0,
        grid_sell=60.0,
        grid_buy=8.45,
    )


@pytest.fixture
def community() -> Scenario:
    """Five seeded units with k ~ U[90, 150]."""
    return seeded_scenario(5, seed=42)


def seeded_scenario(count: int, seed: int = 42, e_req: float = 50.0) -> Scenario:
    rus = generate_rus(GenerateSpec(count=count, k_lo=90.0, k_hi=150.0, e_gen=10.0, seed=seed))
    return Scenario(rus=rus, e_req=e_req, grid_sell=60.0, grid_buy=8.45, seed=seed)


def random_mixed_scenario(rng: np.random.Generator) -> Scenario:
    """A scenario exercising clamped and interior regimes.

    Parameters are short decimals (wire-exact). Rejects populations where
    no unit would sell even at the grid selling price: there the cost
    curve is flat and no unique optimal price exists.
    """
    while True:
        n = int(rng.integers(1, 13))
        buy = round(float(rng.uniform(2, 15)), 2)
        sell = round(float(rng.uniform(40, 90)), 2)
        rus = []
        for i in range(n):
            e_gen = round(float(rng.uniform(2, 20)), 2)
            e_min = round(float(rng.uniform(0, 0.4)) * e_gen, 2)
            k = round(float(rng.uniform(30, 600)), 3)
            rus.append(RuParams(i, k, e_gen, e_min))
        if any(ru.k < sell * (1.0 + ru.e_gen) for ru in rus):
            e_req = round(float(rng.uniform(10, 150)), 1)
            return Scenario(tuple(rus), e_req, sell, buy)
