"""Scenario files and seeded scenario generation.

A scenario file is TOML with four sections:

    [grid]            # required: sell and buy prices (cents/kWh)
    sell = 60.0
    buy = 8.45

    [sfc]             # required: the facility's energy requirement (kWh)
    e_req = 50.0

    [[rus]]           # either an explicit unit list ...
    k = 120.0
    e_gen = 10.0
    e_min = 0.0       # optional, defaults to 0

    [generate]        # ... or a seeded population (exactly one of the two)
    count = 5
    k_lo = 90.0
    k_hi = 150.0
    e_gen = 10.0
    e_min = 0.0
    seed = 42

    [sweep]           # optional price-sweep settings
    step = 0.5
    lo = 8.45
    hi = 60.0

Generation draws preference weights i.i.d. uniform from [k_lo, k_hi]
using numpy's default_rng (PCG64), so a seed pins the population exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .core import RuParams, Scenario, ScenarioError, validate_scenario
from .leader import SweepConfig

__all__ = [
    "GenerateSpec",
    "generate_rus",
    "load_scenario",
    "parse_scenario",
]


@dataclass(frozen=True)
class GenerateSpec:
    """Parameters of a seeded unit population."""

    count: int
    k_lo: float
    k_hi: float
    e_gen: float
    e_min: float = 0.0
    seed: int = 0


def generate_rus(spec: GenerateSpec) -> tuple[RuParams, ...]:
    """Draw a unit population; identical spec means identical population."""
    problems = []
    if spec.count < 1:
        problems.append(f"generate.count: must be at least 1, got {spec.count}")
    if not spec.k_lo <= spec.k_hi:
        problems.append(f"generate.k_lo: bound {spec.k_lo} exceeds k_hi {spec.k_hi}")
    if not spec.k_lo > 0:
        problems.append("generate.k_lo: must be positive")
    if problems:
        raise ScenarioError(problems)
    rng = np.random.default_rng(spec.seed)
    ks = rng.uniform(spec.k_lo, spec.k_hi, spec.count)
    return tuple(
        RuParams(ru_id=i, k=float(ks[i]), e_gen=spec.e_gen, e_min=spec.e_min)
        for i in range(spec.count)
    )


def _get_num(table, key, path, problems, *, required=True):
    if key not in table:
        if required:
            problems.append(f"{path}.{key}: missing")
        return None
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{path}.{key}: expected a number, got {value!r}")
        return None
    return float(value)


def _get_int(table, key, path, problems, *, required=True, default=None):
    if key not in table:
        if required:
            problems.append(f"{path}.{key}: missing")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, int):
        problems.append(f"{path}.{key}: expected an integer, got {value!r}")
        return default
    return value


def parse_scenario(
    doc: dict, *, seed: int | None = None
) -> tuple[Scenario, SweepConfig | None, GenerateSpec | None]:
    """Build a validated Scenario from a parsed TOML document.

    `seed` overrides the generate section's seed (ignored for explicit
    unit lists). Returns the scenario, the optional sweep settings, and
    the GenerateSpec when the population was generated.
    """
    problems: list[str] = []

    grid = doc.get("grid")
    if not isinstance(grid, dict):
        problems.append("grid: missing section")
        grid = {}
    sell = _get_num(grid, "sell", "grid", problems)
    buy = _get_num(grid, "buy", "grid", problems)

    sfc = doc.get("sfc")
    if not isinstance(sfc, dict):
        problems.append("sfc: missing section")
        sfc = {}
    e_req = _get_num(sfc, "e_req", "sfc", problems)

    has_rus = "rus" in doc
    has_generate = "generate" in doc
    if has_rus == has_generate:
        problems.append("rus/generate: exactly one of the two must be present")

    rus: tuple[RuParams, ...] = ()
    gen_spec: GenerateSpec | None = None
    if has_rus and not has_generate:
        raw_rus = doc["rus"]
        if not isinstance(raw_rus, list) or not raw_rus:
            problems.append("rus: expected a nonempty list of unit tables")
        else:
            parsed = []
            for i, entry in enumerate(raw_rus):
                path = f"rus[{i}]"
                if not isinstance(entry, dict):
                    problems.append(f"{path}: expected a table")
                    continue
                k = _get_num(entry, "k", path, problems)
                e_gen = _get_num(entry, "e_gen", path, problems)
                e_min = _get_num(entry, "e_min", path, problems, required=False)
                ru_id = _get_int(entry, "id", path, problems, required=False, default=i)
                if k is not None and e_gen is not None:
                    parsed.append(
                        RuParams(
                            ru_id=ru_id,
                            k=k,
                            e_gen=e_gen,
                            e_min=e_min if e_min is not None else 0.0,
                        )
                    )
            rus = tuple(parsed)
    elif has_generate and not has_rus:
        gen = doc["generate"]
        if not isinstance(gen, dict):
            problems.append("generate: expected a table")
        else:
            count = _get_int(gen, "count", "generate", problems)
            k_lo = _get_num(gen, "k_lo", "generate", problems)
            k_hi = _get_num(gen, "k_hi", "generate", problems)
            e_gen = _get_num(gen, "e_gen", "generate", problems)
            e_min = _get_num(gen, "e_min", "generate", problems, required=False)
            file_seed = _get_int(gen, "seed", "generate", problems, required=False, default=0)
            if not problems:
                gen_spec = GenerateSpec(
                    count=count,
                    k_lo=k_lo,
                    k_hi=k_hi,
                    e_gen=e_gen,
                    e_min=e_min if e_min is not None else 0.0,
                    seed=seed if seed is not None else file_seed,
                )
                rus = generate_rus(gen_spec)

    sweep_cfg: SweepConfig | None = None
    if "sweep" in doc:
        sweep = doc["sweep"]
        if not isinstance(sweep, dict):
            problems.append("sweep: expected a table")
        else:
            step = _get_num(sweep, "step", "sweep", problems, required=False)
            lo = _get_num(sweep, "lo", "sweep", problems, required=False)
            hi = _get_num(sweep, "hi", "sweep", problems, required=False)
            sweep_cfg = SweepConfig(
                price_step=step if step is not None else 0.5,
                price_lo=lo,
                price_hi=hi,
            )

    if problems:
        raise ScenarioError(problems)

    scenario = Scenario(
        rus=rus,
        e_req=e_req,
        grid_sell=sell,
        grid_buy=buy,
        seed=gen_spec.seed if gen_spec is not None else None,
    )
    validate_scenario(scenario)
    return scenario, sweep_cfg, gen_spec


def load_scenario(
    path: str | Path, *, seed: int | None = None
) -> tuple[Scenario, SweepConfig | None, GenerateSpec | None]:
    """Parse and validate a scenario file; see the module docstring for the format."""
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioError([f"{path}: not valid TOML ({exc})"]) from exc
    return parse_scenario(doc, seed=seed)
