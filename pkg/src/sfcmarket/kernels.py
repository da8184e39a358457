"""Hot numeric kernels: utility grid scans and bulk price sweeps.

Two interchangeable implementations live here: numba-jitted loops (the
default) and a pure-numpy path. Selection happens once at import time
via the ``SFCMARKET_BACKEND`` environment variable (``"numba"`` or
``"numpy"``); when numba is not importable the numpy path is used with a
warning. ``benchmarks/bench_kernels.py`` times both.

Bit contract: the sweep kernels use only +, -, *, / and rint, with a
fixed left-to-right reduction over RUs, so both backends produce
bit-identical offers and costs. The session leader in protocol.py
recomputes costs from wire messages with the same expression and relies
on that identity. The grid-scan kernels use log and may differ between
backends in the last ulp, which only ever moves an argmax between
exactly tying neighbours.
"""

from __future__ import annotations

import math
import os
import warnings

import numpy as np

from .core import WIRE_SCALE

__all__ = [
    "BACKEND",
    "available_backends",
    "get_kernels",
    "sweep_offers_costs",
    "utility_grid_argmax",
    "warm_up",
]


def _grid_bound(e_min: float, e_gen: float, step: float) -> int:
    # Epsilon guard so decimal-valued ranges that divide evenly are not
    # truncated by binary rounding (e.g. (60 - 8.45) / 0.001).
    return int(math.floor((e_gen - e_min) / step + 1e-9))


# Cache of log(1 + e_min + i*step) tables keyed by (e_min, step). Grid
# points for a given key form a prefix chain, so tables only ever grow
# (geometrically, to keep rebuilds rare). numpy's SIMD log builds them
# far faster than scalar libm evaluates points.
_LOG_TABLES: dict[tuple[float, float], np.ndarray] = {}
_RAMP = np.arange(1 << 14, dtype=np.float64)  # 0, 1, 2, ... scratch for numpy scans
_MAX_GRID = 1 << 27  # ~1 GiB of table; finer grids are almost certainly a typo


def _ramp(n: int) -> np.ndarray:
    global _RAMP
    if _RAMP.shape[0] < n:
        _RAMP = np.arange(max(n, 2 * _RAMP.shape[0]), dtype=np.float64)
    return _RAMP[:n]


def _log_table(e_min: float, step: float, m: int) -> np.ndarray:
    key = (e_min, step)
    table = _LOG_TABLES.get(key)
    if table is None or table.shape[0] < m + 1:
        old = 0 if table is None else table.shape[0]
        n = max(m + 1, 2 * old, 1 << 14)
        # in place, and bit-identical to log(1.0 + (e_min + i*step))
        table = np.arange(n, dtype=np.float64)
        table *= step
        table += e_min
        table += 1.0
        np.log(table, out=table)
        _LOG_TABLES[key] = table
    return table


# ---------------------------------------------------------------------------
# pure-numpy implementations


def _grid_argmax_numpy(logs, k, e_min, e_gen, price, step, m):
    # Scan the affine-transformed utility k*L_i - (price*step)*i + const;
    # same argmax as the canonical form up to float ties, fewer passes.
    u = logs[: m + 1] * k
    scaled = _ramp(m + 1) * (price * step)
    u -= scaled
    j = int(np.argmax(u))  # ties keep the lowest index, like the scan loop
    e_star = e_min + j * step
    best_u = k * float(logs[j]) + price * (e_gen - e_star)
    u_top = k * float(np.log(1.0 + e_gen))  # revenue term is exactly zero at e_gen
    if u_top > best_u:
        return float(e_gen), u_top
    return float(e_star), best_u


def _sweep_numpy(prices, k, e_min, e_gen, e_req, grid_sell):
    n_prices = prices.shape[0]
    n_rus = k.shape[0]
    offers = np.empty((n_prices, n_rus))
    total = np.zeros(n_prices)
    for j in range(n_rus):
        e = np.clip(k[j] / prices - 1.0, e_min[j], e_gen[j])
        off = np.rint((e_gen[j] - e) * WIRE_SCALE) / WIRE_SCALE
        offers[:, j] = off
        total += off  # accumulate in RU order: same adds as the jit loop
    costs = prices * total + (e_req - total) * grid_sell
    return offers, costs


# ---------------------------------------------------------------------------
# numba implementations (built lazily so the numpy path never imports numba)


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def _grid_argmax_nb(logs, k, e_min, e_gen, price, step, m):
        best_u = -np.inf
        best_i = 0
        for i in range(m + 1):
            e = e_min + i * step
            u = k * logs[i] + price * (e_gen - e)
            if u > best_u:
                best_u = u
                best_i = i
        e_star = e_min + best_i * step
        u_top = k * np.log(1.0 + e_gen)
        if u_top > best_u:
            return e_gen, u_top
        return e_star, best_u

    @njit(cache=True)
    def _sweep_nb(prices, k, e_min, e_gen, e_req, grid_sell):
        n_prices = prices.shape[0]
        n_rus = k.shape[0]
        offers = np.empty((n_prices, n_rus))
        costs = np.empty(n_prices)
        for i in range(n_prices):
            p = prices[i]
            total = 0.0
            for j in range(n_rus):
                e = k[j] / p - 1.0
                if e < e_min[j]:
                    e = e_min[j]
                elif e > e_gen[j]:
                    e = e_gen[j]
                off = np.rint((e_gen[j] - e) * WIRE_SCALE) / WIRE_SCALE
                offers[i, j] = off
                total += off
            costs[i] = p * total + (e_req - total) * grid_sell
        return offers, costs

    return _grid_argmax_nb, _sweep_nb


# ---------------------------------------------------------------------------
# backend selection

_requested = os.environ.get("SFCMARKET_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"SFCMARKET_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

_numba_kernels = None
if _requested != "numpy":
    try:
        _numba_kernels = _build_numba_kernels()
    except ImportError:
        if _requested == "numba":
            raise
        warnings.warn("numba is not importable; using pure-numpy kernels")

if _numba_kernels is not None:
    BACKEND = "numba"
    _grid_argmax_active, _sweep_active = _numba_kernels
else:
    BACKEND = "numpy"
    _grid_argmax_active, _sweep_active = _grid_argmax_numpy, _sweep_numpy


def available_backends() -> tuple[str, ...]:
    try:
        import numba  # noqa: F401

        return ("numba", "numpy")
    except ImportError:
        return ("numpy",)


def get_kernels(backend: str):
    """Return (grid_argmax, sweep) raw kernels for an explicit backend.

    Used by the benchmark and the backend-equivalence tests; normal code
    goes through the module-level wrappers.
    """
    if backend == "numpy":
        return _grid_argmax_numpy, _sweep_numpy
    if backend == "numba":
        return _build_numba_kernels()
    raise ValueError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# public wrappers


def utility_grid_argmax(
    k: float, e_min: float, e_gen: float, price: float, step: float
) -> tuple[float, float]:
    """Exhaustive utility maximisation over the grid {e_min, e_min+step, ..., e_gen}.

    Returns (consumption, utility) at the grid argmax; ties keep the
    lowest grid point. The top endpoint e_gen is always evaluated even
    when the step does not divide the range.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    m = _grid_bound(e_min, e_gen, step)
    if m + 1 > _MAX_GRID:
        raise ValueError(
            f"grid of {m + 1} points exceeds the {_MAX_GRID} limit; increase step"
        )
    logs = _log_table(e_min, step, m)
    e_star, u = _grid_argmax_active(
        logs, float(k), float(e_min), float(e_gen), float(price), float(step), m
    )
    return float(e_star), float(u)


def sweep_offers_costs(prices, k, e_min, e_gen, e_req: float, grid_sell: float):
    """Wire-resolution offers and facility costs for every price in `prices`.

    Offers follow each RU's clamped closed-form response and are rounded
    to wire resolution before summation, exactly as a live session would
    receive them. Returns (offers[n_prices, n_rus], costs[n_prices]).
    """
    prices = np.ascontiguousarray(prices, dtype=np.float64)
    k = np.ascontiguousarray(k, dtype=np.float64)
    e_min = np.ascontiguousarray(e_min, dtype=np.float64)
    e_gen = np.ascontiguousarray(e_gen, dtype=np.float64)
    return _sweep_active(prices, k, e_min, e_gen, float(e_req), float(grid_sell))


def warm_up() -> None:
    """Trigger jit compilation ahead of any timed section (no-op on numpy)."""
    utility_grid_argmax(10.0, 0.0, 1.0, 5.0, 0.25)
    sweep_offers_costs(
        np.array([10.0, 20.0]), np.array([100.0]), np.array([0.0]),
        np.array([10.0]), 50.0, 60.0,
    )
