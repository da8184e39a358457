"""Benchmark the numba kernels against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py [--oracle-calls N] [--sweep-calls N]

Times the two hot paths (utility grid scans at oracle resolution, and
full price sweeps) under both backends, independent of whatever
SFCMARKET_BACKEND selected for the process.
"""

import argparse
import time

import numpy as np

from sfcmarket import kernels


def _grid_bound(e_gen, step):
    return int(np.floor(e_gen / step + 1e-9))


def bench_oracle(name, grid_argmax, ks, prices, e_gens, step):
    # shared log tables, same as the production wrapper
    start = time.perf_counter()
    for k, p, eg in zip(ks, prices, e_gens):
        m = _grid_bound(eg, step)
        logs = kernels._log_table(0.0, step, m)
        grid_argmax(logs, k, 0.0, eg, p, step, m)
    elapsed = time.perf_counter() - start
    print(f"  {name:6s} {len(ks):5d} grid scans @ step {step:g}: {elapsed:8.3f} s")
    return elapsed


def bench_sweep(name, sweep, prices, k, e_min, e_gen, calls):
    start = time.perf_counter()
    for _ in range(calls):
        sweep(prices, k, e_min, e_gen, 50.0, 60.0)
    elapsed = time.perf_counter() - start
    per = elapsed / calls * 1e3
    print(f"  {name:6s} {calls:5d} sweeps of {prices.shape[0]}x{k.shape[0]}: "
          f"{elapsed:8.3f} s ({per:6.2f} ms/sweep)")
    return elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--oracle-calls", type=int, default=200)
    parser.add_argument("--sweep-calls", type=int, default=50)
    parser.add_argument("--oracle-step", type=float, default=1e-5)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {', '.join(backends)}")

    rng = np.random.default_rng(7)
    ks = rng.uniform(1.0, 500.0, args.oracle_calls)
    ps = rng.uniform(1.0, 100.0, args.oracle_calls)
    egs = rng.uniform(1.0, 20.0, args.oracle_calls)

    sweep_prices = np.rint((8.45 + 0.001 * np.arange(51551)) * 1e6) / 1e6
    k10 = rng.uniform(90.0, 150.0, 10)
    em10 = np.zeros(10)
    eg10 = np.full(10, 10.0)

    results = {}
    print("\nutility grid scans (brute-force responses)")
    for backend in backends:
        grid_argmax, sweep = kernels.get_kernels(backend)
        if backend == "numba":  # compile outside the timed section
            m = _grid_bound(1.0, 0.25)
            grid_argmax(kernels._log_table(0.0, 0.25, m), 10.0, 0.0, 1.0, 5.0, 0.25, m)
        results[backend, "oracle"] = bench_oracle(
            backend, grid_argmax, ks, ps, egs, args.oracle_step
        )

    print("\nprice sweeps (full cost curves)")
    for backend in backends:
        grid_argmax, sweep = kernels.get_kernels(backend)
        if backend == "numba":
            sweep(sweep_prices[:4], k10, em10, eg10, 50.0, 60.0)
        results[backend, "sweep"] = bench_sweep(
            backend, sweep, sweep_prices, k10, em10, eg10, args.sweep_calls
        )

    if "numba" in backends:
        print("\nspeedups (numpy time / numba time)")
        for what in ("oracle", "sweep"):
            ratio = results["numpy", what] / results["numba", what]
            print(f"  {what}: {ratio:.2f}x")


if __name__ == "__main__":
    main()
