"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines (including the recorded reference gaps) on success. Timing bounds
assume the default (numba) kernel backend; jit compilation is warmed up
outside every timed section.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from sfcmarket import (
    GenerateSpec,
    RuParams,
    Scenario,
    SweepConfig,
    baseline_cost,
    best_response,
    best_response_oracle,
    centralized_optimum,
    compare_schemes,
    compute_se,
    sweep_price,
    verify_se,
)
from sfcmarket import analytic_price, kernels
from sfcmarket.protocol import (
    LeaderView,
    SocketLeaderTransport,
    run_leader,
)
from tests.conftest import random_mixed_scenario, seeded_scenario

# Golden values frozen from the independent fine-sweep oracle (step 1e-3,
# closed-form responses, no wire rounding) run before this package was
# built: price 25.584, cost 1914.2494559099437.
GOLDEN_PRICE = 25.584
GOLDEN_COST = 1914.2
REFERENCE_MEAN_REDUCTION = 0.749  # reported reference, recorded not enforced
REFERENCE_SOCIAL_GAP = 0.0707  # reported reference, recorded not enforced

REPO = Path(__file__).resolve().parent.parent


def report(criterion: int, detail: str) -> None:
    print(f"\ncriterion {criterion}: PASS — {detail}")


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    kernels.warm_up()


@pytest.fixture()
def reference_scenario(five_identical):
    return five_identical


def test_criterion_1_best_response_oracle_equivalence():
    rng = np.random.default_rng(101)
    ks = rng.uniform(1.0, 500.0, 1000)
    prices = rng.uniform(1.0, 100.0, 1000)
    e_gens = rng.uniform(1.0, 20.0, 1000)
    best_response_oracle(RuParams(0, 10.0, 1.0), 5.0, step=1e-5)  # table warm-up
    worst = 0.0
    start = time.perf_counter()
    for k, price, e_gen in zip(ks, prices, e_gens):
        unit = RuParams(0, float(k), float(e_gen))
        closed = best_response(unit, float(price))
        grid = best_response_oracle(unit, float(price), step=1e-5)
        worst = max(worst, abs(closed.e_star - grid.e_star))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-4, f"worst closed-vs-grid gap {worst}"
    assert elapsed < 5.0, f"1000 oracle instances took {elapsed:.2f}s"
    report(1, f"worst gap {worst:.2e} kWh over 1000 instances in {elapsed:.2f}s")


def test_criterion_2_leader_oracle_equivalence():
    rng = np.random.default_rng(20240811)
    worst_price_gap = 0.0
    worst_cost_gap = 0.0
    start = time.perf_counter()
    for _ in range(100):
        scenario = random_mixed_scenario(rng)
        swept_price, swept_cost, _ = sweep_price(scenario, SweepConfig(price_step=1e-3))
        price, cost = analytic_price(scenario)
        worst_price_gap = max(worst_price_gap, abs(swept_price - price))
        worst_cost_gap = max(worst_cost_gap, abs(swept_cost - cost) / abs(cost))
    elapsed = time.perf_counter() - start
    assert worst_price_gap <= 1e-2, f"price gap {worst_price_gap}"
    assert worst_cost_gap <= 1e-3, f"relative cost gap {worst_cost_gap}"
    assert elapsed < 30.0, f"100 scenarios took {elapsed:.2f}s"
    report(
        2,
        f"worst gaps: price {worst_price_gap:.2e}, cost {worst_cost_gap:.2e} rel, "
        f"in {elapsed:.1f}s",
    )


def test_criterion_3_deterministic_pin(reference_scenario):
    outcome = compute_se(reference_scenario, SweepConfig(price_step=1e-3))
    assert outcome.price == pytest.approx(GOLDEN_PRICE, abs=0.01)
    assert outcome.sfc_cost == pytest.approx(GOLDEN_COST, abs=0.5)
    report(3, f"price {outcome.price:.4f} (golden 25.584 ± 0.01), "
              f"cost {outcome.sfc_cost:.4f} (golden 1914.2 ± 0.5)")


def test_criterion_4_convergence_shape(reference_scenario):
    _, _, trace = sweep_price(reference_scenario, SweepConfig(price_step=0.5))
    best = trace.best_costs
    assert np.all(np.diff(best) <= 0.0)
    improvements = np.flatnonzero(np.diff(best) < 0.0) + 1
    plateau_start = int(improvements[-1])
    assert abs(plateau_start - 34) <= 2, f"plateau starts at iteration {plateau_start}"
    assert np.all(best[plateau_start:] == best[-1])
    report(4, f"best cost constant from iteration {plateau_start} (expected 34 ± 2)")


def test_criterion_5_baseline_comparison():
    scenario = seeded_scenario(10, seed=42)
    report_rows = compare_schemes(
        scenario, "e_req", [60.0, 70.0, 80.0, 90.0, 100.0]
    ).rows
    for row in report_rows:
        assert row.proposed_cost < row.baseline_cost, f"no dominance at {row.axis_value}"
    costs = [row.proposed_cost for row in report_rows]
    assert all(b > a for a, b in zip(costs, costs[1:])), "cost not rising with demand"
    mean_reduction = float(np.mean([row.reduction_fraction for row in report_rows]))
    report(
        5,
        f"dominance and monotone growth hold; mean reduction {mean_reduction:.1%} "
        f"(reported reference {REFERENCE_MEAN_REDUCTION:.1%}; RNG draws behind the "
        f"reference are unpublished, so only the orderings are enforced)",
    )


def test_criterion_6_centralized_comparison():
    gen = GenerateSpec(count=5, k_lo=90.0, k_hi=150.0, e_gen=10.0, seed=42)
    scenario = seeded_scenario(5, seed=42)
    rows = compare_schemes(scenario, "n_rus", [5, 10, 15, 20, 25], generator=gen).rows
    for row in rows:
        assert row.centralized_social_cost <= row.se_social_cost + 1e-9
    mean_abs = float(np.mean([row.social_gap_abs for row in rows]))
    mean_rel = float(np.mean([row.social_gap_rel for row in rows]))
    report(
        6,
        f"centralized <= negotiated at every size; mean gap {mean_abs:.1f} "
        f"(relative {mean_rel:.2%}; reported reference {REFERENCE_SOCIAL_GAP:.2%}, "
        f"recorded not enforced)",
    )


def test_criterion_7_se_verification():
    rng = np.random.default_rng(107)
    worst_utility = -np.inf
    worst_price = -np.inf
    for _ in range(50):
        scenario = random_mixed_scenario(rng)
        outcome = compute_se(scenario)
        result = verify_se(outcome, scenario, deviations=1000, seed=int(rng.integers(1 << 31)))
        assert result.ok, f"violations on {scenario}"
        worst_utility = max(worst_utility, result.worst_utility_gap)
        worst_price = max(worst_price, result.worst_price_gap)
    assert worst_utility <= 1e-9
    assert worst_price <= 1e-9
    report(
        7,
        f"0 violations over 50 scenarios x 1000 deviations/unit "
        f"(worst gaps: utility {worst_utility:.1e}, price {worst_price:.1e})",
    )


def _write_session_scenario(tmp_path, step: float) -> Path:
    path = tmp_path / "session.toml"
    path.write_text(
        "[grid]\nsell = 60.0\nbuy = 8.45\n\n"
        "[sfc]\ne_req = 50.0\n\n"
        "[generate]\ncount = 5\nk_lo = 90.0\nk_hi = 150.0\ne_gen = 10.0\nseed = 42\n\n"
        f"[sweep]\nstep = {step}\n"
    )
    return path


def test_criterion_8_distributed_fidelity(tmp_path):
    from sfcmarket import load_scenario

    scenario_file = _write_session_scenario(tmp_path, 0.5)
    scenario, cfg, _ = load_scenario(scenario_file)
    best_price, best_cost, trace = sweep_price(scenario, cfg)
    expected_offers = tuple(trace.offers[np.flatnonzero(trace.prices == best_price)[0]])

    orderings = [
        [0.0, 0.001, 0.002, 0.003, 0.004],
        [0.004, 0.003, 0.002, 0.001, 0.0],
        [0.002, 0.0, 0.004, 0.001, 0.003],
    ]
    for delays in orderings:
        transport = SocketLeaderTransport()
        host, port = transport.address
        agents = [
            subprocess.Popen(
                [
                    sys.executable, "-m", "sfcmarket", "agent",
                    "--scenario", str(scenario_file), "--ru", str(i),
                    "--address", f"{host}:{port}", "--latency", str(delays[i]),
                ],
                stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
            )
            for i in range(5)
        ]
        try:
            outcome = run_leader(
                LeaderView.from_scenario(scenario, cfg), transport, timeout=30.0
            )
        finally:
            transport.close()
            for proc in agents:
                proc.wait(timeout=30.0)
        assert all(proc.returncode == 0 for proc in agents)
        # exact equality, both on the floats and on their serialized form
        assert outcome.price == best_price
        assert outcome.sfc_cost == best_cost
        assert outcome.offers == expected_offers
        assert f"{outcome.price:.6f}" == f"{best_price:.6f}"
        assert f"{outcome.sfc_cost:.6f}" == f"{best_cost:.6f}"
        assert [f"{o:.6f}" for o in outcome.offers] == [f"{o:.6f}" for o in expected_offers]
    report(8, "5-process socket sessions reproduce the in-process sweep exactly "
              "under 3 arrival orderings")


def _run_cli(*args):
    out = subprocess.run(
        [sys.executable, "-m", "sfcmarket", *args], capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    return out.stdout


def _run_session(scenario_file: Path):
    serve = subprocess.Popen(
        [
            sys.executable, "-m", "sfcmarket", "serve",
            "--scenario", str(scenario_file), "--address", "127.0.0.1:0",
            "--timeout", "30",
        ],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    banner = serve.stderr.readline()  # "listening on HOST:PORT"
    address = banner.strip().rsplit(" ", 1)[-1]
    agents = [
        subprocess.Popen(
            [
                sys.executable, "-m", "sfcmarket", "agent",
                "--scenario", str(scenario_file), "--ru", str(i),
                "--address", address,
            ],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        for i in range(5)
    ]
    serve_out, serve_err = serve.communicate(timeout=60)
    agent_out = [proc.communicate(timeout=60)[0] for proc in agents]
    assert serve.returncode == 0, serve_err
    assert all(proc.returncode == 0 for proc in agents)
    return serve_out, agent_out


def test_criterion_9_cli_determinism(tmp_path):
    community = REPO / "scenarios" / "community5.toml"
    commands = [
        ("solve", "--scenario", str(community), "--seed", "11"),
        ("fig2", "--scenario", str(community), "--prices", "15,30,45", "--seed", "11"),
        ("fig3", "--scenario", str(community), "--seed", "11"),
        ("fig4", "--scenario", str(community), "--e-req", "60:80:10", "--seed", "11"),
        ("fig5", "--scenario", str(community), "--n", "5:10:5", "--seed", "11"),
        ("verify", "--scenario", str(community), "--deviations", "300", "--seed", "11"),
    ]
    for args in commands:
        assert _run_cli(*args) == _run_cli(*args), f"nondeterministic: {args[0]}"

    session_file = _write_session_scenario(tmp_path, 10.0)
    first_serve, first_agents = _run_session(session_file)
    second_serve, second_agents = _run_session(session_file)
    assert first_serve == second_serve
    assert first_agents == second_agents
    report(9, "all subcommands (including serve/agent sessions) byte-identical across reruns")
