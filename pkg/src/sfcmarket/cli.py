"""Command line entry point.

Subcommands: solve, fig2, fig3, fig4, fig5, verify, serve, agent. Every
command is deterministic given its file, seed, and flags; experiment
outputs are CSV (comma-separated, 6-decimal numbers, LF line endings).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace

from .core import ScenarioError, baseline_cost
from .equilibrium import compare_schemes, complete_outcome, compute_se, verify_se
from .follower import utility_curve
from .leader import SweepConfig, sweep_price
from .protocol import (
    LeaderView,
    ProtocolError,
    SocketFollowerTransport,
    SocketLeaderTransport,
    SweepRecorder,
    run_follower,
    run_leader,
)
from .scenarios import load_scenario

__all__ = ["main"]


def _f(x: float) -> str:
    return f"{x:.6f}"


def _write_csv(out_path: str | None, header: list[str], rows) -> None:
    if out_path is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)


def _sweep_config(file_cfg: SweepConfig | None, step: float | None) -> SweepConfig | None:
    if step is None:
        return file_cfg
    if file_cfg is None:
        return SweepConfig(price_step=step)
    return replace(file_cfg, price_step=step)


def _parse_range(text: str, what: str) -> list[float]:
    """"LO:HI:STEP" -> inclusive arithmetic range; a single value is a one-point range."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            lo, hi, step = (float(p) for p in parts)
        else:
            raise ValueError
    except ValueError:
        raise ScenarioError([f"{what}: expected LO:HI:STEP or a single value, got {text!r}"])
    if step <= 0 or hi < lo:
        raise ScenarioError([f"{what}: empty or descending range {text!r}"])
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def _parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise ScenarioError([f"address: expected HOST:PORT, got {text!r}"])
    return host, int(port)


def _render_outcome(outcome, base: float) -> str:
    lines = [
        f"price: {_f(outcome.price)} cents/kWh",
        f"sfc cost: {_f(outcome.sfc_cost)}",
        f"baseline cost: {_f(base)}",
        f"social cost: {_f(outcome.social_cost)}",
        f"surplus: {'yes' if outcome.surplus_flag else 'no'}",
        "ru,consumption,offer,utility",
    ]
    for ru_id in range(len(outcome.offers)):
        lines.append(
            f"{ru_id},{_f(outcome.allocation.consumptions[ru_id])},"
            f"{_f(outcome.offers[ru_id])},{_f(outcome.utilities[ru_id])}"
        )
    return "\n".join(lines)


def cmd_solve(args) -> int:
    scenario, file_cfg, _gen = load_scenario(args.scenario, seed=args.seed)
    cfg = _sweep_config(file_cfg, args.step)
    outcome = compute_se(scenario, cfg)
    if args.trace:
        _best_p, _best_c, trace = sweep_price(scenario, cfg)
        rows = [
            [i, _f(trace.prices[i]), _f(trace.costs[i]),
             _f(trace.best_prices[i]), _f(trace.best_costs[i])]
            for i in range(len(trace))
        ]
        _write_csv(args.trace, ["iteration", "price", "cost", "best_price", "best_cost"], rows)
    print(_render_outcome(outcome, baseline_cost(scenario)))
    if args.out:
        rows = [
            [_f(outcome.price), _f(outcome.sfc_cost), _f(outcome.social_cost),
             int(outcome.surplus_flag), ru_id,
             _f(outcome.allocation.consumptions[ru_id]),
             _f(outcome.offers[ru_id]), _f(outcome.utilities[ru_id])]
            for ru_id in range(len(outcome.offers))
        ]
        _write_csv(
            args.out,
            ["price", "sfc_cost", "social_cost", "surplus", "ru_id",
             "consumption", "offer", "utility"],
            rows,
        )
    return 0


def cmd_fig2(args) -> int:
    scenario, _cfg, _gen = load_scenario(args.scenario, seed=args.seed)
    if not 0 <= args.ru < scenario.n_rus:
        raise ScenarioError([f"ru: index {args.ru} out of range for {scenario.n_rus} units"])
    ru = scenario.rus[args.ru]
    prices = [float(p) for p in args.prices.split(",") if p]
    rows = []
    for price in prices:
        for e_n, utility in utility_curve(ru, price, args.samples):
            rows.append([_f(price), _f(e_n), _f(utility)])
    _write_csv(args.out, ["price", "e_n", "utility"], rows)
    return 0


def cmd_fig3(args) -> int:
    scenario, file_cfg, _gen = load_scenario(args.scenario, seed=args.seed)
    cfg = _sweep_config(file_cfg, args.step)
    _best_p, _best_c, trace = sweep_price(scenario, cfg)
    rows = [
        [i, _f(trace.prices[i]), _f(trace.costs[i]), _f(trace.best_costs[i])]
        for i in range(len(trace))
    ]
    _write_csv(args.out, ["iteration", "price", "cost", "best_cost"], rows)
    return 0


def cmd_fig4(args) -> int:
    scenario, file_cfg, _gen = load_scenario(args.scenario, seed=args.seed)
    cfg = _sweep_config(file_cfg, args.step)
    report = compare_schemes(scenario, "e_req", _parse_range(args.e_req, "e-req"), cfg)
    rows = [
        [_f(r.axis_value), _f(r.proposed_cost), _f(r.baseline_cost), _f(r.reduction_fraction)]
        for r in report.rows
    ]
    _write_csv(args.out, ["e_req", "proposed_cost", "baseline_cost", "reduction_fraction"], rows)
    return 0


def cmd_fig5(args) -> int:
    scenario, file_cfg, gen = load_scenario(args.scenario, seed=args.seed)
    if gen is None:
        raise ScenarioError(
            ["generate: the unit-count axis needs a scenario file with a [generate] section"]
        )
    cfg = _sweep_config(file_cfg, args.step)
    counts = [int(v) for v in _parse_range(args.n, "n")]
    report = compare_schemes(scenario, "n_rus", counts, cfg, generator=gen)
    rows = [
        [int(r.axis_value), _f(r.se_social_cost), _f(r.centralized_social_cost),
         _f(r.social_gap_rel), _f(r.social_gap_abs)]
        for r in report.rows
    ]
    _write_csv(
        args.out,
        ["n_rus", "se_social_cost", "centralized_social_cost", "relative_gap", "absolute_gap"],
        rows,
    )
    return 0


def cmd_verify(args) -> int:
    scenario, file_cfg, _gen = load_scenario(args.scenario, seed=args.seed)
    cfg = _sweep_config(file_cfg, args.step)
    outcome = compute_se(scenario, cfg)
    report = verify_se(
        outcome, scenario, args.deviations, config=cfg, seed=args.verify_seed
    )
    print(f"price: {_f(outcome.price)} cents/kWh")
    print(f"sfc cost: {_f(outcome.sfc_cost)}")
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def cmd_serve(args) -> int:
    scenario, file_cfg, _gen = load_scenario(args.scenario, seed=args.seed)
    cfg = _sweep_config(file_cfg, args.step)
    host, port = _parse_address(args.address)
    transport = SocketLeaderTransport(host, port)
    print(f"listening on {transport.address[0]}:{transport.address[1]}", file=sys.stderr)
    recorder = SweepRecorder() if args.trace else None
    try:
        view = LeaderView.from_scenario(scenario, cfg)
        market = run_leader(view, transport, timeout=args.timeout, recorder=recorder)
    finally:
        transport.close()
    outcome = complete_outcome(scenario, market.price, market.offers)
    if recorder is not None:
        trace = recorder.trace()
        rows = [
            [i, _f(trace.prices[i]), _f(trace.costs[i]),
             _f(trace.best_prices[i]), _f(trace.best_costs[i])]
            for i in range(len(trace))
        ]
        _write_csv(args.trace, ["iteration", "price", "cost", "best_price", "best_cost"], rows)
    print(_render_outcome(outcome, baseline_cost(scenario)))
    return 0


def cmd_agent(args) -> int:
    scenario, _cfg, _gen = load_scenario(args.scenario, seed=args.seed)
    if not 0 <= args.ru < scenario.n_rus:
        raise ScenarioError([f"ru: index {args.ru} out of range for {scenario.n_rus} units"])
    ru = scenario.rus[args.ru]
    host, port = _parse_address(args.address)
    transport = SocketFollowerTransport(host, port, send_delay=args.latency)
    try:
        log = run_follower(ru, transport, timeout=args.timeout)
    finally:
        transport.close()
    for round_index, price, offer in log.rounds:
        print(f"round {round_index}: price {_f(price)} -> offer {_f(offer)}")
    if log.aborted is not None:
        print(f"aborted: {log.aborted}")
        return 1
    print(f"settled: price {_f(log.final_price)} cost {_f(log.final_cost)}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfcmarket",
        description="Energy-trading equilibrium between a shared facility and "
        "residential units: solver, experiments, and distributed sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario TOML file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the generate section's seed")
        p.add_argument("--step", type=float, default=None,
                       help="override the price sweep step (cents/kWh)")
        p.add_argument("--out", default=None, help="CSV output path (default: stdout)")

    p = sub.add_parser("solve", help="compute the negotiated price and allocation")
    add_common(p)
    p.add_argument("--trace", default=None, help="also write the per-iteration sweep CSV here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("fig2", help="utility-vs-consumption curves for one unit (CSV)")
    add_common(p)
    p.add_argument("--ru", type=int, default=0, help="unit index within the scenario")
    p.add_argument("--prices", default="10,20,30,40,50,60",
                   help="comma-separated offered prices")
    p.add_argument("--samples", type=int, default=101, help="points per curve")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("fig3", help="sweep convergence trace (CSV)")
    add_common(p)
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("fig4", help="negotiated vs all-grid cost across requirements (CSV)")
    add_common(p)
    p.add_argument("--e-req", dest="e_req", default="60:100:10",
                   help="requirement range LO:HI:STEP (kWh)")
    p.set_defaults(func=cmd_fig4)

    p = sub.add_parser("fig5", help="social cost vs the centralized benchmark across unit counts (CSV)")
    add_common(p)
    p.add_argument("--n", default="5:25:5", help="unit count range LO:HI:STEP")
    p.set_defaults(func=cmd_fig5)

    p = sub.add_parser("verify", help="probe the computed outcome for profitable deviations")
    add_common(p)
    p.add_argument("--deviations", type=int, default=1000,
                   help="random consumption deviations per unit")
    p.add_argument("--verify-seed", type=int, default=0, help="deviation sampling seed")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("serve", help="host a negotiation session for remote agents")
    add_common(p)
    p.add_argument("--address", default="127.0.0.1:0",
                   help="bind address HOST:PORT (port 0 picks a free one)")
    p.add_argument("--timeout", type=float, default=5.0,
                   help="per-round response timeout (seconds)")
    p.add_argument("--trace", default=None, help="write the per-round sweep CSV here")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("agent", help="run one unit against a session leader")
    add_common(p)
    p.add_argument("--ru", type=int, required=True, help="unit index within the scenario")
    p.add_argument("--address", required=True, help="leader address HOST:PORT")
    p.add_argument("--latency", type=float, default=0.0,
                   help="simulated link delay before each offer (seconds)")
    p.add_argument("--timeout", type=float, default=60.0,
                   help="receive timeout (seconds)")
    p.set_defaults(func=cmd_agent)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for violation in exc.violations:
            print(f"error: {violation}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
