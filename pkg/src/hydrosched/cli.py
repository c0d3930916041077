"""Command line entry point.

Exit codes: 0 success, 1 check failed (oracle gap above tolerance),
2 bad configuration, 3 infeasible model. Diagnostics go to stderr as one
JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, bundled_config_path, load_config
from .export import export_results
from .oracle import MAX_HOURS, enumerate_activation_tree, solve_extensive_trader
from .planner import PlannerInfeasible, assemble_planner_saa, solve_planner, stats_row, write_stats_csv
from .simulator import STRATEGIES, _planner_scenarios, draw_truth, run_baselines
from .stochastic import BidCoefficients, expected_bid_coefficients
from .trader import TraderInput, solve_reduced_collective, solve_reduced_individual

EXIT_CHECK, EXIT_CONFIG, EXIT_INFEASIBLE = 1, 2, 3
ORACLE_TOL = 1e-6


def _diag(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def _load(path: str | None, default: str) -> tuple[RunConfig, Path]:
    p = Path(path) if path else bundled_config_path(default)
    return load_config(p), p


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _trader_input(cfg: RunConfig, day: int, seed: int, hours: int | None, target: str | None) -> TraderInput:
    """Day ``day`` of the seed's sampled scenario, optionally cut to its first hours."""
    H = cfg.hours_per_day
    sim = replace(cfg.simulation, n_days=max(cfg.simulation.n_days, day + 1))
    truth = draw_truth(sim, cfg.cascade, cfg.models, seed)
    n = H if hours is None else hours
    h0 = day * H
    coefs = expected_bid_coefficients(cfg.models.prices, cfg.models.activations,
                                      truth.spot[h0:h0 + H], h0, H, sim.start_weekday)
    coefs = BidCoefficients(*(np.asarray(a)[:n] for a in
                              (coefs.spot, coefs.up, coefs.down, coefs.rho_up, coefs.rho_down)))
    c = cfg.cascade
    K = c.n_reservoirs - 1
    if target is None:
        tgt = c.bounds(h0 + n - 1, 1)[0][0].copy()
    else:
        vals = _floats(target)
        if len(vals) != K:
            raise ConfigError([("--target", f"expected {K} values (non-sink reservoirs), got {len(vals)}")])
        tgt = np.append(vals, 0.0)
    return TraderInput.for_day(c, cfg.ratings, h0, coefs, truth.inflows[h0:h0 + n], target=tgt)


def cmd_validate(args) -> int:
    cfg, path = _load(args.config, "gasteiner")
    c, r = cfg.cascade, cfg.ratings
    print(f"OK {path}")
    print(f"sha256 {cfg.digest()}")
    lo, hi = c.bounds(0, 1)
    for i, name in enumerate(c.reservoirs):
        kind = "sink" if i == c.sink else "reservoir"
        print(f"{kind} {name}: initial {c.initial_levels[i]:.0f} m3, band [{lo[0, i]:.0f}, {hi[0, i]:.0f}] m3")
    gc, pc, ge, pe = (np.atleast_2d(np.asarray(x, float))[0] for x in
                      (r.gen_cap, r.pump_cap, r.gen_eff, r.inv_pump_eff))
    for j, (a, b) in enumerate(c.arcs):
        print(f"arc {c.arc_names[j]} {a}->{b}: "
              f"gen {gc[j]:.0f} m3/h at {ge[j]:.3g} MWh/m3, pump {pc[j]:.0f} m3/h at {pe[j]:.3g} MWh/m3")
    return 0


def cmd_trade(args) -> int:
    cfg, _ = _load(args.config, "gasteiner")
    inp = _trader_input(cfg, args.day, args.seed, None, args.target)
    solver = solve_reduced_individual if args.mode == "individual" else solve_reduced_collective
    sol = solver(inp)
    if not sol.feasible:
        _diag("infeasible", "infeasible target", day=args.day,
              target=[float(x) for x in inp.target[:-1]])
        return EXIT_INFEASIBLE
    print(f"mode {args.mode} day {args.day} seed {args.seed}")
    print(f"expected revenue {sol.objective / 1e3:.3f} kEUR")
    s, u, v = (np.asarray(x).reshape(inp.hours, -1).sum(axis=1) for x in (sol.s, sol.u, sol.v))
    print("hour,spot_mwh,up_mwh,down_mwh")
    for t in range(inp.hours):
        print(f"{t},{s[t]:.6f},{u[t]:.6f},{v[t]:.6f}")
    return 0


def cmd_plan(args) -> int:
    cfg, _ = _load(args.config, "gasteiner")
    H = cfg.hours_per_day
    days = args.days or cfg.models.inflows.n_days
    n = args.scenarios or cfg.simulation.planner_scenarios
    sim = replace(cfg.simulation, n_days=1)
    truth = draw_truth(sim, cfg.cascade, cfg.models, args.seed)
    scen = _planner_scenarios(cfg.models, truth, 0, days, H, n, args.seed, "reserves", sim.start_weekday)
    model = assemble_planner_saa(cfg.cascade, cfg.ratings, scen, days, H)
    try:
        sol = solve_planner(model)
    except PlannerInfeasible as exc:
        _diag("infeasible", f"planner infeasible from day {exc.day}", day=exc.day)
        return EXIT_INFEASIBLE
    print(f"planner N={n} D={days}: expected revenue {sol.objective / 1e3:.3f} kEUR")
    for name, w in zip(cfg.cascade.reservoirs, sol.water_values):
        print(f"water value {name}: {w:.6g} EUR/m3")
    st = sol.stats
    print(f"rows {st['rows']} cols {st['cols']} wall {st['wall_seconds']:.2f} s")
    if args.stats:
        write_stats_csv([stats_row(sol)], args.stats)
    return 0


def cmd_simulate(args) -> int:
    cfg, path = _load(args.config, "gasteiner")
    sim = cfg.simulation
    over = {}
    if args.seeds:
        over["seeds"] = tuple(_ints(args.seeds))
    if args.days:
        over["n_days"] = args.days
    if args.strategies:
        over["strategies"] = tuple(x.strip() for x in args.strategies.split(","))
    if args.scenarios:
        over["planner_scenarios"] = args.scenarios
    try:
        sim = replace(sim, **over)
    except ValueError as exc:
        raise ConfigError([("$.simulation", str(exc))]) from exc
    results = run_baselines(sim, cfg.cascade, cfg.ratings, cfg.models)
    out = args.out or cfg.raw.get("output_dir", "results")
    manifest = export_results(results, out, cfg.cascade.reservoirs, cfg.digest(), str(path),
                              command=sys.argv)
    for st, runs in results.items():
        final = np.array([r.cumulative_revenue[-1] for r in runs]) / 1e3
        falls = sum(d.fallback for r in runs for d in r.days)
        print(f"{st}: median cumulative revenue {np.median(final):.3f} kEUR over {len(runs)} seeds"
              f" ({falls} fallback days)")
    print(f"wrote {', '.join(manifest['files'].values())} to {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg, _ = _load(args.config, "tiny")
    if not 1 <= args.hours <= min(MAX_HOURS, cfg.hours_per_day):
        raise ConfigError([("--hours", f"must be in 1..{min(MAX_HOURS, cfg.hours_per_day)}")])
    inp = _trader_input(cfg, args.day, args.seed, args.hours, args.target)
    tree = enumerate_activation_tree(args.hours, cfg.models.activations)
    worst = 0.0
    for mode in (("individual", "collective") if args.mode == "both" else (args.mode,)):
        red = (solve_reduced_individual if mode == "individual" else solve_reduced_collective)(inp)
        ora = solve_extensive_trader(inp, mode, tree)
        if red.feasible != ora.feasible:
            _diag("mismatch", f"{mode}: reduced {red.status}, oracle {ora.status}")
            return EXIT_CHECK
        if not red.feasible:
            _diag("infeasible", "infeasible target", mode=mode)
            return EXIT_INFEASIBLE
        gap = abs(ora.objective - red.objective)
        worst = max(worst, gap / (1.0 + abs(red.objective)))
        print(f"{mode}: reduced {red.objective:.9f} oracle {ora.objective:.9f} gap {gap:.3e}")
    if worst > ORACLE_TOL:
        _diag("check", f"relative gap {worst:.3e} above {ORACLE_TOL:g}")
        return EXIT_CHECK
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hydrosched", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p, default):
        p.add_argument("--config", help=f"run config JSON (default: bundled {default})")
        return p

    p = with_config(sub.add_parser("validate", help="check a cascade configuration"), "gasteiner")
    p.set_defaults(func=cmd_validate)

    p = with_config(sub.add_parser("trade", help="solve one day's reduced trader problem"), "gasteiner")
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("individual", "collective"), default="individual")
    p.add_argument("--target", help="end-of-day targets per non-sink reservoir, comma separated (m3)")
    p.set_defaults(func=cmd_trade)

    p = with_config(sub.add_parser("plan", help="solve the planner problem and print water values"), "gasteiner")
    p.add_argument("--scenarios", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats", help="write solver statistics CSV")
    p.set_defaults(func=cmd_plan)

    p = with_config(sub.add_parser("simulate", help="rolling-horizon simulation of all strategies"), "gasteiner")
    p.add_argument("--seeds", help="comma separated seeds")
    p.add_argument("--days", type=int)
    p.add_argument("--scenarios", type=int)
    p.add_argument("--strategies", help=f"comma separated subset of {','.join(STRATEGIES)}")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = with_config(sub.add_parser("oracle", help="compare reduced LPs with the scenario-tree problem"), "tiny")
    p.add_argument("--hours", type=int, default=2)
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("individual", "collective", "both"), default="both")
    p.add_argument("--target", help="end-of-day targets per non-sink reservoir, comma separated (m3)")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for path, msg in exc.errors:
            _diag("config", msg, path=path)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
