"""Rolling-horizon simulation against sampled prices, inflows and activations.

Each simulated day: re-solve the planner when due and read water values,
bid with the water-value day problem, dispatch hour by hour against the
realized activation, then book revenues. Three strategies are compared on the
same realized scenario: stochastic with reserves, stochastic spot-only, and a
deterministic expected-value model that falls back to spot-only trading for
days on which its reserve commitments turn out undeliverable.
"""

from __future__ import annotations

import datetime as dt
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cascade import Cascade, HourlyRatings
from .planner import PlannerScenario, assemble_planner_saa, solve_planner
from .stochastic import (ActivationModel, BidCoefficients, InflowModel, PriceModel, Scenario,
                         expected_bid_coefficients, hourly_inflows, prices_from_factors,
                         sample_daily_inflows, sample_scenario, simulate_log_factors, substream)
from .trader import (DispatchInfeasible, Strategy, TraderInput, solve_day1_variant,
                     trajectory, truncated_dispatch)

log = logging.getLogger(__name__)

STRATEGIES: tuple[Strategy, ...] = ("reserves", "spot_only", "deterministic")
BOUND_TOL = 1e-6  # m3


@dataclass(frozen=True)
class MarketModels:
    prices: PriceModel
    inflows: InflowModel
    activations: ActivationModel


@dataclass(frozen=True)
class SimulationConfig:
    n_days: int
    hours_per_day: int = 24
    planner_scenarios: int = 10
    resolve_every: int = 7
    seeds: tuple[int, ...] = (0,)
    strategies: tuple[Strategy, ...] = STRATEGIES
    lookahead_days: int | None = None  # default: one cycle of the seasonal data
    start_date: str = "2021-01-04"

    def __post_init__(self):
        if self.n_days < 1 or self.hours_per_day < 1:
            raise ValueError("horizon must be positive")
        if self.planner_scenarios < 1 or self.resolve_every < 1:
            raise ValueError("scenario count and re-solve period must be at least 1")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")

    @property
    def start_weekday(self) -> int:
        return dt.date.fromisoformat(self.start_date).weekday()

    def date(self, day: int) -> str:
        return (dt.date.fromisoformat(self.start_date) + dt.timedelta(days=day)).isoformat()


@dataclass(frozen=True)
class Revenue:
    spot: float
    up: float
    down: float

    @property
    def total(self) -> float:
        return self.spot + self.up + self.down


def account_revenues(s, u, v, spot_price, rho_up, rho_down, psi_up, psi_down,
                     cap_up=0.0, cap_down=0.0) -> Revenue:
    """Realized revenue per market for one day of hourly bids."""
    s, u, v = (np.asarray(x, dtype=float) for x in (s, u, v))
    spot = float(np.sum(np.asarray(spot_price) * s))
    up = float(np.sum((np.asarray(cap_up) + np.asarray(rho_up) * np.asarray(psi_up)) * u))
    down = float(np.sum((np.asarray(cap_down) + np.asarray(rho_down) * np.asarray(psi_down)) * v))
    return Revenue(spot, up, down)


@dataclass(eq=False)
class DayResult:
    day: int
    date: str
    strategy: Strategy
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    rho_up: np.ndarray
    rho_down: np.ndarray
    g: np.ndarray
    p: np.ndarray
    z: np.ndarray
    inflows: np.ndarray
    start_level: np.ndarray
    levels: np.ndarray  # (H, R) end of each hour
    revenue: Revenue
    water_values: np.ndarray
    fallback: bool = False
    delivery_residual: float = 0.0
    bound_violations: int = 0

    @property
    def end_level(self) -> np.ndarray:
        return self.levels[-1]


@dataclass(eq=False)
class RunResult:
    seed: int
    strategy: Strategy
    days: list[DayResult]
    planner_stats: list[dict] = field(default_factory=list)

    @property
    def cumulative_revenue(self) -> np.ndarray:
        return np.cumsum([d.revenue.total for d in self.days])


def _planner_scenarios(models: MarketModels, truth: Scenario, day: int, lookahead: int, H: int,
                       n: int, seed: int, strategy: Strategy, weekday: int) -> list[PlannerScenario]:
    """Scenarios whose first day is the revealed day and later days are sampled.

    Prices continue the log-price process from its state at the end of the
    revealed day; inflow factors are redrawn per scenario.
    """
    h0 = day * H
    known_spot = truth.spot[h0:h0 + H]
    known_inflow = truth.inflows[h0:h0 + H]
    rest = (lookahead - 1) * H
    pm, im, am = models.prices, models.inflows, models.activations
    if strategy == "deterministic":
        spots = pm.forward(h0 + H, rest)[None, :]
        daily = im.means(day + 1, lookahead - 1)[None]
    else:
        rng = substream(seed, f"planner-{day}")
        xs, ys = truth.log_factors
        x0, y0 = xs[h0 + H - 1], ys[h0 + H - 1]
        fx, _ = simulate_log_factors(pm, rest, rng, n, x0, y0)
        spots = prices_from_factors(pm, fx, start=h0 + H)
        daily = sample_daily_inflows(im, day + 1, lookahead - 1, rng, n)
    inflows = hourly_inflows(daily, H)
    out = []
    for k in range(spots.shape[0]):
        spot = np.concatenate([known_spot, spots[k]])
        phi = np.vstack([known_inflow, inflows[k]])
        coefs = expected_bid_coefficients(pm, am, spot, h0, H, weekday)
        out.append(PlannerScenario(coefs, phi))
    return out


def draw_truth(cfg: SimulationConfig, cascade: Cascade, models: MarketModels, seed: int) -> Scenario:
    return sample_scenario(models.prices, models.inflows, models.activations, cascade.n_reservoirs,
                           cfg.n_days, cfg.hours_per_day, seed, cfg.start_weekday)


def _dispatch_day(inp: TraderInput, bids, rho_up, rho_down, strategy: Strategy):
    H, A = inp.hours, inp.n_arcs
    g, p, z = np.zeros((H, A)), np.zeros((H, A)), np.zeros((H, A))
    level = inp.start_level.copy()
    M = inp.incidence
    for t in range(H):
        hd = truncated_dispatch(inp, bids, t, level, float(rho_up[t]), float(rho_down[t]), strategy)
        g[t], p[t], z[t] = hd.g, hd.p, hd.z
        level = level + inp.inflows[t] + M @ (hd.g - hd.p + hd.z)
    return g, p, z


def run_rolling_horizon(cfg: SimulationConfig, cascade: Cascade, ratings: HourlyRatings,
                        models: MarketModels, seed: int, strategy: Strategy = "reserves",
                        truth: Scenario | None = None) -> RunResult:
    """Simulate ``cfg.n_days`` days for one seed and strategy."""
    H = cfg.hours_per_day
    truth = draw_truth(cfg, cascade, models, seed) if truth is None else truth
    lookahead = cfg.lookahead_days or models.inflows.n_days
    lookahead = max(lookahead, 2)
    n_scen = 1 if strategy == "deterministic" else cfg.planner_scenarios
    wd = cfg.start_weekday
    level = cascade.initial_levels.copy()
    theta = np.zeros(cascade.n_reservoirs)
    M = cascade.incidence
    days, stats = [], []
    for d in range(cfg.n_days):
        h0 = d * H
        if d % cfg.resolve_every == 0:
            scen = _planner_scenarios(models, truth, d, lookahead, H, n_scen, seed, strategy, wd)
            model = assemble_planner_saa(cascade, ratings, scen, lookahead, H, h0, level, strategy)
            plan = solve_planner(model)
            theta = plan.water_values
            stats.append({**plan.stats, "day": d})
        spot = truth.spot[h0:h0 + H]
        coefs = expected_bid_coefficients(models.prices, models.activations, spot, h0, H, wd)
        phi = truth.inflows[h0:h0 + H]
        inp = TraderInput.for_day(cascade, ratings, h0, coefs, phi, level, water_values=theta)
        ru, rd = truth.rho_up[h0:h0 + H], truth.rho_down[h0:h0 + H]
        bids = solve_day1_variant(inp, strategy)
        fallback = False
        try:
            g, p, z = _dispatch_day(inp, bids, ru, rd, strategy)
        except DispatchInfeasible:
            if strategy != "deterministic":
                raise
            log.info("seed %d day %d: commitments undeliverable, re-scored spot-only", seed, d)
            fallback = True
            bids = solve_day1_variant(inp, "spot_only")
            g, p, z = _dispatch_day(inp, bids, ru, rd, "spot_only")
        cap_u, cap_d = models.prices.capacity_prices(h0, H)
        rev = account_revenues(bids.s, bids.u, bids.v, spot, ru, rd,
                               truth.psi_up[h0:h0 + H], truth.psi_down[h0:h0 + H], cap_u, cap_d)
        levels = trajectory(level, phi, M, g, p, z)
        eta, zeta = np.asarray(inp.ratings.gen_eff), np.asarray(inp.ratings.inv_pump_eff)
        made = (eta * g).sum(axis=1) - (zeta * p).sum(axis=1)
        owed = bids.s + ru * bids.u - rd * bids.v
        lo, hi = inp.lower, inp.upper
        viol = int(np.sum((levels < lo - BOUND_TOL) | (levels > hi + BOUND_TOL)))
        days.append(DayResult(d, cfg.date(d), strategy, bids.s, bids.u, bids.v, ru, rd, g, p, z, phi,
                              level.copy(), levels, rev, theta.copy(), fallback,
                              float(np.abs(made - owed).max()), viol))
        level = levels[-1].copy()
    return RunResult(seed, strategy, days, stats)


def _run_one(args):
    cfg, cascade, ratings, models, seed, strategy = args
    truth = draw_truth(cfg, cascade, models, seed)
    return run_rolling_horizon(cfg, cascade, ratings, models, seed, strategy, truth)


def worker_count(n_jobs: int) -> int:
    """Worker processes allowed by HYDROSCHED_THREADS (default 1)."""
    try:
        cap = int(os.environ.get("HYDROSCHED_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, n_jobs))


def run_baselines(cfg: SimulationConfig, cascade: Cascade, ratings: HourlyRatings,
                  models: MarketModels) -> dict[Strategy, list[RunResult]]:
    """Run every configured strategy on every seed; same realized scenario per seed."""
    jobs = [(cfg, cascade, ratings, models, seed, st) for st in cfg.strategies for seed in cfg.seeds]
    workers = worker_count(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    out: dict[Strategy, list[RunResult]] = {st: [] for st in cfg.strategies}
    for r in results:
        out[r.strategy].append(r)
    return out


def percentile_bands(runs: list[RunResult], q=(10, 50, 90)) -> np.ndarray:
    """(len(q), D) percentiles of cumulative revenue across seeds."""
    cum = np.array([r.cumulative_revenue for r in runs])
    return np.percentile(cum, q, axis=0)
