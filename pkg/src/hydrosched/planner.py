"""Affine-decision-rule sample-average planner and water-value extraction.

The planner chooses end-of-day reservoir targets as affine functions of
observable features (day inflow, cumulative inflow, average spot price) that
are shared across N sampled scenarios; each scenario then trades hour by hour
subject to the same robust delivery rows as the one-day trader problem.

LP size per scenario with T = D*H hours, A arcs, K = R - 1 non-sink reservoirs:
  columns  T*(3 + 3A + K) + 2*D*K
  rows     T*(2 + K) + D*3*K - K   (delivery, cut, balance; daily balance,
                                     rule, day linking for d >= 2) + K terminal
plus K + (D - 1)*(2K + 2K^2) shared policy columns. Hourly level columns
replace cumulative sums so that the matrix stays sparse.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cascade import Cascade, HourlyRatings
from .lpcore import LinearProgram, LpSolution, solve
from .stochastic import BidCoefficients
from .trader import Strategy, add_balance, add_cut, add_delivery, add_flows


class PlannerInfeasible(RuntimeError):
    def __init__(self, day: int, message: str = ""):
        super().__init__(message or f"planner infeasible from day {day}")
        self.day = day


@dataclass(frozen=True, eq=False)
class PlannerScenario:
    """Bid coefficients (T,) and hourly inflows (T, R) of one sampled path."""

    coefs: BidCoefficients
    inflows: np.ndarray


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """Per-day rule w_d = lam_d + Phi_d f_in + Psi_d f_cum + mu_d f_price.

    Days are 0-based. Arrays: lam (D, R), Phi (D, R, R), Psi (D, R, R), mu (D, R).
    """

    lam: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    mu: np.ndarray

    @property
    def n_days(self) -> int:
        return self.lam.shape[0]


def evaluate_policy(policy: AffinePolicy, day: int, day_inflow, cum_inflow, avg_price: float) -> np.ndarray:
    """Target levels for ``day`` from its features; no clipping."""
    f_in = np.atleast_1d(np.asarray(day_inflow, dtype=float))
    f_cum = np.atleast_1d(np.asarray(cum_inflow, dtype=float))
    R = policy.lam.shape[1]
    if f_in.shape != (R,) or f_cum.shape != (R,) or np.ndim(avg_price) != 0:
        raise ValueError(f"features must be ({R},), ({R},) and a scalar")
    return policy.lam[day] + policy.Phi[day] @ f_in + policy.Psi[day] @ f_cum + policy.mu[day] * float(avg_price)


def scenario_features(inflows: np.ndarray, spot: np.ndarray, n_days: int, hours_per_day: int):
    """Day inflow sums (D, R), cumulative inflows before each day (D, R), day mean prices (D,)."""
    daily = inflows.reshape(n_days, hours_per_day, -1).sum(axis=1)
    cum = np.vstack([np.zeros((1, daily.shape[1])), np.cumsum(daily, axis=0)[:-1]])
    price = np.asarray(spot, dtype=float).reshape(n_days, hours_per_day).mean(axis=1)
    return daily, cum, price


@dataclass(eq=False)
class PlannerModel:
    lp: LinearProgram
    n_scenarios: int
    n_days: int
    hours_per_day: int
    incidence: np.ndarray
    s: np.ndarray  # (N, T)
    u: np.ndarray
    v: np.ndarray
    g: np.ndarray  # (N, T, A)
    p: np.ndarray
    z: np.ndarray
    w: np.ndarray  # (N, D, K)
    w_begin: np.ndarray
    link_rows: np.ndarray  # (N, D - 1, K)
    lam1: np.ndarray
    lam: np.ndarray  # (D - 1, K)
    Phi: np.ndarray  # (D - 1, K, K)
    Psi: np.ndarray
    mu: np.ndarray  # (D - 1, K)
    inflow_scale: float
    price_scale: float
    build_args: dict = field(default_factory=dict)


def assemble_planner_saa(cascade: Cascade, ratings: HourlyRatings, scenarios: Sequence[PlannerScenario],
                         n_days: int, hours_per_day: int, start_hour: int = 0,
                         start_level: np.ndarray | None = None, strategy: Strategy = "reserves",
                         terminal: bool = True) -> PlannerModel:
    """One LP over all scenarios with shared affine-rule coefficients."""
    N = len(scenarios)
    if N == 0:
        raise ValueError("planner needs at least one scenario")
    D, H = n_days, hours_per_day
    if D < 1:
        raise ValueError("planner horizon must span at least one day")
    T = D * H
    A = cascade.n_arcs
    K = cascade.n_reservoirs - 1
    M = cascade.incidence
    m_ns = M[:K]
    w0 = np.asarray(cascade.initial_levels if start_level is None else start_level, dtype=float)
    rt = ratings.window(start_hour, T)
    eta, zeta = np.asarray(rt.gen_eff, float), np.asarray(rt.inv_pump_eff, float)
    pcap = np.asarray(rt.pump_cap, float)
    lo, hi = cascade.bounds(start_hour, T)
    lo, hi = lo[:, :K], hi[:, :K]
    day_end = np.arange(1, D + 1) * H - 1

    feats = []
    for sc in scenarios:
        if sc.inflows.shape != (T, K + 1) or np.asarray(sc.coefs.spot).shape != (T,):
            raise ValueError(f"scenario data must cover {T} hours for {K + 1} reservoirs")
        feats.append(scenario_features(sc.inflows[:, :K], sc.coefs.spot, D, H))
    in_scale = float(np.mean([f[0].mean() for f in feats])) or 1.0
    pr_scale = float(np.mean([f[2].mean() for f in feats])) or 1.0

    lp = LinearProgram()
    lam1 = lp.add_variables("lambda1", K, -np.inf, np.inf)
    lam = lp.add_variables("lambda", (D - 1, K), -np.inf, np.inf)
    Phi = lp.add_variables("Phi", (D - 1, K, K), -np.inf, np.inf)
    Psi = lp.add_variables("Psi", (D - 1, K, K), -np.inf, np.inf)
    mu = lp.add_variables("mu", (D - 1, K), -np.inf, np.inf)

    out = {k: [] for k in ("s", "u", "v", "g", "p", "z", "w", "wb", "link")}
    for n, sc in enumerate(scenarios):
        cf = sc.coefs
        weight = 1.0 / N
        cap = 0.0 if strategy == "spot_only" else np.inf
        s = lp.add_variables(f"s{n}", T, -np.inf, np.inf, weight * np.asarray(cf.spot, float))
        u = lp.add_variables(f"u{n}", T, 0.0, cap, weight * np.asarray(cf.up, float))
        v = lp.add_variables(f"v{n}", T, 0.0, cap, weight * np.asarray(cf.down, float))
        g, p, z = add_flows(lp, f"sc{n}", rt)
        if strategy == "deterministic":
            add_delivery(lp, f"sc{n}", s, u, v, cf.rho_up, cf.rho_down, g, p, eta, zeta)
            rows = np.arange(T)
            lp.add_constraints(f"sc{n}_reserve_cap", np.tile(rows, 3), np.concatenate([u, v, s]),
                               np.concatenate([np.ones(2 * T), -np.ones(T)]), "<=", np.zeros(T))
        else:
            add_delivery(lp, f"sc{n}", s, u, v, 1.0, 0.0, g, p, eta, zeta)
            add_cut(lp, f"sc{n}", s, v, zeta, pcap)
        w = lp.add_variables(f"w{n}", (D, K), lo[day_end], hi[day_end])
        wb_lo = np.full((D, K), -np.inf)
        wb_hi = np.full((D, K), np.inf)
        wb_lo[0] = wb_hi[0] = w0[:K]
        wb = lp.add_variables(f"wbegin{n}", (D, K), wb_lo, wb_hi)
        lev = add_balance(lp, f"sc{n}", m_ns, g, p, z, sc.inflows, lo, hi, day_length=H, day_start=wb)
        # daily water: w_d <= level at the end of day d
        rows = np.arange(D * K)
        lp.add_constraints(f"sc{n}_daily", np.concatenate([rows, rows]),
                           np.concatenate([w.ravel(), lev[day_end].ravel()]),
                           np.concatenate([np.ones(D * K), -np.ones(D * K)]), "<=", np.zeros(D * K))
        # linking w_d^- = w_{d-1}
        rows = np.arange((D - 1) * K)
        link = lp.add_constraints(f"sc{n}_link", np.concatenate([rows, rows]),
                                  np.concatenate([wb[1:].ravel(), w[:-1].ravel()]),
                                  np.concatenate([np.ones(rows.size), -np.ones(rows.size)]), "=",
                                  np.zeros(rows.size))
        if terminal:
            lp.add_constraints(f"sc{n}_terminal", np.arange(K), w[-1], np.ones(K), ">=", w0[:K])
        # affine rule rows
        d_in, d_cum, d_pr = feats[n]
        f_in, f_cum, f_pr = d_in[1:] / in_scale, d_cum[1:] / in_scale, d_pr[1:] / pr_scale
        r1 = np.arange(K)
        rr = [r1, r1]
        cc = [w[0], lam1]
        vv = [np.ones(K), -np.ones(K)]
        rows = (np.arange(D - 1)[:, None] * K + np.arange(K)[None, :]) + K  # (D-1, K)
        rr += [rows.ravel(), rows.ravel()]
        cc += [w[1:].ravel(), lam.ravel()]
        vv += [np.ones(rows.size), -np.ones(rows.size)]
        for mat, feat in ((Phi, f_in), (Psi, f_cum)):
            rr.append(np.repeat(rows.ravel(), K))
            cc.append(mat.ravel())
            vv.append(-np.broadcast_to(feat[:, None, :], (D - 1, K, K)).ravel())
        rr.append(rows.ravel())
        cc.append(mu.ravel())
        vv.append(-np.broadcast_to(f_pr[:, None], (D - 1, K)).ravel())
        rr, cc, vv = np.concatenate(rr), np.concatenate(cc), np.concatenate(vv)
        keep = vv != 0
        lp.add_constraints(f"sc{n}_rule", rr[keep], cc[keep], vv[keep], "=", np.zeros(D * K))
        for key, val in (("s", s), ("u", u), ("v", v), ("g", g), ("p", p), ("z", z),
                         ("w", w), ("wb", wb), ("link", link.reshape(D - 1, K))):
            out[key].append(val)

    return PlannerModel(
        lp, N, D, H, M, *(np.array(out[k]) for k in ("s", "u", "v", "g", "p", "z", "w", "wb", "link")),
        lam1, lam, Phi, Psi, mu, in_scale, pr_scale,
        build_args=dict(cascade=cascade, ratings=ratings, scenarios=list(scenarios), hours_per_day=H,
                        start_hour=start_hour, start_level=w0, strategy=strategy),
    )


@dataclass(eq=False)
class PlannerSolution:
    policy: AffinePolicy
    objective: float
    water_values: np.ndarray  # (R,), sink entry 0
    targets: np.ndarray  # (N, D, R) end-of-day targets per scenario
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    g: np.ndarray
    p: np.ndarray
    z: np.ndarray
    stats: dict
    lp: LpSolution
    degenerate: bool | None = None


def _embed(k_arr: np.ndarray, R: int, axes: int) -> np.ndarray:
    """Pad the trailing ``axes`` dimensions from K to R with zeros (sink last)."""
    pad = [(0, 0)] * (k_arr.ndim - axes) + [(0, 1)] * axes
    return np.pad(k_arr, pad)


def solve_planner(model: PlannerModel) -> PlannerSolution:
    """Solve the planner LP and read water values from the day-1 linking rows."""
    t0 = time.perf_counter()
    res = solve(model.lp)
    wall = time.perf_counter() - t0
    if not res.optimal:
        raise PlannerInfeasible(_first_infeasible_day(model), f"planner {res.status}")
    x = res.x
    K = model.w.shape[-1]
    R = K + 1
    D = model.n_days
    lam = np.vstack([x[model.lam1][None, :], x[model.lam]])
    Phi = np.concatenate([np.zeros((1, K, K)), x[model.Phi] / model.inflow_scale])
    Psi = np.concatenate([np.zeros((1, K, K)), x[model.Psi] / model.inflow_scale])
    mu = np.vstack([np.zeros((1, K)), x[model.mu] / model.price_scale])
    policy = AffinePolicy(_embed(lam, R, 1), _embed(Phi, R, 2), _embed(Psi, R, 2), _embed(mu, R, 1))
    theta = np.zeros(R)
    if D > 1:  # a one-day horizon has no future to value
        theta[:K] = res.duals[model.link_rows[:, 0, :]].sum(axis=0)
    stats = {"N": model.n_scenarios, "rows": model.lp.n_cons, "cols": model.lp.n_vars,
             "wall_seconds": wall, "days": D}
    return PlannerSolution(policy, res.objective, theta, _embed(x[model.w], R, 1),
                           x[model.s], x[model.u], x[model.v], x[model.g], x[model.p], x[model.z],
                           stats, res)


def _first_infeasible_day(model: PlannerModel) -> int:
    """0-based day ending the shortest infeasible prefix horizon (terminal row dropped)."""
    args = model.build_args
    H = args["hours_per_day"]
    for d in range(1, model.n_days + 1):
        sc = [PlannerScenario(_cut_coefs(s.coefs, d * H), s.inflows[: d * H]) for s in args["scenarios"]]
        sub = assemble_planner_saa(args["cascade"], args["ratings"], sc, d, H, args["start_hour"],
                                   args["start_level"], args["strategy"], terminal=False)
        if not solve(sub.lp).optimal:
            return d - 1
    return model.n_days - 1  # only the terminal constraint fails


def _cut_coefs(c: BidCoefficients, n: int) -> BidCoefficients:
    return BidCoefficients(c.spot[:n], c.up[:n], c.down[:n], c.rho_up[:n], c.rho_down[:n])


@dataclass
class DualCheck:
    water_values: np.ndarray
    central: np.ndarray
    left: np.ndarray
    right: np.ndarray
    degenerate: np.ndarray
    agrees: np.ndarray


def finite_difference_water_values(model: PlannerModel, sol: PlannerSolution, eps: float = 1.0,
                                   kink_tol: float = 1e-3) -> DualCheck:
    """Re-solve with +/- eps m3 at the start of day 2 (all scenarios) per reservoir.

    A reservoir is flagged degenerate when the one-sided quotients disagree,
    i.e. the value function has a kink there and duals are not unique.
    """
    K = model.w.shape[-1]
    base = sol.objective
    left, right = np.zeros(K), np.zeros(K)
    for k in range(K):
        rows = model.link_rows[:, 0, k]
        vals = []
        for delta in (eps, -eps):
            model.lp.shift_rhs(rows, delta)
            try:
                r = solve(model.lp)
            finally:
                model.lp.shift_rhs(rows, -delta)
            vals.append(r.objective if r.optimal else -np.inf)
        right[k] = (vals[0] - base) / eps
        left[k] = (base - vals[1]) / eps
    central = 0.5 * (left + right)
    degenerate = np.abs(right - left) > kink_tol * np.maximum(np.maximum(np.abs(left), np.abs(right)), 1e-9)
    theta = sol.water_values[:K]
    agrees = np.abs(central - theta) <= kink_tol * np.maximum(np.abs(theta), 1e-9)
    sol.degenerate = bool(degenerate.any())
    return DualCheck(theta, central, left, right, degenerate, agrees)


STATS_FIELDS = ("N", "rows", "cols", "wall_seconds", "degenerate")


def stats_row(sol: PlannerSolution) -> dict:
    row = {k: sol.stats[k] for k in ("N", "rows", "cols", "wall_seconds")}
    row["degenerate"] = "" if sol.degenerate is None else int(sol.degenerate)
    return row


def write_stats_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=STATS_FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({**r, "wall_seconds": f"{float(r['wall_seconds']):.3f}"})
