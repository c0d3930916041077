"""Reduced one-day trader problems, complementarity repair, policy recovery,
the water-value day problem and hourly truncated dispatch.

Shapes: H hours, A arcs, R reservoirs (sink last), K = R - 1. Bids are (H, A)
in individual mode and (H,) in collective mode; flows are always (H, A).
Reservoir levels are carried only for non-sink reservoirs inside the LPs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .cascade import Cascade, HourlyRatings
from .lpcore import LinearProgram, LpSolution, solve
from .stochastic import BidCoefficients

Mode = Literal["individual", "collective"]
Strategy = Literal["reserves", "spot_only", "deterministic"]

CONTINUATION_SPILL_WEIGHT = 1e-3
OPT_FLOOR_TOL = 1e-9  # relative slack on the optimal value when minimizing spill


class InternalConsistencyError(RuntimeError):
    """An LP that must be feasible by construction was not."""


class DispatchInfeasible(InternalConsistencyError):
    """Committed bids cannot be delivered at the realized activation."""


class PolicyPreconditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TraderInput:
    """Data of one trading day. Arrays are per hour of the day."""

    cascade: Cascade
    ratings: HourlyRatings  # fields (H, A)
    start_level: np.ndarray  # (R,)
    inflows: np.ndarray  # (H, R)
    coefs: BidCoefficients  # fields (H,)
    lower: np.ndarray  # (H, R)
    upper: np.ndarray  # (H, R)
    target: np.ndarray | None = None  # (R,)
    water_values: np.ndarray | None = None  # (R,)

    @classmethod
    def for_day(cls, cascade: Cascade, ratings: HourlyRatings, start_hour: int, coefs: BidCoefficients,
                inflows: np.ndarray, start_level: np.ndarray | None = None,
                target: np.ndarray | None = None, water_values: np.ndarray | None = None) -> "TraderInput":
        H = np.asarray(coefs.spot).size
        lo, hi = cascade.bounds(start_hour, H)
        w0 = cascade.initial_levels if start_level is None else start_level
        inflows = np.asarray(inflows, dtype=float)
        if inflows.shape != (H, cascade.n_reservoirs):
            raise ValueError(f"inflows must have shape {(H, cascade.n_reservoirs)}")
        return cls(cascade, ratings.window(start_hour, H), np.asarray(w0, dtype=float), inflows,
                   coefs, lo, hi,
                   None if target is None else np.asarray(target, dtype=float),
                   None if water_values is None else np.asarray(water_values, dtype=float))

    @property
    def hours(self) -> int:
        return self.inflows.shape[0]

    @property
    def incidence(self) -> np.ndarray:
        return self.cascade.incidence

    @property
    def n_arcs(self) -> int:
        return self.cascade.n_arcs


@dataclass(eq=False)
class TraderSolution:
    status: Literal["optimal", "infeasible"]
    mode: Mode
    objective: float
    inp: TraderInput
    s: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    g: np.ndarray | None = None
    p: np.ndarray | None = None
    z: np.ndarray | None = None
    g_nom: np.ndarray | None = None
    p_nom: np.ndarray | None = None
    z_nom: np.ndarray | None = None
    lp: LpSolution | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"

    def levels(self, nominal: bool = False) -> np.ndarray:
        """Hourly end-of-hour levels (H, R) of the robust or nominal trajectory."""
        g, p, z = (self.g_nom, self.p_nom, self.z_nom) if nominal else (self.g, self.p, self.z)
        return trajectory(self.inp.start_level, self.inp.inflows, self.inp.incidence, g, p, z)


def trajectory(start: np.ndarray, inflows: np.ndarray, incidence: np.ndarray,
               g: np.ndarray, p: np.ndarray, z: np.ndarray) -> np.ndarray:
    """End-of-hour levels from a start level and hourly flows."""
    step = inflows + (g - p + z) @ incidence.T
    return start + np.cumsum(step, axis=0)


# -- LP building blocks shared with the planner ------------------------------

def add_flows(lp: LinearProgram, name: str, ratings: HourlyRatings, hour_idx: np.ndarray | None = None):
    """Generation, pumping and spill variables, each (T, A), within ratings."""
    gcap = np.asarray(ratings.gen_cap, dtype=float)
    pcap = np.asarray(ratings.pump_cap, dtype=float)
    if hour_idx is not None:
        gcap, pcap = gcap[hour_idx], pcap[hour_idx]
    g = lp.add_variables(f"{name}_g", gcap.shape, 0.0, gcap)
    p = lp.add_variables(f"{name}_p", pcap.shape, 0.0, pcap)
    z = lp.add_variables(f"{name}_z", gcap.shape, 0.0, np.inf)
    return g, p, z


def add_balance(lp: LinearProgram, name: str, incidence_ns: np.ndarray, g, p, z,
                inflow: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                start: np.ndarray | None = None, first_prev: np.ndarray | None = None,
                day_length: int | None = None, day_start: np.ndarray | None = None) -> np.ndarray:
    """End-of-hour level variables (T, K) tied by l_t = l_prev + inflow_t + M (g - p + z)_t.

    The chain starts from the constant ``start`` or from the variables
    ``first_prev``. With ``day_length``, every day instead restarts from its
    begin-of-day variables ``day_start`` (D, K).
    """
    T, K = inflow.shape[0], incidence_ns.shape[0]
    lev = lp.add_variables(f"{name}_level", (T, K), lo, hi)
    head = np.full((1, K), -1) if first_prev is None else np.reshape(first_prev, (1, K))
    prev = np.vstack([head, lev[:-1]])
    if day_length is not None:
        prev[::day_length] = day_start
    rows = np.arange(T * K).reshape(T, K)
    kk, aa = np.nonzero(incidence_ns)
    mv = incidence_ns[kk, aa]
    has_prev = prev >= 0
    r = [rows.ravel(), rows[has_prev]]
    c = [lev.ravel(), prev[has_prev]]
    v = [np.ones(T * K), -np.ones(int(has_prev.sum()))]
    for flow, sign in ((g, -1.0), (p, 1.0), (z, -1.0)):
        r.append(rows[:, kk].ravel())
        c.append(flow[:, aa].ravel())
        v.append(np.broadcast_to(sign * mv, (T, kk.size)).ravel())
    rhs = np.array(inflow[:, :K], dtype=float)
    if start is not None:
        rhs = rhs + np.where(has_prev, 0.0, np.broadcast_to(start[:K], (T, K)))
    lp.add_constraints(f"{name}_balance", np.concatenate(r), np.concatenate(c), np.concatenate(v), "=", rhs.ravel())
    return lev


def add_delivery(lp: LinearProgram, name: str, s, u, v, coef_u, coef_v, g, p,
                 eta: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Rows s + coef_u u - coef_v v = eta.g - zeta.p per hour (collective) or per arc-hour."""
    T, A = g.shape
    coef_u = np.asarray(coef_u, dtype=float)
    coef_v = np.asarray(coef_v, dtype=float)
    if s.ndim == 1:
        rows = np.arange(T)
        ra = np.repeat(rows, A)
        r = [rows, rows, rows, ra, ra]
        c = [s, u, v, g.ravel(), p.ravel()]
        vals = [np.ones(T), np.broadcast_to(coef_u, (T,)), -np.broadcast_to(coef_v, (T,)),
                -eta.ravel(), zeta.ravel()]
        m = T
    else:
        rows = np.arange(T * A)
        r = [rows] * 5
        c = [s.ravel(), u.ravel(), v.ravel(), g.ravel(), p.ravel()]
        cu = np.broadcast_to(coef_u.reshape(T, -1) if coef_u.ndim else coef_u, (T, A)).ravel()
        cv = np.broadcast_to(coef_v.reshape(T, -1) if coef_v.ndim else coef_v, (T, A)).ravel()
        vals = [np.ones(T * A), cu, -cv, -eta.ravel(), zeta.ravel()]
        m = T * A
    r, c, vals = np.concatenate(r), np.concatenate(c), np.concatenate(vals)
    keep = vals != 0
    return lp.add_constraints(f"{name}_delivery", r[keep], c[keep], vals[keep], "=", np.zeros(m))


def add_cut(lp: LinearProgram, name: str, s, v, zeta: np.ndarray, pump_cap: np.ndarray) -> np.ndarray:
    """Valid cut s - v >= -zeta.pump_cap (summed over arcs in collective mode)."""
    bound = zeta * pump_cap
    if s.ndim == 1:
        bound = bound.sum(axis=1)
    n = s.size
    rows = np.arange(n)
    return lp.add_constraints(f"{name}_cut", np.concatenate([rows, rows]),
                              np.concatenate([s.ravel(), v.ravel()]),
                              np.concatenate([np.ones(n), -np.ones(n)]), ">=", -bound.ravel())


def _bid_vars(lp: LinearProgram, shape, coefs: BidCoefficients, reserves: bool):
    spot = np.asarray(coefs.spot, dtype=float)
    up = np.asarray(coefs.up, dtype=float)
    down = np.asarray(coefs.down, dtype=float)
    if len(shape) == 2:
        spot, up, down = spot[:, None], up[:, None], down[:, None]
    cap = np.inf if reserves else 0.0
    s = lp.add_variables("s", shape, -np.inf, np.inf, np.broadcast_to(spot, shape))
    u = lp.add_variables("u", shape, 0.0, cap, np.broadcast_to(up, shape))
    v = lp.add_variables("v", shape, 0.0, cap, np.broadcast_to(down, shape))
    return s, u, v


def _solve_min_spill(lp: LinearProgram, spill: list[np.ndarray], weights=None) -> LpSolution:
    """Solve, then re-solve for minimal weighted spill at the fixed optimal value."""
    first = solve(lp)
    if not first.optimal:
        return first
    spill_idx = np.concatenate([z.ravel() for z in spill])
    if first.x[spill_idx].sum() <= 1e-9:
        return first
    c = lp.objective
    nz = np.flatnonzero(c)
    floor = first.objective - lp.objective_constant
    floor -= OPT_FLOOR_TOL * (1.0 + abs(floor))
    lp.add_constraints("optimal_value", np.zeros(nz.size), nz, c[nz], ">=", [floor])
    lp.obj = [np.zeros(lp.n_vars)]
    w = np.ones(len(spill)) if weights is None else np.asarray(weights, dtype=float)
    lp.set_objective(spill_idx, -np.concatenate([np.full(z.size, wk) for z, wk in zip(spill, w)]))
    second = solve(lp)
    if not second.optimal:
        return first
    second.objective = float(c @ second.x) + lp.objective_constant
    second.duals = first.duals[: first.duals.size] if first.duals is not None else None
    return second


def _clip_flows(x: np.ndarray, g, p, z, ratings_gcap, ratings_pcap):
    gv = np.clip(x[g], 0.0, ratings_gcap)
    pv = np.clip(x[p], 0.0, ratings_pcap)
    zv = np.maximum(x[z], 0.0)
    return gv, pv, zv


def _reduced(inp: TraderInput, mode: Mode) -> TraderSolution:
    if inp.target is None:
        raise ValueError("the reduced trader problem needs an end-of-day target")
    H, A = inp.hours, inp.n_arcs
    K = inp.cascade.n_reservoirs - 1
    rt = inp.ratings
    eta, zeta = np.asarray(rt.gen_eff, float), np.asarray(rt.inv_pump_eff, float)
    lp = LinearProgram()
    shape = (H, A) if mode == "individual" else (H,)
    s, u, v = _bid_vars(lp, shape, inp.coefs, reserves=True)
    g, p, z = add_flows(lp, "robust", rt)
    add_delivery(lp, "robust", s, u, v, 1.0, 0.0, g, p, eta, zeta)
    add_cut(lp, "robust", s, v, zeta, np.asarray(rt.pump_cap, float))
    m_ns = inp.incidence[:K]
    lev = add_balance(lp, "robust", m_ns, g, p, z, inp.inflows, inp.lower[:, :K], inp.upper[:, :K],
                      start=inp.start_level)
    lp.add_constraints("target", np.arange(K), lev[-1], np.ones(K), ">=", inp.target[:K])
    res = _solve_min_spill(lp, [z])
    if not res.optimal:
        if res.status == "unbounded":
            raise InternalConsistencyError("reduced trader LP unbounded despite finite capacities")
        return TraderSolution("infeasible", mode, -np.inf, inp, lp=res)
    x = res.x
    gv, pv, zv = _clip_flows(x, g, p, z, rt.gen_cap, rt.pump_cap)
    return TraderSolution("optimal", mode, res.objective, inp,
                          x[s], np.maximum(x[u], 0), np.maximum(x[v], 0), gv, pv, zv, lp=res)


def solve_reduced_individual(inp: TraderInput) -> TraderSolution:
    """Per-arc bids with robust all-up delivery; typed infeasibility for bad targets."""
    return _reduced(inp, "individual")


def solve_reduced_collective(inp: TraderInput) -> TraderSolution:
    """Scalar bids per hour with arc-aggregated delivery and cut."""
    return _reduced(inp, "collective")


def repair_complementarity(sol: TraderSolution) -> TraderSolution:
    """Remove simultaneous generation and pumping on every arc-hour.

    The overlap is shifted into spill so that net outflow and net energy per
    arc stay unchanged; bids are untouched.
    """
    if not sol.feasible:
        return sol
    eta = np.asarray(sol.inp.ratings.gen_eff, float)
    zeta = np.asarray(sol.inp.ratings.inv_pump_eff, float)
    g, p, z = sol.g, sol.p, sol.z
    with np.errstate(divide="ignore", invalid="ignore"):
        by_g = np.where(zeta > 0, g / zeta, np.inf)
        by_p = np.where(eta > 0, p / eta, np.inf)
    overlap = (g > 0) & (p > 0)
    delta = np.where(overlap, np.minimum(by_g, by_p), 0.0)
    g2 = np.where(overlap & (by_g <= by_p), 0.0, g - zeta * delta)
    p2 = np.where(overlap & (by_p <= by_g), 0.0, p - eta * delta)
    z2 = z + (zeta - eta) * delta
    return replace(sol, g=g2, p=p2, z=z2)


@dataclass(frozen=True, eq=False)
class ContingentPolicy:
    """Closed-form activation-contingent flows of an individual solution."""

    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    g: np.ndarray
    p: np.ndarray
    z: np.ndarray
    gen_eff: np.ndarray
    inv_pump_eff: np.ndarray
    gen_cap: np.ndarray
    pump_cap: np.ndarray

    def flows(self, hour: int, rho_up: float, rho_down: float):
        """(g', p', z') for one hour given its realized activation."""
        t = hour
        energy = self.s[t] + rho_up * self.u[t] - rho_down * self.v[t]
        eta, zeta = self.gen_eff[t], self.inv_pump_eff[t]
        g, p, z = self.g[t], self.p[t], self.z[t]
        with np.errstate(divide="ignore", invalid="ignore"):
            gen = np.where(eta > 0, np.maximum(energy, 0.0) / eta, 0.0)
            pump_if_gen = np.where(zeta > 0, np.maximum(-energy, 0.0) / zeta, 0.0)
            pump_if_idle = np.where(zeta > 0, -energy / zeta, 0.0)
        generating = g > 0
        g2 = np.where(generating, gen, 0.0)
        p2 = np.where(generating, pump_if_gen, pump_if_idle)
        g2 = np.clip(g2, 0.0, self.gen_cap[t])
        p2 = np.clip(p2, 0.0, self.pump_cap[t])
        z2 = np.maximum(z + (g - p) - (g2 - p2), 0.0)
        return g2, p2, z2

    def path(self, rho_up: np.ndarray, rho_down: np.ndarray):
        """Flows (H, A) x 3 along one activation sequence."""
        out = [self.flows(t, rho_up[t], rho_down[t]) for t in range(len(rho_up))]
        return tuple(np.array(x) for x in zip(*out))


def recover_policy(sol: TraderSolution) -> ContingentPolicy:
    """Activation-contingent flows from a complementary individual solution."""
    if sol.mode != "individual" or not sol.feasible:
        raise PolicyPreconditionError("closed-form recovery needs a feasible individual solution")
    if np.any((sol.g > 0) & (sol.p > 0)):
        raise PolicyPreconditionError("solution generates and pumps on the same arc-hour; repair first")
    r = sol.inp.ratings
    return ContingentPolicy(sol.s, sol.u, sol.v, sol.g, sol.p, sol.z,
                            np.asarray(r.gen_eff, float), np.asarray(r.inv_pump_eff, float),
                            np.asarray(r.gen_cap, float), np.asarray(r.pump_cap, float))


def _valuation(lp: LinearProgram, theta_ns: np.ndarray, m_ns: np.ndarray, flows, inflow_total: np.ndarray,
               theta_full: np.ndarray) -> None:
    """Add theta^T M (g - p + z) for each (g, p, z) in ``flows`` to the objective."""
    w = theta_ns @ m_ns  # per-arc value of one m3 of net outflow
    for g, p, z in flows:
        T = g.shape[0]
        lp.set_objective(g, np.broadcast_to(w, (T, w.size)))
        lp.set_objective(p, -np.broadcast_to(w, (T, w.size)))
        lp.set_objective(z, np.broadcast_to(w, (T, w.size)))
    lp.objective_constant += float(theta_full @ inflow_total)


def _check_water_values(inp: TraderInput) -> np.ndarray:
    if inp.water_values is None:
        raise ValueError("water values required")
    theta = np.array(inp.water_values, dtype=float)
    if theta.shape != (inp.cascade.n_reservoirs,):
        raise ValueError("water values must have one entry per reservoir")
    theta[-1] = 0.0
    return theta


def solve_day1_variant(inp: TraderInput, strategy: Strategy = "reserves") -> TraderSolution:
    """Collective day problem valued by water values instead of a target.

    ``reserves`` keeps a robust (all-up) and a nominal (expected activation)
    trajectory; ``spot_only`` forbids reserve bids; ``deterministic`` keeps
    only the nominal trajectory and caps reserve bids by the spot bid.
    """
    theta = _check_water_values(inp)
    H, A = inp.hours, inp.n_arcs
    K = inp.cascade.n_reservoirs - 1
    rt = inp.ratings
    eta, zeta = np.asarray(rt.gen_eff, float), np.asarray(rt.inv_pump_eff, float)
    m_ns = inp.incidence[:K]
    lo, hi = inp.lower[:, :K], inp.upper[:, :K]
    lp = LinearProgram()
    s, u, v = _bid_vars(lp, (H,), inp.coefs, reserves=strategy != "spot_only")
    spill = []
    g = p = z = None
    if strategy != "deterministic":
        g, p, z = add_flows(lp, "robust", rt)
        add_delivery(lp, "robust", s, u, v, 1.0, 0.0, g, p, eta, zeta)
        add_cut(lp, "robust", s, v, zeta, np.asarray(rt.pump_cap, float))
        add_balance(lp, "robust", m_ns, g, p, z, inp.inflows, lo, hi, start=inp.start_level)
        spill.append(z)
    gn, pn, zn = add_flows(lp, "nominal", rt)
    add_delivery(lp, "nominal", s, u, v, inp.coefs.rho_up, inp.coefs.rho_down, gn, pn, eta, zeta)
    add_balance(lp, "nominal", m_ns, gn, pn, zn, inp.inflows, lo, hi, start=inp.start_level)
    spill.append(zn)
    if strategy == "deterministic":
        rows = np.arange(H)
        lp.add_constraints("reserve_cap", np.tile(rows, 3), np.concatenate([u, v, s]),
                           np.concatenate([np.ones(2 * H), -np.ones(H)]), "<=", np.zeros(H))
    _valuation(lp, theta[:K], m_ns, [(gn, pn, zn)], inp.inflows.sum(axis=0), theta)
    res = _solve_min_spill(lp, spill)
    if not res.optimal:
        raise InternalConsistencyError(
            f"day problem {res.status}: inflows exceed discharge capacity against the upper bounds")
    x = res.x
    gnv, pnv, znv = _clip_flows(x, gn, pn, zn, rt.gen_cap, rt.pump_cap)
    if g is None:
        gv, pv, zv = gnv, pnv, znv
    else:
        gv, pv, zv = _clip_flows(x, g, p, z, rt.gen_cap, rt.pump_cap)
    return TraderSolution("optimal", "collective", res.objective, inp, x[s],
                          np.maximum(x[u], 0), np.maximum(x[v], 0), gv, pv, zv, gnv, pnv, znv, lp=res)


@dataclass
class HourDispatch:
    g: np.ndarray
    p: np.ndarray
    z: np.ndarray
    objective: float


def truncated_dispatch(inp: TraderInput, bids: TraderSolution, hour: int, level: np.ndarray,
                       rho_up: float, rho_down: float, strategy: Strategy = "reserves") -> HourDispatch:
    """Flows for ``hour`` honoring the realized call, with the rest of the day kept safe.

    ``level`` is the realized start-of-hour level (R,), which already contains
    the effect of the dispatched past hours. Later hours keep a robust and a
    nominal trajectory (nominal only for ``deterministic``). With water values
    the objective is the value of the water left after hour H along the
    nominal continuation; without them (target mode) the robust continuation
    must reach the target and the dispatch minimizes spill.
    """
    H, A = inp.hours, inp.n_arcs
    K = inp.cascade.n_reservoirs - 1
    rt = inp.ratings
    eta, zeta = np.asarray(rt.gen_eff, float), np.asarray(rt.inv_pump_eff, float)
    gcap, pcap = np.asarray(rt.gen_cap, float), np.asarray(rt.pump_cap, float)
    m_ns = inp.incidence[:K]
    lo, hi = inp.lower[:, :K], inp.upper[:, :K]
    s, u, v = (np.asarray(b, dtype=float) for b in (bids.s, bids.u, bids.v))
    t = hour
    lp = LinearProgram()
    g0 = lp.add_variables("now_g", (1, A), 0.0, gcap[t])
    p0 = lp.add_variables("now_p", (1, A), 0.0, pcap[t])
    z0 = lp.add_variables("now_z", (1, A), 0.0, np.inf)
    energy = s[t] + rho_up * u[t] - rho_down * v[t]
    lp.add_constraints("now_delivery", np.zeros(2 * A), np.concatenate([g0[0], p0[0]]),
                       np.concatenate([eta[t], -zeta[t]]), "=", [energy])
    lev0 = add_balance(lp, "now", m_ns, g0, p0, z0, inp.inflows[t:t + 1], lo[t:t + 1], hi[t:t + 1],
                       start=np.asarray(level, dtype=float))
    spill = [z0]
    nominal = None
    rest = np.arange(t + 1, H)
    n = rest.size
    robust_lev = lev0
    if n:
        rest_rt = HourlyRatings(gcap[rest], pcap[rest], eta[rest], zeta[rest])
        sub = [("nominal", inp.coefs.rho_up[rest], inp.coefs.rho_down[rest])]
        if strategy != "deterministic":
            sub.insert(0, ("robust", np.ones(n), np.zeros(n)))
        for name, cu, cv in sub:
            g, p, z = add_flows(lp, name, rest_rt)
            rows = np.arange(n)
            ra = np.repeat(rows, A)
            lp.add_constraints(f"{name}_delivery", np.concatenate([ra, ra]),
                               np.concatenate([g.ravel(), p.ravel()]),
                               np.concatenate([eta[rest].ravel(), -zeta[rest].ravel()]), "=",
                               s[rest] + cu * u[rest] - cv * v[rest])
            lev = add_balance(lp, name, m_ns, g, p, z, inp.inflows[rest], lo[rest], hi[rest],
                              first_prev=lev0[0])
            spill.append(z)
            if name == "nominal":
                nominal = (g, p, z)
            else:
                robust_lev = lev
    if inp.water_values is not None:
        theta = _check_water_values(inp)
        flows = [(g0, p0, z0)] + ([nominal] if nominal is not None else [])
        _valuation(lp, theta[:K], m_ns, flows, np.zeros(K + 1), theta)
    if inp.target is not None:
        lp.add_constraints("target", np.arange(K), robust_lev[-1], np.ones(K), ">=", inp.target[:K])
    # spill now only what cannot be kept; continuation spill breaks remaining ties
    res = _solve_min_spill(lp, spill, [1.0] + [CONTINUATION_SPILL_WEIGHT] * (len(spill) - 1))
    if not res.optimal:
        raise DispatchInfeasible(f"hour {t}: commitment undeliverable at activation ({rho_up}, {rho_down})")
    x = res.x
    return HourDispatch(np.clip(x[g0[0]], 0.0, gcap[t]), np.clip(x[p0[0]], 0.0, pcap[t]),
                        np.maximum(x[z0[0]], 0.0), res.objective)
