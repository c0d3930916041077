"""Extensive-form one-day trader problems over the full activation tree.

This is the brute-force reference for the reduced LPs. Bids are fixed before
the day starts; flows may depend on the activation history, so there is one
copy of (g, p, z) per tree node. A node at depth t (0-based hour) is encoded as
an integer in [0, 3**(t+1)) whose base-3 digits are the outcomes so far, most
recent last; its parent is ``node // 3``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lpcore import LinearProgram, LpSolution, solve
from .stochastic import ACTIVATION_OUTCOMES, ActivationModel
from .trader import Mode, TraderInput

MAX_HOURS = 8


@dataclass(frozen=True, eq=False)
class ActivationTree:
    hours: int
    outcomes: list[np.ndarray]  # per depth: outcome index of each node
    probabilities: list[np.ndarray]  # per depth: unconditional node probability

    @property
    def leaves(self) -> np.ndarray:
        """(3**H, H) outcome indices of every leaf path."""
        n = 3 ** self.hours
        digits = np.empty((n, self.hours), dtype=np.int64)
        node = np.arange(n)
        for t in range(self.hours - 1, -1, -1):
            digits[:, t] = node % 3
            node //= 3
        return digits

    @property
    def leaf_probabilities(self) -> np.ndarray:
        return self.probabilities[-1]

    def rho(self, depth: int) -> tuple[np.ndarray, np.ndarray]:
        act = ACTIVATION_OUTCOMES[self.outcomes[depth]]
        return act[:, 0].astype(float), act[:, 1].astype(float)


def enumerate_activation_tree(hours: int, model: ActivationModel) -> ActivationTree:
    """Complete tree of hourly activation outcomes."""
    if not 1 <= hours <= MAX_HOURS:
        raise ValueError(f"tree depth must be in 1..{MAX_HOURS}, got {hours}")
    probs = model.probabilities
    outcomes, node_probs = [], []
    prev = np.ones(1)
    for t in range(hours):
        out = np.tile(np.arange(3), 3 ** t)
        prev = np.repeat(prev, 3) * probs[out]
        outcomes.append(out)
        node_probs.append(prev)
    return ActivationTree(hours, outcomes, node_probs)


@dataclass(eq=False)
class OracleSolution:
    status: str
    objective: float
    s: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    g: list[np.ndarray] | None = None  # per depth: (nodes, A)
    p: list[np.ndarray] | None = None
    z: list[np.ndarray] | None = None
    lp: LpSolution | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def solve_extensive_trader(inp: TraderInput, mode: Mode, tree: ActivationTree) -> OracleSolution:
    """Maximize expected bid revenue with node-indexed flows on every tree path."""
    if inp.target is None:
        raise ValueError("the extensive trader problem needs an end-of-day target")
    H = inp.hours
    if tree.hours != H:
        raise ValueError("tree depth does not match the number of hours")
    A = inp.n_arcs
    K = inp.cascade.n_reservoirs - 1
    M = inp.incidence[:K]
    r = inp.ratings
    gcap, pcap = np.asarray(r.gen_cap, float), np.asarray(r.pump_cap, float)
    eta, zeta = np.asarray(r.gen_eff, float), np.asarray(r.inv_pump_eff, float)
    cf = inp.coefs
    lp = LinearProgram()
    shape = (H, A) if mode == "individual" else (H,)
    col = (lambda a: a[:, None]) if mode == "individual" else (lambda a: a)
    s = lp.add_variables("s", shape, -np.inf, np.inf, np.broadcast_to(col(np.asarray(cf.spot, float)), shape))
    u = lp.add_variables("u", shape, 0.0, np.inf, np.broadcast_to(col(np.asarray(cf.up, float)), shape))
    v = lp.add_variables("v", shape, 0.0, np.inf, np.broadcast_to(col(np.asarray(cf.down, float)), shape))

    gs, ps, zs, levels = [], [], [], []
    for t in range(H):
        n = 3 ** (t + 1)
        g = lp.add_variables(f"g{t}", (n, A), 0.0, np.broadcast_to(gcap[t], (n, A)))
        p = lp.add_variables(f"p{t}", (n, A), 0.0, np.broadcast_to(pcap[t], (n, A)))
        z = lp.add_variables(f"z{t}", (n, A), 0.0, np.inf)
        lev = lp.add_variables(f"w{t}", (n, K), np.broadcast_to(inp.lower[t, :K], (n, K)),
                               np.broadcast_to(inp.upper[t, :K], (n, K)))
        ru, rd = tree.rho(t)
        # delivery at each node with its own realized activation
        rows_r, cols_r, vals_r = [], [], []
        if mode == "individual":
            idx = np.arange(n * A).reshape(n, A)
            for var, coef in ((np.broadcast_to(s[t], (n, A)), np.ones((n, A))),
                              (np.broadcast_to(u[t], (n, A)), np.broadcast_to(ru[:, None], (n, A))),
                              (np.broadcast_to(v[t], (n, A)), -np.broadcast_to(rd[:, None], (n, A))),
                              (g, -np.broadcast_to(eta[t], (n, A))), (p, np.broadcast_to(zeta[t], (n, A)))):
                rows_r.append(idx.ravel()); cols_r.append(var.ravel()); vals_r.append(coef.ravel())
            m = n * A
        else:
            idx = np.arange(n)
            rows_r += [idx, idx, idx]
            cols_r += [np.full(n, s[t]), np.full(n, u[t]), np.full(n, v[t])]
            vals_r += [np.ones(n), ru, -rd]
            rows_r += [np.repeat(idx, A)] * 2
            cols_r += [g.ravel(), p.ravel()]
            vals_r += [-np.tile(eta[t], n), np.tile(zeta[t], n)]
            m = n
        rr, cc, vv = np.concatenate(rows_r), np.concatenate(cols_r), np.concatenate(vals_r)
        keep = vv != 0
        lp.add_constraints(f"delivery{t}", rr[keep], cc[keep], vv[keep], "=", np.zeros(m))
        # reservoir balance along the tree
        rb, cb, vb = [], [], []
        rhs = np.broadcast_to(inp.inflows[t, :K], (n, K)).copy()
        for k in range(K):
            rows = np.arange(n) * K + k
            rb.append(rows); cb.append(lev[:, k]); vb.append(np.ones(n))
            if t == 0:
                rhs[:, k] += inp.start_level[k]
            else:
                rb.append(rows); cb.append(levels[-1][np.arange(n) // 3, k]); vb.append(-np.ones(n))
            for a in np.flatnonzero(M[k]):
                for var, sign in ((g, -1.0), (p, 1.0), (z, -1.0)):
                    rb.append(rows); cb.append(var[:, a]); vb.append(np.full(n, sign * M[k, a]))
        lp.add_constraints(f"balance{t}", np.concatenate(rb), np.concatenate(cb), np.concatenate(vb),
                           "=", rhs.ravel())
        gs.append(g); ps.append(p); zs.append(z); levels.append(lev)

    n = 3 ** H
    lp.add_constraints("target", np.arange(n * K), levels[-1].ravel(), np.ones(n * K), ">=",
                       np.broadcast_to(inp.target[:K], (n, K)).ravel())
    res = solve(lp)
    if not res.optimal:
        return OracleSolution(res.status, -np.inf, lp=res)
    x = res.x
    return OracleSolution("optimal", res.objective, x[s], x[u], x[v],
                          [x[g] for g in gs], [x[p] for p in ps], [x[z] for z in zs], lp=res)


FlowRule = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


def policy_residuals(inp: TraderInput, tree: ActivationTree, s, u, v, rule: FlowRule) -> dict[str, float]:
    """Worst constraint violations of a flow rule over every leaf path.

    ``rule(rho_up, rho_down)`` maps an activation sequence (H,) to flows
    (g, p, z), each (H, A); bids may be per arc (individual) or scalar.
    """
    K = inp.cascade.n_reservoirs - 1
    M = inp.incidence
    r = inp.ratings
    gcap, pcap = np.asarray(r.gen_cap, float), np.asarray(r.pump_cap, float)
    eta, zeta = np.asarray(r.gen_eff, float), np.asarray(r.inv_pump_eff, float)
    worst = {"delivery": 0.0, "ratings": 0.0, "band": 0.0, "target": 0.0, "nonneg": 0.0}
    for leaf in tree.leaves:
        act = ACTIVATION_OUTCOMES[leaf].astype(float)
        ru, rd = act[:, 0], act[:, 1]
        g, p, z = rule(ru, rd)
        if np.ndim(s) == 2:
            energy = s + ru[:, None] * u - rd[:, None] * v
            made = eta * g - zeta * p
        else:
            energy = s + ru * u - rd * v
            made = (eta * g).sum(axis=1) - (zeta * p).sum(axis=1)
        worst["delivery"] = max(worst["delivery"], float(np.abs(energy - made).max()))
        worst["ratings"] = max(worst["ratings"], float(np.maximum(g - gcap, 0).max()),
                               float(np.maximum(p - pcap, 0).max()))
        worst["nonneg"] = max(worst["nonneg"], float(np.maximum(-np.concatenate([g, p, z]), 0).max()))
        lev = inp.start_level + np.cumsum(inp.inflows + (g - p + z) @ M.T, axis=0)
        band = np.maximum(inp.lower[:, :K] - lev[:, :K], lev[:, :K] - inp.upper[:, :K])
        worst["band"] = max(worst["band"], float(np.maximum(band, 0).max()))
        if inp.target is not None:
            worst["target"] = max(worst["target"], float(np.maximum(inp.target[:K] - lev[-1, :K], 0).max()))
    return worst
