"""Linear-program assembly and solution with primal and dual extraction.

Models are always maximizations. Variables and constraints are declared in
named blocks so that callers keep index arrays instead of string names. The
solve is delegated to the HiGHS solver shipped with SciPy; the wrapper turns
its minimization marginals into maximization duals (d objective / d rhs) and
certifies each optimal answer with primal residual and duality gap checks.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

log = logging.getLogger(__name__)

Sense = Literal["<=", "=", ">="]

FEAS_TOL = 1e-7
GAP_TOL = 1e-6
# Tighter than the certified tolerances so that the checks have headroom.
_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


class LpModelError(ValueError):
    """Malformed model: bad indices, inconsistent bounds or dimensions."""


class LpNumericalError(RuntimeError):
    """The solver failed for numerical reasons (distinct from infeasibility)."""


@dataclass
class _Block:
    name: str
    start: int
    size: int


@dataclass
class LinearProgram:
    """Sparse maximization LP built from variable and constraint blocks."""

    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    obj: list = field(default_factory=list)
    var_blocks: list = field(default_factory=list)
    con_blocks: list = field(default_factory=list)
    _rows: list = field(default_factory=list)
    _cols: list = field(default_factory=list)
    _vals: list = field(default_factory=list)
    _sense: list = field(default_factory=list)
    _rhs: list = field(default_factory=list)
    n_vars: int = 0
    n_cons: int = 0
    objective_constant: float = 0.0

    def add_variables(self, name: str, shape, lb=0.0, ub=np.inf, obj=0.0) -> np.ndarray:
        """Declare a block of variables; returns their indices with ``shape``."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        lo = np.broadcast_to(np.asarray(lb, dtype=float), shape).ravel()
        hi = np.broadcast_to(np.asarray(ub, dtype=float), shape).ravel()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise LpModelError(f"NaN bound in variable block {name!r}")
        if np.any(lo > hi):
            raise LpModelError(f"lower bound above upper bound in variable block {name!r}")
        self.lb.append(lo)
        self.ub.append(hi)
        self.obj.append(np.broadcast_to(np.asarray(obj, dtype=float), shape).ravel())
        idx = np.arange(self.n_vars, self.n_vars + n).reshape(shape)
        self.var_blocks.append(_Block(name, self.n_vars, n))
        self.n_vars += n
        return idx

    def set_objective(self, idx, coef) -> None:
        """Add ``coef`` to the objective coefficients of variables ``idx``."""
        flat = np.concatenate(self.obj) if self.obj else np.zeros(0)
        idx = np.asarray(idx)
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        np.add.at(flat, idx.ravel(), coef.ravel())
        self.obj = [flat]

    def add_constraints(self, name: str, rows, cols, vals, sense: Sense | np.ndarray, rhs) -> np.ndarray:
        """Add ``len(rhs)`` rows from COO triplets with row ids local to the block.

        Returns the global row indices of the new block.
        """
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float)).ravel()
        m = rhs.size
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape).ravel()
        if rows.shape != cols.shape:
            raise LpModelError(f"row/col length mismatch in constraint block {name!r}")
        if rows.size and (rows.min() < 0 or rows.max() >= m):
            raise LpModelError(f"row index out of range in constraint block {name!r}")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise LpModelError(f"undeclared variable referenced in constraint block {name!r}")
        if np.any(~np.isfinite(rhs)) or np.any(~np.isfinite(vals)):
            raise LpModelError(f"non-finite data in constraint block {name!r}")
        senses = np.broadcast_to(np.asarray(sense), (m,))
        if not np.all(np.isin(senses, ("<=", "=", ">="))):
            raise LpModelError(f"unknown constraint sense in block {name!r}")
        self._rows.append(rows + self.n_cons)
        self._cols.append(cols)
        self._vals.append(vals)
        self._sense.append(senses.copy())
        self._rhs.append(rhs)
        out = np.arange(self.n_cons, self.n_cons + m)
        self.con_blocks.append(_Block(name, self.n_cons, m))
        self.n_cons += m
        return out

    # -- assembled views -------------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        if not self._rows:
            return sp.csr_matrix((0, self.n_vars))
        return sp.csr_matrix(
            (np.concatenate(self._vals), (np.concatenate(self._rows), np.concatenate(self._cols))),
            shape=(self.n_cons, self.n_vars),
        )

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate(self._rhs) if self._rhs else np.zeros(0)

    @property
    def senses(self) -> np.ndarray:
        return np.concatenate(self._sense) if self._sense else np.zeros(0, dtype="<U2")

    @property
    def objective(self) -> np.ndarray:
        return np.concatenate(self.obj) if self.obj else np.zeros(0)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.lb:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(self.lb), np.concatenate(self.ub)

    def shift_rhs(self, rows, delta) -> None:
        """Add ``delta`` to the rhs of global rows ``rows`` (used for sensitivity)."""
        flat = self.rhs.copy()
        np.add.at(flat, np.asarray(rows).ravel(), np.broadcast_to(delta, np.asarray(rows).ravel().shape))
        self._rhs = [flat]

    def var_name(self, j: int) -> str:
        for b in self.var_blocks:
            if b.start <= j < b.start + b.size:
                return f"{b.name}_{j - b.start}"
        raise LpModelError(f"variable {j} not declared")

    def con_name(self, i: int) -> str:
        for b in self.con_blocks:
            if b.start <= i < b.start + b.size:
                return f"{b.name}_{i - b.start}"
        raise LpModelError(f"constraint {i} not declared")

    def to_lp_string(self) -> str:
        """Export in CPLEX LP text format for external cross-checks."""

        def term(coef: float, j: int, first: bool) -> str:
            sign = "-" if coef < 0 else ("" if first else "+")
            return f"{sign} {abs(coef):.17g} {self.var_name(j)}".strip()

        lines = ["\\ exported by hydrosched", "Maximize"]
        c = self.objective
        nz = np.flatnonzero(c)
        obj_terms = [term(c[j], j, k == 0) for k, j in enumerate(nz)]
        lines.append(" obj: " + (" ".join(obj_terms) if obj_terms else "0 " + self.var_name(0)))
        lines.append("Subject To")
        a = self.matrix().tocsr()
        op = {"<=": "<=", "=": "=", ">=": ">="}
        for i in range(self.n_cons):
            lo, hi = a.indptr[i], a.indptr[i + 1]
            terms = [term(v, j, k == 0) for k, (j, v) in enumerate(zip(a.indices[lo:hi], a.data[lo:hi]))]
            body = " ".join(terms) if terms else "0 " + self.var_name(0)
            lines.append(f" {self.con_name(i)}: {body} {op[self.senses[i]]} {self.rhs[i]:.17g}")
        lines.append("Bounds")
        lb, ub = self.bounds
        for j in range(self.n_vars):
            n = self.var_name(j)
            lo = "-inf" if np.isneginf(lb[j]) else f"{lb[j]:.17g}"
            hi = "+inf" if np.isposinf(ub[j]) else f"{ub[j]:.17g}"
            lines.append(f" {lo} <= {n} <= {hi}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: Literal["optimal", "infeasible", "unbounded"]
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = np.nan
    primal_residual: float = np.nan
    duality_gap: float = np.nan
    wall_seconds: float = 0.0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve(lp: LinearProgram, time_limit: float | None = None) -> LpSolution:
    """Solve ``lp`` (maximize) and return primal values and duals.

    Duals are d(optimal objective)/d(rhs) for every row, so a binding ``<=``
    row has a nonnegative dual and a binding ``>=`` row a nonpositive one.
    """
    if lp.n_vars == 0:
        raise LpModelError("model has no variables")
    a = lp.matrix()
    rhs = lp.rhs
    senses = lp.senses
    c = lp.objective
    lb, ub = lp.bounds

    eq = senses == "="
    le = senses == "<="
    ge = senses == ">="
    ineq = le | ge
    flip = np.where(ge, -1.0, 1.0)
    a_ub = (sp.diags(flip[ineq]) @ a[ineq]) if ineq.any() else None
    b_ub = (flip * rhs)[ineq] if ineq.any() else None
    a_eq = a[eq] if eq.any() else None
    b_eq = rhs[eq] if eq.any() else None
    bounds = np.column_stack([np.where(np.isneginf(lb), -np.inf, lb), np.where(np.isposinf(ub), np.inf, ub)])

    options = dict(_HIGHS_OPTIONS)
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    t0 = time.perf_counter()
    res = linprog(-c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options=options)
    wall = time.perf_counter() - t0

    if res.status == 2:
        return LpSolution("infeasible", wall_seconds=wall, message=res.message)
    if res.status == 3:
        return LpSolution("unbounded", wall_seconds=wall, message=res.message)
    if res.status != 0:
        raise LpNumericalError(f"solver failed (status {res.status}): {res.message}")

    x = res.x
    duals = np.zeros(lp.n_cons)
    if ineq.any():
        # minimization marginals are d(min)/d(b_ub); undo the negations
        duals[ineq] = -res.ineqlin.marginals * flip[ineq]
    if eq.any():
        duals[eq] = -res.eqlin.marginals
    primal_obj = float(c @ x)

    # certificate: primal residuals and the dual objective of the min form
    ax = a @ x
    viol = np.zeros_like(rhs)
    viol[le] = np.maximum(ax[le] - rhs[le], 0)
    viol[ge] = np.maximum(rhs[ge] - ax[ge], 0)
    viol[eq] = np.abs(ax[eq] - rhs[eq])
    bviol = np.maximum(np.maximum(lb - x, x - ub), 0)
    residual = float(max(viol.max(initial=0.0), bviol.max(initial=0.0)))
    dual_obj = float(rhs @ duals)
    rl, ru = res.lower.marginals, res.upper.marginals
    fin_l, fin_u = np.isfinite(lb), np.isfinite(ub)
    dual_obj -= float(lb[fin_l] @ rl[fin_l] + ub[fin_u] @ ru[fin_u])
    gap = abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj))
    if gap > 1e3 * GAP_TOL:
        raise LpNumericalError(f"duality gap {gap:.3e} after an optimal exit")
    if gap > GAP_TOL or residual > FEAS_TOL * max(1.0, np.abs(rhs).max(initial=0.0)):
        log.warning("weak certificate: residual %.3e, relative gap %.3e", residual, gap)
    return LpSolution(
        "optimal", x=x, duals=duals, objective=primal_obj + lp.objective_constant,
        primal_residual=residual, duality_gap=gap, wall_seconds=wall, message=res.message,
    )
