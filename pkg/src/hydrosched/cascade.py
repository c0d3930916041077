"""Reservoir network topology, physical ratings and the spill construction.

Reservoirs are ordered so that the dummy sink (the downstream river) is the
last index. Volumes are in m3, energies in MWh. Unbounded reservoir capacity
is represented by ``UNBOUNDED`` (``numpy.inf``), which the LP layer maps to a
missing bound rather than a large number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

UNBOUNDED = np.inf


class CascadeError(ValueError):
    """Raised for structurally invalid cascades or impossible requests."""


def _hourly(values: np.ndarray, start: int, n: int) -> np.ndarray:
    """Return ``n`` hourly rows starting at ``start`` with cyclic wrap.

    ``values`` is either a constant per-entity vector or a (T, k) profile.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.broadcast_to(values, (n, values.size)).copy()
    idx = (start + np.arange(n)) % values.shape[0]
    return values[idx].copy()


@dataclass(frozen=True, eq=False)
class Cascade:
    """Reservoir DAG with per-hour volume bounds.

    ``lower``/``upper`` may be constant (R,) vectors or (T, R) profiles that
    repeat cyclically. The sink row must be 0 / UNBOUNDED.
    """

    reservoirs: tuple[str, ...]
    arcs: tuple[tuple[str, str], ...]
    initial_levels: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    arc_names: tuple[str, ...] = field(default=())

    @classmethod
    def build(
        cls,
        reservoirs: Sequence[str],
        arcs: Sequence[tuple[str, str]],
        initial_levels: Sequence[float],
        lower: Sequence[float] | np.ndarray,
        upper: Sequence[float] | np.ndarray,
        sink: str | None = None,
        arc_names: Sequence[str] | None = None,
    ) -> "Cascade":
        """Construct a cascade, moving ``sink`` (default: last id) to the end."""
        names = [str(r) for r in reservoirs]
        if len(set(names)) != len(names):
            raise CascadeError("duplicate reservoir ids")
        sink = names[-1] if sink is None else str(sink)
        if sink not in names:
            raise CascadeError(f"sink {sink!r} is not a reservoir")
        order = [i for i, r in enumerate(names) if r != sink] + [names.index(sink)]
        w0 = np.asarray(initial_levels, dtype=float)[order]
        lo = np.asarray(lower, dtype=float)[..., order]
        hi = np.asarray(upper, dtype=float)[..., order]
        arc_pairs = tuple((str(a), str(b)) for a, b in arcs)
        if arc_names is None:
            arc_names = [f"a{i + 1}" for i in range(len(arc_pairs))]
        return cls(
            reservoirs=tuple(names[i] for i in order),
            arcs=arc_pairs,
            initial_levels=w0,
            lower=lo,
            upper=hi,
            arc_names=tuple(arc_names),
        )

    @property
    def n_reservoirs(self) -> int:
        return len(self.reservoirs)

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def sink(self) -> int:
        return self.n_reservoirs - 1

    def index(self, reservoir: str) -> int:
        return self.reservoirs.index(reservoir)

    @property
    def incidence(self) -> np.ndarray:
        """R x A matrix: -1 where an arc leaves a reservoir, +1 where it enters."""
        m = np.zeros((self.n_reservoirs, self.n_arcs))
        pos = {r: i for i, r in enumerate(self.reservoirs)}
        for a, (src, dst) in enumerate(self.arcs):
            if src in pos:
                m[pos[src], a] -= 1.0
            if dst in pos:
                m[pos[dst], a] += 1.0
        return m

    def bounds(self, start_hour: int, n_hours: int) -> tuple[np.ndarray, np.ndarray]:
        """Hourly (lower, upper) arrays of shape (n_hours, R)."""
        return _hourly(self.lower, start_hour, n_hours), _hourly(self.upper, start_hour, n_hours)

    def with_initial_levels(self, levels: np.ndarray) -> "Cascade":
        return Cascade(
            self.reservoirs, self.arcs, np.asarray(levels, dtype=float).copy(),
            self.lower, self.upper, self.arc_names,
        )


@dataclass(frozen=True, eq=False)
class HourlyRatings:
    """Per-arc generator/pump capacities [m3/h] and efficiencies [MWh/m3].

    Each field is a constant (A,) vector or a (T, A) cyclic profile.
    """

    gen_cap: np.ndarray
    pump_cap: np.ndarray
    gen_eff: np.ndarray
    inv_pump_eff: np.ndarray

    def window(self, start_hour: int, n_hours: int) -> "HourlyRatings":
        """Ratings for ``n_hours`` consecutive hours, each field (n_hours, A)."""
        return HourlyRatings(
            _hourly(self.gen_cap, start_hour, n_hours),
            _hourly(self.pump_cap, start_hour, n_hours),
            _hourly(self.gen_eff, start_hour, n_hours),
            _hourly(self.inv_pump_eff, start_hour, n_hours),
        )

    @property
    def n_arcs(self) -> int:
        return np.asarray(self.gen_cap).shape[-1]


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise CascadeError("; ".join(self.violations))


def _is_acyclic(n: int, edges: list[tuple[int, int]]) -> bool:
    indeg = [0] * n
    out: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    stack = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while stack:
        i = stack.pop()
        seen += 1
        for j in out[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                stack.append(j)
    return seen == n


def validate_cascade(c: Cascade, r: HourlyRatings) -> ValidationReport:
    """Check the structural assumptions; returns every violation found."""
    rep = ValidationReport()
    R, A = c.n_reservoirs, c.n_arcs
    pos = {name: i for i, name in enumerate(c.reservoirs)}
    edges = []
    for a, (src, dst) in enumerate(c.arcs):
        if src not in pos or dst not in pos:
            rep.violations.append(f"arc {c.arc_names[a]}: unknown reservoir")
            continue
        edges.append((pos[src], pos[dst]))
    m = c.incidence
    cols_ok = np.all((m == -1).sum(axis=0) == 1) and np.all((m == 1).sum(axis=0) == 1)
    if A and not cols_ok:
        rep.violations.append("incidence column without exactly one -1 and one +1")
    if not _is_acyclic(R, edges):
        rep.violations.append("not acyclic")
    sink = c.sink
    if any(a == sink for a, _ in edges):
        rep.violations.append("sink has an outgoing arc")
    has_out = {a for a, _ in edges}
    for i in range(R - 1):
        if i not in has_out:
            rep.violations.append(f"reservoir {c.reservoirs[i]}: no outgoing arc")

    for name, arr in (("gen_cap", r.gen_cap), ("pump_cap", r.pump_cap),
                      ("gen_eff", r.gen_eff), ("inv_pump_eff", r.inv_pump_eff)):
        arr = np.asarray(arr, dtype=float)
        if arr.shape[-1] != A:
            rep.violations.append(f"{name}: expected {A} arcs, got {arr.shape[-1]}")
            return rep
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            rep.violations.append(f"{name}: negative or NaN entries")
    pump = np.atleast_2d(np.asarray(r.pump_cap, dtype=float))
    for a, (_, dst) in enumerate(edges):
        if dst == sink and np.any(pump[:, a] > 0):
            rep.violations.append(f"arc {c.arc_names[a]}: pump into sink")
    eta = np.atleast_2d(np.asarray(r.gen_eff, dtype=float))
    zeta = np.atleast_2d(np.asarray(r.inv_pump_eff, dtype=float))
    eta, zeta, pump = np.broadcast_arrays(eta, zeta, pump)
    bad = (pump > 0) & ~(eta < zeta)
    for a in np.flatnonzero(bad.any(axis=0)):
        rep.violations.append(f"arc {c.arc_names[a]}: generator efficiency not below pump ratio")

    w0 = np.asarray(c.initial_levels, dtype=float)
    lo = np.atleast_2d(np.asarray(c.lower, dtype=float))
    hi = np.atleast_2d(np.asarray(c.upper, dtype=float))
    if w0.shape != (R,) or lo.shape[-1] != R or hi.shape[-1] != R:
        rep.violations.append("bound or initial-level dimension mismatch")
        return rep
    if np.any(lo > hi):
        rep.violations.append("lower bound above upper bound")
    if np.any(lo[:, sink] != 0) or np.any(np.isfinite(hi[:, sink])):
        rep.violations.append("sink bounds must be 0 and unbounded")
    if np.any(np.isinf(hi[:, :sink])):
        rep.violations.append("non-sink reservoir without finite capacity")
    return rep


def path_to_sink(c: Cascade, reservoir: int | str) -> list[int]:
    """Arc indices of the lexicographically smallest arc-id path to the sink."""
    r = c.index(reservoir) if isinstance(reservoir, str) else int(reservoir)
    if r == c.sink:
        raise CascadeError("path requested from the sink")
    pos = {name: i for i, name in enumerate(c.reservoirs)}
    out: dict[int, list[int]] = {}
    for a, (src, dst) in enumerate(c.arcs):
        out.setdefault(pos[src], []).append(a)

    def dfs(node: int, visited: frozenset) -> list[int] | None:
        if node == c.sink:
            return []
        for a in out.get(node, []):
            nxt = pos[c.arcs[a][1]]
            if nxt in visited:
                continue
            rest = dfs(nxt, visited | {nxt})
            if rest is not None:
                return [a] + rest
        return None

    path = dfs(r, frozenset({r}))
    if path is None:
        raise CascadeError(f"no path from {c.reservoirs[r]} to the sink")
    return path


def spill_to_match(c: Cascade, deficit: np.ndarray) -> np.ndarray:
    """Nonnegative spill z with M z = [h; -sum(h)] for deficits h <= 0.

    Each reservoir's deficit is routed as a path flow along its path to the
    sink; the result is the superposition of those path flows.
    """
    h = np.asarray(deficit, dtype=float)
    if h.shape != (c.n_reservoirs - 1,):
        raise CascadeError(f"expected {c.n_reservoirs - 1} deficits, got shape {h.shape}")
    if np.any(h > 0):
        raise CascadeError("spill can only absorb nonpositive deficits")
    z = np.zeros(c.n_arcs)
    for r in np.flatnonzero(h < 0):
        z[path_to_sink(c, int(r))] -= h[r]
    return z
