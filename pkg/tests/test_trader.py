import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrosched.cascade import UNBOUNDED, Cascade, HourlyRatings
from hydrosched.oracle import enumerate_activation_tree, policy_residuals, solve_extensive_trader
from hydrosched.stochastic import ACTIVATION_OUTCOMES, BidCoefficients
from hydrosched.trader import (DispatchInfeasible, PolicyPreconditionError, TraderInput, TraderSolution,
                               recover_policy, repair_complementarity, solve_day1_variant,
                               solve_reduced_collective, solve_reduced_individual, trajectory,
                               truncated_dispatch)
from instances import random_trader_case, single

def manual_solution(g, p, z, eta, zeta, s=None, u=None, v=None, gcap=100.0, pcap=100.0):
    g, p, z = (np.atleast_2d(np.asarray(x, float)) for x in (g, p, z))
    H, A = g.shape
    c = Cascade.build(["a", "b", "sink"], [("a", "b")] * A + [("b", "sink")], [50, 50, 0], [0, 0, 0],
                      [100, 100, UNBOUNDED])
    r = HourlyRatings(np.full((H, A), gcap), np.full((H, A), pcap), np.full((H, A), float(eta)),
                      np.full((H, A), float(zeta)))
    coefs = BidCoefficients(*(np.zeros(H) for _ in range(5)))
    inp = TraderInput(c, r, c.initial_levels, np.zeros((H, 3)), coefs, *c.bounds(0, H))
    zero = np.zeros((H, A))
    return TraderSolution("optimal", "individual", 0.0, inp,
                          zero if s is None else np.atleast_2d(s), zero if u is None else np.atleast_2d(u),
                          zero if v is None else np.atleast_2d(v), g, p, z)


# -- reduced problems ---------------------------------------------------------

@pytest.mark.parametrize("solver", [solve_reduced_individual, solve_reduced_collective])
def test_cut_bounds_down_reserve(solver):
    sol = solver(single(1.0, 0.5, 0.3))
    assert sol.objective == pytest.approx(13.0)
    np.testing.assert_allclose(np.ravel(sol.s), 10)
    np.testing.assert_allclose(np.ravel(sol.u), 0, atol=1e-9)
    np.testing.assert_allclose(np.ravel(sol.v), 10)
    np.testing.assert_allclose(np.ravel(sol.g), 10)


@pytest.mark.parametrize("solver", [solve_reduced_individual, solve_reduced_collective])
def test_up_reserve_beats_spot(solver):
    sol = solver(single(1.0, 2.0, 0.3))
    assert sol.objective == pytest.approx(20.0)
    np.testing.assert_allclose(np.ravel(sol.u), 10)
    np.testing.assert_allclose(np.ravel(sol.s), 0, atol=1e-9)
    np.testing.assert_allclose(np.ravel(sol.v), 0, atol=1e-9)


def test_null_operation():
    sol = solve_reduced_individual(single(1.0, 0.5, 0.3, target=50.0, gcap=0.0))
    assert sol.feasible
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    for b in (sol.s, sol.u, sol.v):
        np.testing.assert_allclose(b, 0, atol=1e-12)


def test_parallel_arcs_modes_agree():
    inp = single(1.0, 0.5, 0.3, gcap=5.0, n_arcs=2, H=2, target=35.0)
    ind, col = solve_reduced_individual(inp), solve_reduced_collective(inp)
    assert ind.objective == pytest.approx(col.objective, rel=1e-9)
    assert ind.s.shape == (2, 2) and col.s.shape == (2,)


def test_zero_capacity_zero_objective():
    sol = solve_reduced_collective(single(3.0, 2.0, 1.0, gcap=0.0, target=0.0))
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("solver", [solve_reduced_individual, solve_reduced_collective])
def test_impossible_target_is_typed(solver):
    sol = solver(single(1.0, 0.5, 0.3, target=95.0))
    assert sol.status == "infeasible"
    assert sol.objective == -np.inf


def test_target_required():
    with pytest.raises(ValueError):
        solve_reduced_individual(single(1.0, 0.5, 0.3, target=None))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_solution_invariants(seed):
    inp = random_trader_case(seed).inp
    r = inp.ratings
    for solver, agg in ((solve_reduced_individual, False), (solve_reduced_collective, True)):
        sol = solver(inp)
        assert sol.feasible
        for x in (sol.u, sol.v, sol.g, sol.p, sol.z):
            assert np.all(x >= 0)
        assert np.all(sol.g <= r.gen_cap + 1e-9) and np.all(sol.p <= r.pump_cap + 1e-9)
        made = r.gen_eff * sol.g - r.inv_pump_eff * sol.p
        floor = -r.inv_pump_eff * r.pump_cap
        if agg:
            made, floor = made.sum(axis=1), floor.sum(axis=1)
        np.testing.assert_allclose(sol.s + sol.u, made, atol=1e-6)
        assert np.all(sol.s - sol.v >= floor - 1e-6)
        lev = sol.levels()
        K = inp.cascade.n_reservoirs - 1
        assert np.all(lev[:, :K] >= inp.lower[:, :K] - 1e-6)
        assert np.all(lev[:, :K] <= inp.upper[:, :K] + 1e-6)
        assert np.all(lev[-1, :K] >= inp.target[:K] - 1e-6)


# -- complementarity repair --------------------------------------------------

def test_repair_example():
    sol = repair_complementarity(manual_solution(4.0, 3.0, 0.0, eta=1.0, zeta=2.0))
    assert (sol.g[0, 0], sol.p[0, 0], sol.z[0, 0]) == (0.0, 1.0, 2.0)
    assert sol.g - sol.p + sol.z == pytest.approx(1.0)
    assert 1.0 * sol.g - 2.0 * sol.p == pytest.approx(-2.0)


def test_repair_leaves_exclusive_flows():
    base = manual_solution([[0.0, 4.0]], [[3.0, 0.0]], [[1.0, 1.0]], eta=1.0, zeta=2.0)
    sol = repair_complementarity(base)
    np.testing.assert_array_equal(sol.g, base.g)
    np.testing.assert_array_equal(sol.p, base.p)
    np.testing.assert_array_equal(sol.z, base.z)


def test_repair_both_ratios_tie():
    eta, zeta = 0.7, 1.3
    sol = repair_complementarity(manual_solution(zeta, eta, 0.5, eta=eta, zeta=zeta))
    assert sol.g[0, 0] == 0.0 and sol.p[0, 0] == 0.0
    assert sol.z[0, 0] == pytest.approx(0.5 + zeta - eta, abs=1e-15)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_repair_preserves_net_flows(seed):
    rng = np.random.default_rng(seed)
    H, A = rng.integers(1, 5), rng.integers(1, 4)
    eta = rng.uniform(0.2, 1.0)
    zeta = eta * rng.uniform(1.05, 2.0)
    mask = rng.random((H, A)) < 0.3
    g = rng.uniform(0, 50, (H, A)) * ~mask
    p = rng.uniform(0, 50, (H, A))
    z = rng.uniform(0, 5, (H, A))
    before = manual_solution(g, p, z, eta, zeta)
    after = repair_complementarity(before)
    assert np.all(after.g * after.p == 0)
    assert np.all(after.g >= 0) and np.all(after.p >= 0) and np.all(after.z >= 0)
    np.testing.assert_allclose(after.g - after.p + after.z, g - p + z, rtol=0, atol=1e-12)
    np.testing.assert_allclose(eta * after.g - zeta * after.p, eta * g - zeta * p, rtol=0, atol=1e-12)
    assert after.s is before.s and after.u is before.u and after.v is before.v


# -- policy recovery ---------------------------------------------------------

@pytest.fixture
def example_policy():
    sol = repair_complementarity(solve_reduced_individual(single(1.0, 0.5, 0.3)))
    return sol, recover_policy(sol)


def test_recovery_down_call(example_policy):
    sol, pol = example_policy
    g, p, z = pol.flows(0, 0.0, 1.0)
    assert g[0] == pytest.approx(0.0, abs=1e-12) and p[0] == 0.0
    assert z[0] == pytest.approx(sol.z[0, 0] + 10.0)


def test_recovery_no_call_reproduces_lp(example_policy):
    sol, pol = example_policy
    g, p, z = pol.flows(0, 0.0, 0.0)
    np.testing.assert_allclose(g, sol.g[0])
    np.testing.assert_allclose(p, sol.p[0])
    np.testing.assert_allclose(z, sol.z[0], atol=1e-12)


def test_recovery_pumping_branch():
    sol = manual_solution(0.0, 2.0, 0.0, eta=1.0, zeta=2.0, s=-4.0)
    pol = recover_policy(sol)
    for ru, rd in ACTIVATION_OUTCOMES:
        g, p, _ = pol.flows(0, float(ru), float(rd))
        assert g[0] == 0.0 and p[0] == pytest.approx(2.0)


def test_recovery_preconditions():
    with pytest.raises(PolicyPreconditionError):
        recover_policy(solve_reduced_collective(single(1.0, 0.5, 0.3)))
    with pytest.raises(PolicyPreconditionError):
        recover_policy(manual_solution(4.0, 3.0, 0.0, eta=1.0, zeta=2.0))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_recovered_policy_feasible_on_every_leaf(seed):
    case = random_trader_case(seed)
    sol = repair_complementarity(solve_reduced_individual(case.inp))
    pol = recover_policy(sol)
    tree = enumerate_activation_tree(case.inp.hours, case.activations)
    res = policy_residuals(case.inp, tree, sol.s, sol.u, sol.v, pol.path)
    assert max(res.values()) <= 1e-7


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_oracle_optimum_satisfies_cut(seed):
    case = random_trader_case(seed)
    inp = case.inp
    tree = enumerate_activation_tree(inp.hours, case.activations)
    ora = solve_extensive_trader(inp, "individual", tree)
    floor = -np.asarray(inp.ratings.inv_pump_eff) * np.asarray(inp.ratings.pump_cap)
    assert np.all(ora.s - ora.v >= floor - 1e-6)


# -- day problem with water values --------------------------------------------

def market_value(inp, sol):
    c = inp.coefs
    return float(c.spot @ sol.s + c.up @ sol.u + c.down @ sol.v)


def test_zero_water_values_give_market_terms_only():
    inp = single(1.0, 0.5, 0.3, H=3, target=None, water_values=np.zeros(2))
    sol = solve_day1_variant(inp)
    assert sol.objective == pytest.approx(market_value(inp, sol), abs=1e-9)
    # without a target all capacity is sold: 10 per hour at the best combination
    assert sol.objective == pytest.approx(3 * 13.0, rel=1e-8)  # minimal-spill floor slack is 1e-9


def test_high_water_value_hoards():
    inp = single(1.0, 0.5, 0.3, H=3, target=None, water_values=np.array([1e4, 0.0]))
    sol = solve_day1_variant(inp)
    for b in (sol.s, sol.u, sol.v):
        np.testing.assert_allclose(b, 0, atol=1e-9)


def test_sink_water_value_ignored():
    a = solve_day1_variant(single(1.0, 0.5, 0.3, H=2, target=None, water_values=np.array([0.5, 0.0])))
    b = solve_day1_variant(single(1.0, 0.5, 0.3, H=2, target=None, water_values=np.array([0.5, 99.0])))
    assert a.objective == pytest.approx(b.objective, rel=1e-12)
    np.testing.assert_allclose(a.s, b.s)


def test_spot_only_has_no_reserve_bids():
    inp = single(1.0, 2.0, 0.3, H=2, target=None, water_values=np.array([0.2, 0.0]))
    sol = solve_day1_variant(inp, "spot_only")
    np.testing.assert_array_equal(sol.u, 0)
    np.testing.assert_array_equal(sol.v, 0)


def test_deterministic_caps_reserves_by_spot():
    inp = single(1.0, 5.0, 3.0, H=2, target=None, water_values=np.array([0.1, 0.0]))
    sol = solve_day1_variant(inp, "deterministic")
    assert np.all(sol.u + sol.v <= sol.s + 1e-9)


def random_day(seed):
    case = random_trader_case(seed, hours=(2, 3, 4))
    inp = case.inp
    rng = np.random.default_rng(seed + 1)
    theta = np.append(rng.uniform(0, 60, inp.cascade.n_reservoirs - 1), 0.0)
    return TraderInput(inp.cascade, inp.ratings, inp.start_level, inp.inflows, inp.coefs, inp.lower,
                       inp.upper, None, theta)


def dispatch_path(inp, bids, ru, rd, strategy="reserves"):
    level = inp.start_level.copy()
    M = inp.incidence
    flows = []
    for t in range(inp.hours):
        hd = truncated_dispatch(inp, bids, t, level, ru[t], rd[t], strategy)
        flows.append((hd.g, hd.p, hd.z))
        level = level + inp.inflows[t] + M @ (hd.g - hd.p + hd.z)
    g, p, z = (np.array(x) for x in zip(*flows))
    return g, p, z, trajectory(inp.start_level, inp.inflows, M, g, p, z)


@given(seed=st.integers(0, 2**32 - 1), pattern=st.integers(0, 2))
@settings(max_examples=25, deadline=None)
def test_dispatch_honors_calls_and_bands(seed, pattern):
    inp = random_day(seed)
    bids = solve_day1_variant(inp)
    rng = np.random.default_rng(seed)
    acts = ACTIVATION_OUTCOMES[rng.integers(0, 3, inp.hours)] if pattern == 2 else \
        np.tile(ACTIVATION_OUTCOMES[pattern], (inp.hours, 1))
    ru, rd = acts[:, 0].astype(float), acts[:, 1].astype(float)
    g, p, z, lev = dispatch_path(inp, bids, ru, rd)
    r = inp.ratings
    made = (r.gen_eff * g).sum(axis=1) - (r.inv_pump_eff * p).sum(axis=1)
    np.testing.assert_allclose(made, bids.s + ru * bids.u - rd * bids.v, atol=1e-7)
    K = inp.cascade.n_reservoirs - 1
    assert np.all(lev[:, :K] >= inp.lower[:, :K] - 1e-6)
    assert np.all(lev[:, :K] <= inp.upper[:, :K] + 1e-6)


def test_no_calls_keep_more_water_than_robust_path():
    inp = single(1.0, 0.8, 0.3, H=4, target=None, water_values=np.array([0.9, 0.0]), inflow=2.0)
    bids = solve_day1_variant(inp)
    assert np.all(bids.u > 0)
    _, _, _, lev = dispatch_path(inp, bids, np.zeros(4), np.zeros(4))
    assert lev[-1, 0] >= bids.levels()[-1, 0] - 1e-9


def test_all_up_calls_deliver_spot_plus_up():
    inp = single(1.0, 0.8, 0.3, H=3, target=None, water_values=np.array([0.9, 0.0]))
    bids = solve_day1_variant(inp)
    g, p, _, _ = dispatch_path(inp, bids, np.ones(3), np.zeros(3))
    np.testing.assert_allclose(g[:, 0] - 2.0 * p[:, 0], bids.s + bids.u, atol=1e-9)


def test_dispatch_spills_only_overflow():
    # full reservoir, 30 m3/h inflow, 10 m3/h turbined: 20 m3/h must be spilled, no more
    inp = single(1.0, 0.0, 0.0, H=3, target=None, water_values=np.zeros(2), w0=100.0, inflow=30.0)
    bids = solve_day1_variant(inp, "spot_only")
    _, _, z, lev = dispatch_path(inp, bids, np.zeros(3), np.zeros(3), "spot_only")
    np.testing.assert_allclose(z[:, 0], 20.0, atol=1e-7)
    np.testing.assert_allclose(lev[:, 0], 100.0, atol=1e-7)


def test_deterministic_commitment_can_fail():
    inp = single(1.0, 5.0, 0.0, H=2, target=None, water_values=np.array([0.01, 0.0]))
    bids = solve_day1_variant(inp, "deterministic")
    assert bids.u[0] > 5
    with pytest.raises(DispatchInfeasible):
        truncated_dispatch(inp, bids, 0, inp.start_level, 1.0, 0.0, "deterministic")
