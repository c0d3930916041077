import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from hydrosched.cascade import UNBOUNDED, Cascade, HourlyRatings
from hydrosched.config import bundled_config_path, load_config
from hydrosched.planner import (STATS_FIELDS, AffinePolicy, PlannerInfeasible, PlannerScenario,
                                assemble_planner_saa, evaluate_policy, finite_difference_water_values,
                                solve_planner, stats_row, write_stats_csv)
from hydrosched.simulator import _planner_scenarios, draw_truth
from hydrosched.stochastic import BidCoefficients
from hydrosched.trader import TraderInput, solve_reduced_collective
from instances import random_planner_case

H = 3


def reservoir(w0=50.0, lower=0.0, upper=100.0, eta=0.8, gcap=10.0):
    c = Cascade.build(["a", "sink"], [("a", "sink")], [w0, 0], [lower, 0], [upper, UNBOUNDED])
    r = HourlyRatings(np.array([gcap]), np.zeros(1), np.array([eta]), np.array([1.5 * eta]))
    return c, r


def coefs(spot, up=0.0, down=0.0, rho=0.01):
    spot = np.asarray(spot, dtype=float)
    n = spot.size
    return BidCoefficients(spot, np.full(n, up), np.full(n, down), np.full(n, rho), np.full(n, rho))


def scenario(spot, inflow, up=0.0, down=0.0):
    phi = np.zeros((len(spot), 2))
    phi[:, 0] = inflow
    return PlannerScenario(coefs(spot, up, down), phi)


def test_constant_rule():
    pol = AffinePolicy(np.array([[4.0, 0.0]]), np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), np.zeros((1, 2)))
    np.testing.assert_array_equal(evaluate_policy(pol, 0, [9, 0], [1, 0], 30.0), [4, 0])


def test_identity_rule():
    pol = AffinePolicy(np.zeros((1, 2)), np.eye(2)[None], np.zeros((1, 2, 2)), np.zeros((1, 2)))
    np.testing.assert_array_equal(evaluate_policy(pol, 0, [3, 0], [7, 7], 12.0), [3, 0])


def test_full_rule_arithmetic():
    pol = AffinePolicy(np.array([[10.0]]), np.array([[[0.5]]]), np.array([[[0.1]]]), np.array([[2.0]]))
    assert evaluate_policy(pol, 0, [4.0], [20.0], 30.0)[0] == pytest.approx(74.0)


def test_rule_dimension_mismatch():
    pol = AffinePolicy(np.zeros((1, 2)), np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        evaluate_policy(pol, 0, [1, 2, 3], [0, 0], 1.0)
    with pytest.raises(ValueError):
        evaluate_policy(pol, 0, [1, 2], [0, 0], [1.0, 2.0])


def test_two_day_plan_matches_best_constant_target():
    c, r = reservoir()
    day1, day2 = [2.0, 3.0, 1.0], [4.0, 6.0, 5.0]
    sc = scenario(day1 + day2, 5.0, up=0.3, down=0.1)
    sol = solve_planner(assemble_planner_saa(c, r, [sc], 2, H))

    phi = sc.inflows

    def two_day_value(w1):
        first = solve_reduced_collective(TraderInput.for_day(c, r, 0, coefs(day1, 0.3, 0.1), phi[:H],
                                                             target=[w1, 0.0]))
        second = solve_reduced_collective(TraderInput.for_day(c, r, H, coefs(day2, 0.3, 0.1), phi[H:],
                                                              start_level=[w1, 0.0], target=[50.0, 0.0]))
        total = first.objective + second.objective
        return -total if np.isfinite(total) else 1e9

    best = minimize_scalar(two_day_value, bounds=(0.0, 100.0), method="bounded", options={"xatol": 1e-10})
    assert sol.objective == pytest.approx(-best.fun, rel=1e-7)
    assert sol.policy.lam[0, 0] == pytest.approx(best.x, abs=1e-3)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_reserves_never_hurt(seed):
    c, r, scen = random_planner_case(seed)
    full = solve_planner(assemble_planner_saa(c, r, scen, 3, 2))
    spot = solve_planner(assemble_planner_saa(c, r, scen, 3, 2, strategy="spot_only"))
    assert full.objective >= spot.objective - 1e-7 * (1 + abs(spot.objective))
    np.testing.assert_array_equal(spot.u, 0)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), D=st.integers(1, 4))
@settings(max_examples=15, deadline=None)
def test_size_formula(seed, n, D):
    c, r, scen = random_planner_case(seed, n_days=D, H=2, n_scenarios=n)
    m = assemble_planner_saa(c, r, scen, D, 2)
    T, A, K = D * 2, c.n_arcs, c.n_reservoirs - 1
    cols = n * (T * (3 + 3 * A + K) + 2 * D * K) + K + (D - 1) * (2 * K + 2 * K * K)
    rows = n * (T * (2 + K) + 3 * D * K - K + K)
    assert (m.lp.n_vars, m.lp.n_cons) == (cols, rows)


def scarce_water_case(eta=0.8):
    """All water is worth most in the best hour of day 2 (capacity is never binding)."""
    c, r = reservoir(w0=20.0, eta=eta, gcap=100.0)
    return c, r, scenario([1.0, 1.0, 1.0, 3.0, 5.0, 4.0], 0.0)


def test_water_value_is_best_remaining_price():
    c, r, sc = scarce_water_case()
    m = assemble_planner_saa(c, r, [sc], 2, H, terminal=False)
    sol = solve_planner(m)
    assert sol.water_values[0] == pytest.approx(0.8 * 5.0, rel=1e-9)
    check = finite_difference_water_values(m, sol)
    assert not check.degenerate.any()
    np.testing.assert_allclose(check.central, sol.water_values[:1], rtol=1e-4)


def test_sink_water_value_zero():
    c, r, scen = random_planner_case(3)
    sol = solve_planner(assemble_planner_saa(c, r, scen, 3, 2))
    assert sol.water_values[-1] == 0.0
    assert sol.water_values.shape == (c.n_reservoirs,)


def test_zero_prices_zero_water_values():
    c, r = reservoir()
    sol = solve_planner(assemble_planner_saa(c, r, [scenario(np.zeros(2 * H), 3.0)], 2, H))
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(sol.water_values, 0.0, atol=1e-12)


def test_infeasible_planner_names_day():
    T = 3 * H
    lo = np.zeros((T, 2))
    lo[H:2 * H, 0] = 95.0  # unreachable without inflow
    c = Cascade.build(["a", "sink"], [("a", "sink")], [50, 0], lo, np.tile([100.0, UNBOUNDED], (T, 1)))
    r = HourlyRatings(np.array([10.0]), np.zeros(1), np.ones(1), np.array([2.0]))
    with pytest.raises(PlannerInfeasible) as err:
        solve_planner(assemble_planner_saa(c, r, [scenario(np.full(T, 2.0), 0.0)], 3, H))
    assert err.value.day == 1


def test_bad_inputs():
    c, r = reservoir()
    with pytest.raises(ValueError):
        assemble_planner_saa(c, r, [], 2, H)
    with pytest.raises(ValueError):
        assemble_planner_saa(c, r, [scenario(np.ones(H), 0.0)], 2, H)


def test_policy_reproduces_scenario_targets():
    c, r, scen = random_planner_case(11, n_days=3, H=2, n_scenarios=3)
    sol = solve_planner(assemble_planner_saa(c, r, scen, 3, 2))
    for n, sc in enumerate(scen):
        daily = sc.inflows.reshape(3, 2, -1).sum(axis=1)
        cum = np.vstack([np.zeros(daily.shape[1]), np.cumsum(daily, axis=0)[:-1]])
        price = sc.coefs.spot.reshape(3, 2).mean(axis=1)
        for d in range(3):
            got = evaluate_policy(sol.policy, d, daily[d], cum[d], price[d])
            np.testing.assert_allclose(got, sol.targets[n, d], atol=1e-6 * (1 + np.abs(got).max()))


def test_stats_csv(tmp_path):
    c, r, sc = scarce_water_case()
    sol = solve_planner(assemble_planner_saa(c, r, [sc], 2, H))
    path = tmp_path / "stats.csv"
    write_stats_csv([stats_row(sol)], path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == STATS_FIELDS
    assert int(rows[0]["N"]) == 1
    assert int(rows[0]["rows"]) == sol.stats["rows"] and int(rows[0]["cols"]) == sol.stats["cols"]


def fix(lp, idx, values):
    idx = np.asarray(idx).ravel()
    if idx.size:
        lp.add_constraints("fix", np.arange(idx.size), idx, np.ones(idx.size), "=",
                           np.broadcast_to(np.ravel(values), idx.shape))


@pytest.mark.parametrize("name", ["tiny", "gasteiner"])
def test_zero_policy_feasible_on_shipped_configs(name):
    """Holding every reservoir at its lower band is always reachable from the lower band."""
    cfg = load_config(bundled_config_path(name))
    Hd, D = cfg.hours_per_day, 3
    truth = draw_truth(cfg.simulation.__class__(n_days=1, hours_per_day=Hd), cfg.cascade, cfg.models, 0)
    scen = _planner_scenarios(cfg.models, truth, 0, D, Hd, 2, 0, "reserves", cfg.simulation.start_weekday)
    lo, _ = cfg.cascade.bounds(0, D * Hd)
    m = assemble_planner_saa(cfg.cascade.with_initial_levels(lo[0]), cfg.ratings, scen, D, Hd)
    K = cfg.cascade.n_reservoirs - 1
    lam_ref = lo[np.arange(1, D + 1) * Hd - 1, :K]
    fix(m.lp, m.lam1, lam_ref[0])
    fix(m.lp, m.lam, lam_ref[1:])
    for block in (m.Phi, m.Psi, m.mu):
        fix(m.lp, block, 0.0)
    sol = solve_planner(m)
    np.testing.assert_allclose(sol.targets[:, :, :K], np.broadcast_to(lam_ref, (2, D, K)), atol=1e-6)
