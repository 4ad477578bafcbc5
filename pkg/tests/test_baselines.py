from dataclasses import replace

import numpy as np
import pytest
from conftest import random_problem

from mgsizing.baselines import DPConfig, dp_dispatch, greedy_dispatch, soc_lattice
from mgsizing.dispatch import Design, DispatchParams, DispatchProblem, solve_dispatch


def test_dominance_random_windows(rng):
    for _ in range(12):
        prob = random_problem(rng, 48, c_rate=rng.choice([None, 0.5]))
        lp = solve_dispatch(prob, accurate=False).op_cost
        milp = solve_dispatch(prob, accurate=True).op_cost
        dp = dp_dispatch(prob, DPConfig(21)).op_cost
        greedy = greedy_dispatch(prob).op_cost
        tol = 1e-6 * max(1.0, milp)
        assert lp <= milp + tol
        assert milp <= dp + tol
        assert milp <= greedy + tol


def test_dp_path_stays_on_lattice(rng):
    prob = random_problem(rng, 24, E_B=120.0)
    sol = dp_dispatch(prob, DPConfig(11))
    grid = soc_lattice(prob, 11)
    assert sol.SOC[0] == prob.soc_start
    assert np.all(np.min(np.abs(sol.SOC[1:, None] - grid[None, :]), axis=1) <= 1e-9)
    sol.check(prob, min_power=True)
    assert sol.meta["soc_levels"] == 11


def test_dp_without_battery(rng):
    for _ in range(5):
        # no storage and no diesel minimum: every model reduces to the same hourly choice
        prob = random_problem(rng, 24, E_B=0.0, P_D_min=0.0)
        lp = solve_dispatch(prob, accurate=False).op_cost
        assert dp_dispatch(prob).op_cost == pytest.approx(lp, rel=1e-12, abs=1e-12)
        # with a diesel minimum the DP still matches the accurate model hour by hour
        prob = random_problem(rng, 24, E_B=0.0)
        milp = solve_dispatch(prob, accurate=True).op_cost
        assert dp_dispatch(prob).op_cost == pytest.approx(milp, rel=1e-9, abs=1e-9)


def test_dp_refinement_sweep(rng):
    for _ in range(5):
        prob = random_problem(rng, 48, E_B=150.0)
        milp = solve_dispatch(prob, accurate=True).op_cost
        costs = [dp_dispatch(prob, DPConfig(n)).op_cost for n in (11, 51, 201)]
        assert costs[0] >= costs[1] - 1e-9 >= costs[2] - 2e-9
        assert costs[2] >= milp - 1e-6 * max(1.0, milp)
        assert costs[2] - milp <= costs[0] - milp + 1e-9


def test_greedy_fills_battery_from_sun():
    params = DispatchParams(P_D_max=10.0, P_D_min=3.0)
    prob = DispatchProblem(Design(50.0, 30.0), params, np.zeros(5), np.full(5, 0.2),
                           np.ones(5), 5.0)
    sol = greedy_dispatch(prob)
    assert sol.op_cost == 0.0
    assert sol.SOC[-1] == pytest.approx(prob.soc_max)


def test_greedy_without_storage_or_sun(rng):
    for _ in range(5):
        prob = random_problem(rng, 24, E_B=0.0, PV=0.0, P_D_min=0.0)
        prob = replace(prob, params=replace(prob.params, P_D_max=1e4))
        lp = solve_dispatch(prob, accurate=False).op_cost
        want = float(np.sum(prob.load * np.minimum(prob.price, prob.p_D)))
        assert greedy_dispatch(prob).op_cost == pytest.approx(want, rel=1e-12)
        assert lp == pytest.approx(want, rel=1e-9)


def test_greedy_respects_diesel_minimum(rng):
    for _ in range(10):
        prob = random_problem(rng, 48)
        sol = greedy_dispatch(prob)
        on = sol.P_D > 0
        assert np.all(sol.P_D[on] >= prob.params.P_D_min - 1e-9)
        assert np.all(sol.P_B_ch <= np.maximum(prob.pv_max - prob.load, 0.0) + 1e-9)


def test_dp_config_validation():
    with pytest.raises(ValueError):
        DPConfig(1)
    with pytest.raises(ValueError):
        DPConfig(2.5)
