import itertools
from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp
from conftest import random_problem
from hypothesis import given, settings
from hypothesis import strategies as st

from mgsizing.dispatch import build_lp, build_milp
from mgsizing.solver.backends import EmbeddedBackend, HighsBackend, get_backend
from mgsizing.solver.bnb import solve_milp
from mgsizing.solver.model import (INFEASIBLE, ITERATION_LIMIT, NODE_LIMIT, OPTIMAL, UNBOUNDED,
                                   StandardFormModel)
from mgsizing.solver.simplex import SimplexEngine, solve_lp


def model(c, A, b, lb, ub, integ=None):
    c = np.asarray(c, float)
    return StandardFormModel(c, sp.csc_matrix(np.atleast_2d(A)), b, lb, ub,
                             np.zeros(c.size, bool) if integ is None else integ)


def random_lp(rng, m, n, free_frac=0.0):
    """Feasible, bounded random LP: b comes from a point inside the box."""
    A = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.6)
    lb = rng.uniform(-5, 0, n)
    ub = lb + rng.uniform(0.5, 5, n)
    free = rng.random(n) < free_frac
    x0 = rng.uniform(lb, ub)
    lb[free], ub[free] = -np.inf, np.inf
    return model(rng.normal(size=n), A, A @ x0, lb, ub)


def test_single_lower_bound():
    # min x  s.t.  x - s = 3,  x, s >= 0
    rep = solve_lp(model([1, 0], [[1, -1]], [3], [0, 0], [np.inf, np.inf]))
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(3.0)
    assert rep.x[0] == pytest.approx(3.0)


def test_infeasible_and_unbounded():
    assert solve_lp(model([1, 1], [[1, 1]], [-1], [0, 0], [np.inf, np.inf])).status == INFEASIBLE
    unb = solve_lp(model([-1, 0], [[1, -1]], [0], [0, 0], [np.inf, np.inf]))
    assert unb.status == UNBOUNDED
    assert unb.objective == -np.inf


def test_iteration_limit_is_explicit(rng):
    m = build_lp(random_problem(rng, 24, E_B=100.0, PV=80.0))
    rep = solve_lp(m, max_iter=1)
    assert rep.status == ITERATION_LIMIT and not rep.optimal


def test_grid_only_hour_objective(rng):
    prob = random_problem(rng, 1, E_B=0.0, PV=0.0, p_D=10.0)
    rep = solve_lp(build_lp(prob))
    assert rep.objective == pytest.approx(prob.load[0] * prob.price[0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 8), extra=st.integers(1, 10),
       free=st.sampled_from([0.0, 0.3]))
def test_random_lp_matches_highs(seed, m, extra, free):
    rng = np.random.default_rng(seed)
    lp = random_lp(rng, m, m + extra, free)
    ours = solve_lp(lp)
    ref = HighsBackend().solve_lp(lp)
    assert ours.status == ref.status
    if ref.optimal:
        assert ours.objective == pytest.approx(ref.objective, rel=1e-7, abs=1e-7)
        assert lp.residual(ours.x) <= 1e-6
        assert lp.bound_violation(ours.x) <= 1e-9


def test_reduced_cost_signs(rng):
    """Duals rebuilt from the final basis certify optimality: nonbasic reduced costs
    are >= 0 at a lower bound and <= 0 at an upper bound."""
    for _ in range(25):
        lp = build_lp(random_problem(rng, 10, c_rate=rng.choice([None, 0.4])))
        eng = SimplexEngine(lp)
        assert eng.start() == OPTIMAL
        A = eng.A.toarray()
        B = A[:, eng.head]
        y = np.linalg.solve(B.T, eng.cost[eng.head])
        d = eng.cost - A.T @ y
        x = eng.x
        nb = ~eng.is_basic & (eng.ub > eng.lb)
        tol = 1e-7 * max(1.0, np.abs(eng.cost).max())
        at_lo = nb & np.isclose(x, eng.lb)
        at_hi = nb & np.isclose(x, eng.ub) & ~at_lo
        assert np.all(d[at_lo] >= -tol)
        assert np.all(d[at_hi] <= tol)
        # weak duality closes: c x equals the dual objective
        dual_obj = y @ eng.b + d[~eng.is_basic] @ x[~eng.is_basic]
        assert dual_obj == pytest.approx(eng.cost @ x, rel=1e-9, abs=1e-9)


def test_determinism(rng):
    prob = random_problem(rng, 24, E_B=150.0, PV=90.0, P_D_min=30.0)
    for build, solve in ((build_lp, solve_lp), (build_milp, solve_milp)):
        a, b = solve(build(prob)), solve(build(prob))
        assert a == b


@pytest.mark.parametrize("lam", [2.0, 0.25, 3.7])
def test_price_scaling(rng, lam):
    for _ in range(10):
        prob = random_problem(rng, 8)
        scaled = replace(prob, price=prob.price * lam,
                         params=replace(prob.params, p_D=prob.params.p_D * lam))
        for build, solve in ((build_lp, solve_lp), (build_milp, solve_milp)):
            base, big = solve(build(prob)), solve(build(scaled))
            assert big.objective == pytest.approx(lam * base.objective, rel=1e-9, abs=1e-9)
            if lam in (2.0, 0.25):
                # power-of-two scaling is exact in floating point, so the pivot path is identical
                np.testing.assert_array_equal(big.x, base.x)


def test_unique_argmin_survives_scaling(rng):
    """When a small cost perturbation leaves the LP argmin unchanged it is unique,
    and any positive price scaling must return it too."""
    checked = 0
    for _ in range(30):
        prob = random_problem(rng, 6)
        lp = build_lp(prob)
        base = solve_lp(lp)
        # additive noise also reaches the zero-cost columns (PV, battery, SOC)
        bumps = [replace(lp, c=lp.c + 1e-5 * rng.uniform(-1, 1, lp.n_vars)) for _ in range(3)]
        if not all(np.allclose(solve_lp(b).x, base.x, atol=1e-7) for b in bumps):
            continue
        checked += 1
        scaled = replace(lp, c=lp.c * 3.7)
        np.testing.assert_allclose(solve_lp(scaled).x, base.x, atol=1e-7)
    assert checked > 0


def test_incumbents_never_increase(rng):
    for _ in range(15):
        rep = solve_milp(build_milp(random_problem(rng, 24, E_B=100.0, PV=60.0)))
        assert rep.optimal
        h = rep.incumbent_history
        assert h and all(b <= a for a, b in zip(h, h[1:]))
        assert h[-1] == rep.objective


def brute_force_binary(mdl):
    idx = np.flatnonzero(mdl.integrality)
    best = np.inf
    for pattern in itertools.product((0.0, 1.0), repeat=idx.size):
        lb, ub = mdl.lb.copy(), mdl.ub.copy()
        lb[idx] = ub[idx] = pattern
        rep = solve_lp(replace(mdl, lb=lb, ub=ub))
        if rep.optimal:
            best = min(best, rep.objective)
    return best


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_generic_binary_program_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n_bin, n_cont, m = 4, 5, 3
    n = n_bin + n_cont + m  # one slack per row keeps every pattern feasible
    A = np.hstack([rng.normal(size=(m, n_bin + n_cont)), np.eye(m)])
    lb = np.r_[np.zeros(n_bin), np.full(n_cont, -2.0), np.zeros(m)]
    ub = np.r_[np.ones(n_bin), np.full(n_cont, 2.0), np.full(m, 100.0)]
    x0 = np.r_[rng.integers(0, 2, n_bin), rng.uniform(-2, 2, n_cont), rng.uniform(0, 100, m)]
    integ = np.r_[np.ones(n_bin, bool), np.zeros(n_cont + m, bool)]
    mdl = model(np.r_[rng.normal(size=n_bin + n_cont), np.zeros(m)], A, A @ x0, lb, ub, integ)
    rep = solve_milp(mdl)
    ref = brute_force_binary(mdl)
    assert rep.optimal
    assert rep.objective == pytest.approx(ref, rel=1e-9, abs=1e-9)
    assert np.all(np.isin(rep.x[integ], (0.0, 1.0)))
    assert rep.objective >= solve_lp(mdl).objective - 1e-9


def test_node_limit_returns_incumbent(rng):
    mdl = build_milp(random_problem(rng, 48, E_B=150.0, PV=100.0, P_D_min=40.0))
    full = solve_milp(mdl)
    capped = solve_milp(mdl, node_limit=2)
    if full.nodes > 2:
        assert capped.status == NODE_LIMIT
        assert capped.objective >= full.objective - 1e-9


def test_hard_week_reports_node_limit():
    """Tiny battery, high diesel minimum: a wide root gap that exact best-first search cannot
    close quickly. The limit must surface as a status, never as a wrong optimum."""
    prob = random_problem(np.random.default_rng(2), 168)
    mdl = build_milp(prob)
    rep = solve_milp(mdl, node_limit=300)
    assert rep.status == NODE_LIMIT and not rep.optimal
    assert not np.isfinite(rep.objective) or rep.objective >= HighsBackend().solve_milp(mdl).objective - 1e-6


def test_gap_option_stays_within_gap(rng):
    mdl = build_milp(random_problem(rng, 48, E_B=150.0, PV=100.0, P_D_min=40.0))
    exact = solve_milp(mdl)
    loose = solve_milp(mdl, rel_gap=0.01)
    assert loose.optimal
    assert exact.objective <= loose.objective <= exact.objective * 1.01 + 1e-9


def test_cutoff_rejects_everything_above(rng):
    mdl = build_milp(random_problem(rng, 6))
    opt = solve_milp(mdl).objective
    assert solve_milp(mdl, cutoff=opt - 1.0).status == INFEASIBLE


def test_backends_agree(rng):
    emb, hig = get_backend("embedded"), get_backend("highs")
    for _ in range(5):
        mdl = build_milp(random_problem(rng, 24))
        assert emb.solve_milp(mdl).objective == pytest.approx(hig.solve_milp(mdl).objective,
                                                              rel=1e-7, abs=1e-7)
    with pytest.raises(ValueError):
        get_backend("cplex")
    assert isinstance(emb, EmbeddedBackend)


def test_model_validation():
    with pytest.raises(ValueError, match="shape"):
        model([1, 2], [[1, 1]], [1, 2], [0, 0], [1, 1])
    with pytest.raises(ValueError, match="lower bound"):
        model([1], [[1]], [1], [2], [1])
    with pytest.raises(ValueError, match="integral"):
        model([1], [[1]], [1], [0], [3], np.array([True]))


def test_lp_text_dump():
    text = model([1, -2], [[1, 1]], [4], [0, -np.inf], [np.inf, np.inf]).to_lp_text()
    assert "Minimize" in text and "x1 free" in text and "r0: x0 + x1 = 4" in text
