"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are printed in the terminal summary (see conftest.py) so a single
``pytest -v`` run ends with the full scorecard.
"""

import statistics
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, random_problem
from test_dispatch import enumerate_u

from mgsizing import cli
from mgsizing.annual import evaluate_design
from mgsizing.baselines import DPConfig, dp_dispatch, greedy_dispatch
from mgsizing.dispatch import Design, DispatchParams, DispatchProblem, solve_dispatch
from mgsizing.economics import CostModel
from mgsizing.oo import (OOPlan, Sampling, alignment_probability, compute_N, compute_s,
                         exhaustive_search, run_boost, sample_designs)
from mgsizing.solver.oracle import oracle_dispatch
from mgsizing.timeseries import WEEK, Window, synth_trace

pytestmark = pytest.mark.slow

REL = 1e-6


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def leq(a: float, b: float, rel: float = REL) -> bool:
    return a <= b + rel * max(1.0, abs(b))


@pytest.fixture(scope="module")
def year_boost():
    """Full BOOST run on the seed-0 synthetic year with the default plan (N=90)."""
    t0 = time.perf_counter()
    result = run_boost(synth_trace(0), OOPlan.build())
    return result, time.perf_counter() - t0


# ------------------------------------------------------------------ 1
def test_c1_sample_size_and_alignment():
    n = compute_N(0.99, 0.05)
    s = compute_s(100, 10, 1, 0.90)
    ap = alignment_probability(100, 10, 20, 1)
    ok = n == 90 and s == 20 and abs(ap - 0.9066) <= 0.0005
    record(1, ok, f"compute_N(0.99, 0.05) = {n}; compute_s(100, 10, 1, 0.90) = {s}; "
                  f"AP(100, 10, 20, 1) = {ap:.6f} (target 0.9066 +- 0.0005)")
    assert n == 90
    assert s == 20 and ap >= 0.90
    assert ap == pytest.approx(0.9066, abs=0.0005)


# ------------------------------------------------------------------ 2
def random_week(rng: np.random.Generator) -> DispatchProblem:
    """A random week of a random synthetic year, with a random design and diesel setting."""
    year = synth_trace(int(rng.integers(0, 1000)))
    week = year.slice(Window(WEEK * int(rng.integers(0, 52))))
    params = DispatchParams(p_D=rng.uniform(0.25, 0.35),
                            diesel_min_frac=rng.uniform(0.2, 0.4)).resolve(year.peak_load)
    design = Design(rng.uniform(500.0, 5000.0), rng.uniform(500.0, 3000.0))
    lo, hi = params.soc_min_frac * design.E_B, params.soc_max_frac * design.E_B
    return DispatchProblem(design, params, week.load_kw, week.grid_price, week.pv_availability,
                           rng.uniform(lo, hi))


def test_c2_relaxation_dominance():
    rng = np.random.default_rng(2)
    bad = {"lp>milp": 0, "milp>dp": 0, "milp>greedy": 0}
    count = 100
    t0 = time.perf_counter()
    for _ in range(count):
        prob = random_week(rng)
        lp = solve_dispatch(prob, accurate=False).op_cost
        milp = solve_dispatch(prob, accurate=True).op_cost
        dp = dp_dispatch(prob).op_cost
        greedy = greedy_dispatch(prob).op_cost
        bad["lp>milp"] += not leq(lp, milp)
        bad["milp>dp"] += not leq(milp, dp)
        bad["milp>greedy"] += not leq(milp, greedy)
    ok = not any(bad.values())
    record(2, ok, f"{count} weekly instances, violations {bad} at 1e-6 relative "
                  f"({time.perf_counter() - t0:.0f} s)")
    assert ok


# ------------------------------------------------------------------ 3
def test_c3_method_ordering(year_boost):
    result, _ = year_boost
    winner = result.winner
    trace, cm = synth_trace(0), CostModel()
    t0 = time.perf_counter()
    lcoe = {"milp": winner.phase2_breakdown.lcoe}
    for method in ("dp", "greedy"):
        lcoe[method] = evaluate_design(trace, winner.design, DispatchParams(), method).breakdown(cm).lcoe
    elapsed = time.perf_counter() - t0
    ok = lcoe["milp"] < lcoe["dp"] < lcoe["greedy"]
    d = winner.design
    record(3, ok, f"winner E_B={d.E_B:g} kWh PV={d.PV_size:g} kW; LCOE milp {lcoe['milp']:.4f} "
                  f"< dp {lcoe['dp']:.4f} < greedy {lcoe['greedy']:.4f} c/kWh "
                  f"(dp+greedy {elapsed:.0f} s; milp from phase 2)")
    assert ok


# ------------------------------------------------------------------ 4
def _robust(diag) -> bool:
    return diag.spearman_rho >= 0.8 and diag.frac_within_2 >= 0.6


def test_c4_order_robustness(year_boost):
    result, elapsed = year_boost
    diag = result.diagnostics
    assert result.plan.N == 90 and result.plan.s == compute_s(90, result.plan.g, 1, 0.90)
    detail = (f"N={result.plan.N} s={result.plan.s}: rho={diag.spearman_rho:.4f}, "
              f"|gain|<=2 share={diag.frac_within_2:.2f}, max |gain|={diag.max_abs_gain}, "
              f"{diag.count} finalists, {len(result.excluded)} excluded (BOOST {elapsed:.0f} s)")
    if _robust(diag):
        record(4, True, detail)
        return
    rhos, shares = [diag.spearman_rho], [diag.frac_within_2]
    for seed in range(1, 5):
        d = run_boost(synth_trace(seed), OOPlan.build()).diagnostics
        rhos.append(d.spearman_rho)
        shares.append(d.frac_within_2)
    ok = statistics.median(rhos) >= 0.8 and statistics.median(shares) >= 0.6
    record(4, ok, detail + f"; seeds 0-4 rho {[round(r, 3) for r in rhos]} "
                           f"median {statistics.median(rhos):.3f}, share median "
                           f"{statistics.median(shares):.2f}")
    assert ok


# ------------------------------------------------------------------ 5
def test_c5_oracle_equivalence():
    rng = np.random.default_rng(5)
    count, mismatches, worst_gap, lp_above, milp_above = 60, 0, 0.0, 0, 0
    for i in range(count):
        prob = random_problem(rng, 1 + i % 4)
        milp = solve_dispatch(prob, accurate=True).op_cost
        mismatches += milp != pytest.approx(enumerate_u(prob), rel=1e-9, abs=1e-9)
        milp_above += not leq(milp, oracle_dispatch(prob, 21), 1e-9)
        # the LP drops the diesel minimum, so its oracle does too
        lp = solve_dispatch(prob, accurate=False).op_cost
        oracle = oracle_dispatch(prob, 21, min_power=False)
        lp_above += not leq(lp, oracle, 1e-9)
        if oracle - lp > 1e-9:
            worst_gap = max(worst_gap, (oracle - lp) / oracle)
    ok = mismatches == 0 and lp_above == 0 and milp_above == 0 and worst_gap < 0.02
    record(5, ok, f"{count} instances T<=4: milp != enumeration {mismatches}, lp > oracle "
                  f"{lp_above}, milp > oracle {milp_above}, worst oracle gap {100 * worst_gap:.3f}%")
    assert ok


# ------------------------------------------------------------------ 6
def test_c6_dp_convergence():
    trace = synth_trace(0, WEEK)
    params = DispatchParams().resolve(synth_trace(0).peak_load)
    design = next(d for d in sample_designs(100) if d.E_B == 2000 and abs(d.PV_size - 1278) < 140)
    prob = DispatchProblem(design, params, trace.load_kw, trace.grid_price,
                           trace.pv_availability, params.soc_init_frac * design.E_B)
    costs = [dp_dispatch(prob, DPConfig(levels)).op_cost for levels in (11, 51, 201)]
    milp = solve_dispatch(prob, accurate=True).op_cost
    monotone = costs[0] >= costs[1] >= costs[2]
    gap = (costs[2] - milp) / milp
    ok = monotone and gap < 0.01
    record(6, ok, f"design E_B={design.E_B:g} PV={design.PV_size:.1f}: dp(11/51/201) = "
                  f"{costs[0]:.2f} / {costs[1]:.2f} / {costs[2]:.2f}, milp {milp:.2f}, "
                  f"gap at 201 {100 * gap:.3f}%")
    assert ok


# ------------------------------------------------------------------ 7
def test_c7_exhaustive_equivalence():
    trace = synth_trace(0, 2 * WEEK)
    plan = OOPlan.build(P=0.5, alpha=0.5, g_frac=0.2, k=1, AP_target=0.5, N=9, s=9)
    res = run_boost(trace, plan, sampling=Sampling())
    designs = sample_designs(9)
    assert len({d.E_B for d in designs}) == 3 and len({d.PV_size for d in designs}) == 3
    brute = exhaustive_search(trace, designs)
    ok = res.winner.design == brute[0][0]
    w = res.winner.design
    record(7, ok, f"3x3 lattice, 2-week trace: BOOST winner ({w.E_B:g}, {w.PV_size:g}) vs "
                  f"brute force ({brute[0][0].E_B:g}, {brute[0][0].PV_size:g})")
    assert ok


# ------------------------------------------------------------------ 8
def test_c8_determinism(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[trace]\nhours = 336\n\n[OOPlan]\nP = 0.5\nalpha = 0.5\nN = 9\ns = 5\n"
                   "AP_target = 0.5\n", encoding="utf-8")
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [cli.main(["size", "--config", str(ini), "--seed", "0", "--out", str(o)]) for o in outs]
    names = sorted(p.name for p in outs[0].iterdir())
    same = all((outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names)
    ok = codes == [0, 0] and same and "size_report.txt" in names
    record(8, ok, f"two cmd_size runs, {len(names)} files byte-identical: {same}")
    assert ok
