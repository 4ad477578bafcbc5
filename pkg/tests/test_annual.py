import numpy as np
import pytest

from mgsizing.annual import AnnualResult, evaluate_design
from mgsizing.dispatch import Design, DispatchParams
from mgsizing.economics import CostModel, total_cost
from mgsizing.timeseries import synth_trace

TRACE = synth_trace(1, 400)  # two full weeks plus a short tail window
DESIGN = Design(800.0, 500.0)


@pytest.mark.parametrize("method", ["lp", "milp", "dp", "greedy"])
def test_schedule_is_chained_over_windows(method):
    res = evaluate_design(TRACE, DESIGN, DispatchParams(), method, keep_schedules=True)
    assert len(res.window_costs) == 3 and res.hours == 400
    sched = res.schedule()
    assert sched["SOC"].size == 401 and sched["P_G"].size == 400
    eta = DispatchParams().eta_ch, DispatchParams().eta_disch
    step = eta[0] * sched["P_B_ch"] - sched["P_B_disch"] / eta[1]
    np.testing.assert_allclose(np.diff(sched["SOC"]), step, atol=1e-6)
    for prev, nxt in zip(res.solutions, res.solutions[1:]):
        assert nxt.SOC[0] == prev.SOC[-1]
    assert res.op_cost == pytest.approx(sum(res.window_costs))


def test_schedule_needs_kept_solutions():
    res = evaluate_design(TRACE, DESIGN, DispatchParams(), "greedy")
    with pytest.raises(ValueError):
        res.schedule()


def test_year_factor_scales_operation_and_energy():
    res = AnnualResult(DESIGN, "lp", 1000.0, 5e4, 336, [1000.0])
    f = 8760 / 336
    assert res.year_factor == pytest.approx(f)
    cm = CostModel()
    assert res.breakdown(cm) == total_cost(DESIGN, 1000.0 * f, cm, 5e4 * f)
    full = AnnualResult(DESIGN, "lp", 1000.0, 5e4, 8760, [1000.0])
    assert full.year_factor == 1.0
    # the same totals over a shorter trace mean proportionally more per year
    assert res.breakdown(cm).op_cost == pytest.approx(full.breakdown(cm).op_cost * f)


def test_unknown_method():
    with pytest.raises(ValueError):
        evaluate_design(TRACE, DESIGN, DispatchParams(), "heuristic")
