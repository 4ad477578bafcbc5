"""Year-long evaluation of one design: a dispatch problem per window, SOC chained."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import DPConfig, dp_dispatch, greedy_dispatch
from .dispatch import (Design, DispatchParams, DispatchProblem, DispatchSolution,
                       DispatchSolveError, solve_dispatch)
from .economics import CostBreakdown, CostModel, total_cost
from .solver.backends import SolverBackend
from .timeseries import HOURS_PER_YEAR, WEEK, HourlyTrace, windows

METHODS = ("lp", "milp", "dp", "greedy")
SCHEDULE_COLUMNS = ("P_G", "P_D", "P_PV", "P_B_ch", "P_B_disch")


class WindowFailure(RuntimeError):
    """A window of an annual evaluation could not be solved."""

    def __init__(self, window_index: int, start: int, status: str):
        super().__init__(f"window {window_index} (hour {start}) failed: {status}")
        self.window_index = window_index
        self.start = start
        self.status = status


@dataclass
class AnnualResult:
    design: Design
    method: str
    op_cost: float  # $ over the trace
    energy: float  # kWh served over the trace
    hours: int
    window_costs: list[float]
    solutions: list[DispatchSolution] = field(default_factory=list, repr=False)

    @property
    def year_factor(self) -> float:
        """Multiplier that scales trace totals to one year (1 for a full-year trace)."""
        return HOURS_PER_YEAR / self.hours

    def breakdown(self, cm: CostModel) -> CostBreakdown:
        """Annual cost and LCOE, with operation and energy scaled to a year."""
        f = self.year_factor
        return total_cost(self.design, self.op_cost * f, cm, self.energy * f)

    def schedule(self) -> dict[str, np.ndarray]:
        """Hourly series over the whole trace; SOC has H + 1 values."""
        if not self.solutions:
            raise ValueError("schedules were not kept for this evaluation")
        out = {k: np.concatenate([getattr(s, k) for s in self.solutions]) for k in SCHEDULE_COLUMNS}
        out["SOC"] = np.concatenate([self.solutions[0].SOC[:1]] + [s.SOC[1:] for s in self.solutions])
        return out


def solve_window(problem: DispatchProblem, method: str, backend: SolverBackend | None = None,
                 dp: DPConfig = DPConfig()) -> DispatchSolution:
    if method == "lp":
        return solve_dispatch(problem, accurate=False, backend=backend)
    if method == "milp":
        return solve_dispatch(problem, accurate=True, backend=backend)
    if method == "dp":
        return dp_dispatch(problem, dp)
    if method == "greedy":
        return greedy_dispatch(problem)
    raise ValueError(f"unknown dispatch method {method!r}; choose from {METHODS}")


def evaluate_design(trace: HourlyTrace, design: Design, params: DispatchParams, method: str,
                    window_length: int = WEEK, backend: SolverBackend | None = None,
                    dp: DPConfig = DPConfig(), keep_schedules: bool = False) -> AnnualResult:
    """Solve every window in order, carrying the final SOC into the next window.

    Raises :class:`WindowFailure` naming the first window that did not solve.
    """
    if not params.is_resolved:
        params = params.resolve(trace.peak_load)
    soc = params.soc_init_frac * design.E_B
    costs, sols = [], []
    for i, w in enumerate(windows(trace, window_length)):
        part = trace.slice(w)
        problem = DispatchProblem(design, params, part.load_kw, part.grid_price,
                                  part.pv_availability, soc)
        try:
            sol = solve_window(problem, method, backend, dp)
        except DispatchSolveError as exc:
            raise WindowFailure(i, w.start, exc.status) from exc
        costs.append(sol.op_cost)
        soc = float(sol.SOC[-1])
        if keep_schedules:
            sols.append(sol)
    return AnnualResult(design, method, float(np.sum(costs)), trace.energy, trace.H, costs, sols)
