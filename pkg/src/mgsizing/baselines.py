"""Comparison dispatch policies: SOC-lattice dynamic programming and a greedy rule.

Both are reference policies of our own construction. The DP moves the
battery between points of a uniform SOC lattice (the first step starts from
the carried-in SOC, which need not lie on the lattice) and buys each hour's
residual demand at least cost with explicit diesel on/off enumeration. The
greedy rule looks only at the current hour and never charges from the grid
or the diesel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import (DispatchProblem, DispatchSolution, DispatchSolveError, hourly_supply,
                       schedule_cost, schedule_from_battery)
from .solver.model import INFEASIBLE, OPTIMAL


@dataclass(frozen=True)
class DPConfig:
    soc_levels: int = 51

    def __post_init__(self):
        if int(self.soc_levels) != self.soc_levels or self.soc_levels < 2:
            raise ValueError("soc_levels must be an integer >= 2")


def soc_lattice(problem: DispatchProblem, levels: int) -> np.ndarray:
    lo, hi = problem.soc_min, problem.soc_max
    if hi <= lo:
        return np.array([lo])
    return lo + (hi - lo) * (np.arange(levels) / (levels - 1))


def _transition_costs(problem: DispatchProblem, t: int, soc_from: np.ndarray,
                      soc_to: np.ndarray) -> np.ndarray:
    """Cost of hour t for every move soc_from[i] -> soc_to[j] (inf if impossible)."""
    prm = problem.params
    delta = soc_to[None, :] - soc_from[:, None]
    ch = np.where(delta > 0, delta / prm.eta_ch, 0.0)
    dis = np.where(delta < 0, -delta * prm.eta_disch, 0.0)
    cost, *_ = hourly_supply(problem.load[t] + ch - dis, problem.pv_max[t], problem.price[t],
                             problem.p_D[t], prm.P_D_min, prm.P_D_max, min_power=True)
    rate = problem.battery_power_limit
    return np.where((ch <= rate) & (dis <= rate), cost, np.inf)


def dp_dispatch(problem: DispatchProblem, cfg: DPConfig = DPConfig()) -> DispatchSolution:
    """Backward-recursion DP over the SOC lattice; honours the diesel minimum."""
    grid = soc_lattice(problem, cfg.soc_levels)
    T = problem.T
    value = np.zeros(grid.size)
    policy = []
    for t in range(T - 1, 0, -1):
        total = _transition_costs(problem, t, grid, grid) + value[None, :]
        choice = np.argmin(total, axis=1)
        policy.append(choice)
        value = total[np.arange(grid.size), choice]
    policy.reverse()
    first = _transition_costs(problem, 0, np.array([problem.soc_start]), grid)[0] + value
    j = int(np.argmin(first))
    if not np.isfinite(first[j]):
        raise DispatchSolveError(INFEASIBLE, "no feasible SOC path on the DP lattice")
    path = np.empty(T + 1)
    path[0] = problem.soc_start
    path[1] = grid[j]
    for t in range(1, T):
        j = int(policy[t - 1][j])
        path[t + 1] = grid[j]
    sol = schedule_from_battery(problem, path, min_power=True, method="dp")
    sol.meta["soc_levels"] = int(cfg.soc_levels)
    return sol


def greedy_dispatch(problem: DispatchProblem) -> DispatchSolution:
    """One-step-ahead rule.

    Each hour: PV serves the load; surplus PV charges the battery (the rest is
    curtailed); the battery covers what it can of the deficit; diesel takes the
    remainder only if it is cheaper than the grid and the remainder reaches
    P_D_min; everything else is imported.
    """
    prm = problem.params
    T = problem.T
    lo, hi = problem.soc_min, problem.soc_max
    rate = problem.battery_power_limit
    out = {k: np.zeros(T) for k in ("P_G", "P_D", "P_PV", "P_B_ch", "P_B_disch")}
    soc = np.empty(T + 1)
    soc[0] = problem.soc_start
    u = np.zeros(T, dtype=int)
    for t in range(T):
        s = soc[t]
        pv = min(problem.load[t], problem.pv_max[t])
        surplus = problem.pv_max[t] - pv
        deficit = problem.load[t] - pv
        ch = max(0.0, min(surplus, rate, (hi - s) / prm.eta_ch))
        s += prm.eta_ch * ch
        dis = max(0.0, min(deficit, rate, (s - lo) * prm.eta_disch))
        s -= dis / prm.eta_disch
        deficit -= dis
        diesel = 0.0
        if deficit > 0 and deficit >= prm.P_D_min and problem.p_D[t] < problem.price[t] \
                and prm.P_D_max > 0:
            diesel = min(deficit, prm.P_D_max)
            u[t] = 1
        out["P_PV"][t] = pv + ch
        out["P_B_ch"][t] = ch
        out["P_B_disch"][t] = dis
        out["P_D"][t] = diesel
        out["P_G"][t] = deficit - diesel
        soc[t + 1] = min(max(s, lo), hi)
    sol = DispatchSolution(**out, SOC=soc, op_cost=schedule_cost(problem, out["P_G"], out["P_D"]),
                           status=OPTIMAL, u_D=u, method="greedy")
    sol.check(problem, min_power=True)
    return sol
