"""Brute-force reference for small dispatch problems.

Each hour the battery moves to one of a finite set of candidate SOC levels:
``grid_points`` evenly spaced levels between the SOC bounds, the levels
reached by "breakpoint" actions (idle, full charge or discharge, covering
the net load exactly, diesel exactly at its minimum or maximum), and the
levels from which a chain of breakpoint actions in later hours ends exactly
at a SOC bound. The last family contains the vertices of the simple model
where the battery charges exactly what later hours will use. All sequences
are enumerated; paths that reach the same SOC are merged, which loses
nothing because their futures are identical. The supply side of each hour is
solved in closed form by :func:`hourly_supply`, commitment included, so the
result is the cost of a feasible schedule: an upper bound on the true
optimum that tightens as the grid is refined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dispatch import (DispatchProblem, DispatchSolution, battery_step, hourly_supply,
                        schedule_from_battery)

MAX_HOURS = 6
MAX_GRID_POINTS = 21
MAX_PAIRS = 5_000_000


class OracleSizeError(ValueError):
    pass


@dataclass
class OracleResult:
    cost: float
    soc: np.ndarray  # T + 1 values

    def schedule(self, problem: DispatchProblem, min_power: bool = True) -> DispatchSolution:
        return schedule_from_battery(problem, self.soc, min_power, method="oracle")


def _actions(problem: DispatchProblem, t: int, min_power: bool) -> np.ndarray:
    """Net battery outputs (positive discharges) at which hour t's cost changes slope."""
    prm = problem.params
    net_load = problem.load[t] - problem.pv_max[t]
    out = [0.0, net_load, problem.load[t], net_load - prm.P_D_max]
    if min_power:
        out.append(net_load - prm.P_D_min)
    rate = problem.battery_power_limit
    if np.isfinite(rate):
        out += [rate, -rate]
    return np.unique(out)


def _inverse_step(problem: DispatchProblem, soc_after, net):
    prm = problem.params
    return np.where(net >= 0, soc_after + net / prm.eta_disch, soc_after + net * prm.eta_ch)


def _anchored_levels(problem: DispatchProblem, min_power: bool) -> list[np.ndarray]:
    """levels[t]: SOC values at time t that breakpoint actions carry onto a SOC bound later."""
    T = problem.T
    lo, hi = problem.soc_min, problem.soc_max
    levels = [np.array([lo, hi]) for _ in range(T + 1)]
    frontier = np.array([lo, hi])
    for t in range(T - 1, -1, -1):
        prev = _inverse_step(problem, frontier[:, None], _actions(problem, t, min_power)[None, :])
        prev = prev.ravel()
        prev = np.unique(prev[(prev >= lo) & (prev <= hi)])
        frontier = np.unique(np.concatenate([prev, [lo, hi]]))
        levels[t] = frontier
    return levels


def oracle_search(problem: DispatchProblem, grid_points: int, min_power: bool = True) -> OracleResult:
    """Cheapest schedule over the candidate SOC lattice (see module docstring)."""
    if problem.T > MAX_HOURS:
        raise OracleSizeError(f"oracle is limited to {MAX_HOURS} hours, got {problem.T}")
    if not 2 <= grid_points <= MAX_GRID_POINTS:
        raise OracleSizeError(f"grid_points must lie in [2, {MAX_GRID_POINTS}]")
    prm = problem.params
    lo, hi = problem.soc_min, problem.soc_max
    rate = problem.battery_power_limit
    lattice = lo + (hi - lo) * np.linspace(0.0, 1.0, grid_points)
    anchored = _anchored_levels(problem, min_power)

    soc = np.array([problem.soc_start])
    cost = np.zeros(1)
    parents, socs = [], []
    for t in range(problem.T):
        forward = battery_step(problem, soc[:, None], _actions(problem, t, min_power)[None, :])
        fixed = np.concatenate([lattice, anchored[t + 1]])
        targets = np.concatenate([forward, np.broadcast_to(fixed, (soc.size, fixed.size))], axis=1)
        if targets.size > MAX_PAIRS:
            raise OracleSizeError(f"oracle would expand {targets.size} transitions at hour {t}")
        targets = np.clip(targets, lo, hi)
        delta = targets - soc[:, None]
        net = np.where(delta <= 0, -delta * prm.eta_disch, -delta / prm.eta_ch)
        step, *_ = hourly_supply(problem.load[t] - net, problem.pv_max[t], problem.price[t],
                                 problem.p_D[t], prm.P_D_min, prm.P_D_max, min_power)
        step = np.where(np.abs(net) <= rate * (1 + 1e-12), step, np.inf)
        total = (cost[:, None] + step).ravel()
        nxt = targets.ravel()
        parent = np.repeat(np.arange(soc.size), targets.shape[1])
        ok = np.isfinite(total)
        total, nxt, parent = total[ok], nxt[ok], parent[ok]
        # keep the cheapest path into each exact SOC value
        order = np.lexsort((total, nxt))
        first = np.ones(order.size, dtype=bool)
        first[1:] = nxt[order][1:] != nxt[order][:-1]
        keep = order[first]
        soc, cost = nxt[keep], total[keep]
        parents.append(parent[keep])
        socs.append(soc)
    best = int(np.argmin(cost))
    path = np.empty(problem.T + 1)
    path[0] = problem.soc_start
    idx = best
    for t in range(problem.T - 1, -1, -1):
        path[t + 1] = socs[t][idx]
        idx = parents[t][idx]
    return OracleResult(float(cost[best]), path)


def oracle_dispatch(problem: DispatchProblem, grid_points: int, min_power: bool = True) -> float:
    """Minimal cost found by :func:`oracle_search`.

    With ``min_power=False`` the diesel minimum is ignored, which makes the
    oracle a restriction of the simple (LP) model instead of the accurate one.
    """
    return oracle_search(problem, grid_points, min_power).cost
