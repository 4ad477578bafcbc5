"""Weekly dispatch problems: the LP (simple) and MILP (accurate) formulations.

Per hour t the decision variables are grid import P_G, diesel output P_D,
used PV output P_PV, battery charge and discharge power, and the state of
charge SOC(t) (T + 1 values; SOC(0) is pinned to the carried-in level).
The accurate model adds the diesel commitment binary u_D(t) and two slack
columns per hour for the linked bounds P_D_min * u <= P_D <= P_D_max * u.
The time step is one hour, so kW and kWh exchange 1:1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .solver.backends import EmbeddedBackend, SolverBackend
from .solver.model import OPTIMAL, SolveReport, StandardFormModel

TOL = 1e-6


class DispatchConsistencyError(RuntimeError):
    """A solver returned a schedule that violates the dispatch constraints."""


class DispatchSolveError(RuntimeError):
    """The solver did not reach an optimal solution for a dispatch problem."""

    def __init__(self, status: str, message: str = ""):
        super().__init__(message or f"dispatch solve ended with status {status!r}")
        self.status = status


@dataclass(frozen=True)
class Design:
    E_B: float  # battery capacity, kWh
    PV_size: float  # PV nameplate, kW

    def __post_init__(self):
        if not (np.isfinite(self.E_B) and np.isfinite(self.PV_size)):
            raise ValueError("design sizes must be finite")
        if self.E_B < 0 or self.PV_size < 0:
            raise ValueError(f"design sizes must be nonnegative, got {self}")

    def key(self) -> tuple[float, float]:
        return (self.E_B, self.PV_size)


@dataclass(frozen=True)
class DispatchParams:
    """Physical parameters of the microgrid.

    ``P_D_max`` and ``P_D_min`` may be left as None: they then resolve to the
    trace's peak load and ``diesel_min_frac * P_D_max`` via :meth:`resolve`.
    """

    p_D: float = 0.30
    P_D_max: float | None = None
    P_D_min: float | None = None
    diesel_min_frac: float = 0.3
    eta_ch: float = 0.95
    eta_disch: float = 0.95
    soc_min_frac: float = 0.1
    soc_max_frac: float = 1.0
    soc_init_frac: float = 0.5
    battery_power_limit_c: float | None = None

    def __post_init__(self):
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_disch <= 1):
            raise ValueError("efficiencies must lie in (0, 1]")
        if not (0 <= self.soc_min_frac < self.soc_max_frac <= 1):
            raise ValueError("need 0 <= soc_min_frac < soc_max_frac <= 1")
        if not (self.soc_min_frac <= self.soc_init_frac <= self.soc_max_frac):
            raise ValueError("soc_init_frac must lie within the SOC bounds")
        if self.p_D < 0:
            raise ValueError("diesel price must be nonnegative")
        if self.P_D_max is not None and self.P_D_max < 0:
            raise ValueError("P_D_max must be nonnegative")
        if self.P_D_min is not None:
            if self.P_D_min < 0:
                raise ValueError("P_D_min must be nonnegative")
            if self.P_D_max is not None and self.P_D_min > self.P_D_max:
                raise ValueError("P_D_min exceeds P_D_max")
        if not 0 <= self.diesel_min_frac <= 1:
            raise ValueError("diesel_min_frac must lie in [0, 1]")
        if self.battery_power_limit_c is not None and self.battery_power_limit_c < 0:
            raise ValueError("battery_power_limit_c must be nonnegative")

    @property
    def is_resolved(self) -> bool:
        return self.P_D_max is not None and self.P_D_min is not None

    def resolve(self, peak_load: float) -> DispatchParams:
        p_max = float(peak_load) if self.P_D_max is None else self.P_D_max
        p_min = self.diesel_min_frac * p_max if self.P_D_min is None else self.P_D_min
        return replace(self, P_D_max=p_max, P_D_min=p_min)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class DispatchProblem:
    design: Design
    params: DispatchParams
    load: np.ndarray
    price: np.ndarray
    availability: np.ndarray
    soc_start: float
    diesel_price: np.ndarray | None = None  # optional per-hour override of params.p_D

    def __post_init__(self):
        if not self.params.is_resolved:
            raise ValueError("DispatchParams must be resolved (P_D_max/P_D_min set)")
        self.load = np.asarray(self.load, dtype=float)
        self.price = np.asarray(self.price, dtype=float)
        self.availability = np.asarray(self.availability, dtype=float)
        T = self.load.shape[0]
        if T < 1 or self.price.shape != (T,) or self.availability.shape != (T,):
            raise ValueError("load, price and availability must be equal-length, non-empty series")
        if self.diesel_price is not None:
            self.diesel_price = np.asarray(self.diesel_price, dtype=float)
            if self.diesel_price.shape != (T,):
                raise ValueError("diesel_price must match the window length")
        lo, hi = self.soc_min, self.soc_max
        slack = 1e-9 * max(1.0, hi)
        if not (lo - slack <= self.soc_start <= hi + slack):
            raise ValueError(f"soc_start={self.soc_start} outside [{lo}, {hi}]")
        self.soc_start = float(min(max(self.soc_start, lo), hi))

    @property
    def T(self) -> int:
        return self.load.shape[0]

    @property
    def pv_max(self) -> np.ndarray:
        return self.availability * self.design.PV_size

    @property
    def soc_min(self) -> float:
        return self.params.soc_min_frac * self.design.E_B

    @property
    def soc_max(self) -> float:
        return self.params.soc_max_frac * self.design.E_B

    @property
    def p_D(self) -> np.ndarray:
        if self.diesel_price is not None:
            return self.diesel_price
        return np.full(self.T, self.params.p_D)

    @property
    def battery_power_limit(self) -> float:
        if self.design.E_B == 0:
            return 0.0
        c = self.params.battery_power_limit_c
        return np.inf if c is None else c * self.design.E_B


@dataclass
class DispatchSolution:
    P_G: np.ndarray
    P_D: np.ndarray
    P_PV: np.ndarray
    P_B_ch: np.ndarray
    P_B_disch: np.ndarray
    SOC: np.ndarray
    op_cost: float
    status: str = OPTIMAL
    u_D: np.ndarray | None = None
    method: str = "lp"
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.P_G.shape[0]

    def violations(self, problem: DispatchProblem, min_power: bool) -> dict[str, float]:
        """Largest violation of each constraint family (0 when satisfied)."""
        prm = problem.params
        balance = self.P_PV + self.P_D + self.P_G + self.P_B_disch - problem.load - self.P_B_ch
        soc_step = (self.SOC[1:] - self.SOC[:-1]
                    - prm.eta_ch * self.P_B_ch + self.P_B_disch / prm.eta_disch)
        neg = min(self.P_G.min(), self.P_D.min(), self.P_PV.min(), self.P_B_ch.min(),
                  self.P_B_disch.min())
        out = {
            "balance": float(np.max(np.abs(balance) / np.maximum(1.0, problem.load))),
            "soc_recursion": float(np.max(np.abs(soc_step))),
            "soc_start": abs(float(self.SOC[0]) - problem.soc_start),
            "nonnegativity": max(0.0, -float(neg)),
            "pv_limit": max(0.0, float(np.max(self.P_PV - problem.pv_max))),
            "soc_bounds": max(0.0, float(np.max(problem.soc_min - self.SOC)),
                              float(np.max(self.SOC - problem.soc_max))),
            "battery_power": max(0.0, float(np.max(np.maximum(self.P_B_ch, self.P_B_disch)
                                                   - problem.battery_power_limit))),
            "diesel_max": max(0.0, float(np.max(self.P_D - prm.P_D_max))),
        }
        if min_power:
            on = self.P_D > TOL
            low = np.where(on, prm.P_D_min - self.P_D, 0.0)
            out["diesel_min"] = max(0.0, float(np.max(low)))
        return out

    def check(self, problem: DispatchProblem, min_power: bool, tol: float = TOL):
        bad = {k: v for k, v in self.violations(problem, min_power).items() if v > tol}
        if bad:
            raise DispatchConsistencyError(f"{self.method} schedule violates constraints: {bad}")


def schedule_cost(problem: DispatchProblem, P_G: np.ndarray, P_D: np.ndarray) -> float:
    return float(problem.price @ P_G + problem.p_D @ P_D)


ROUND_TOL = 1e-9


def hourly_supply(residual, pv_max, p_G, p_D, P_D_min: float, P_D_max: float,
                  min_power: bool = True):
    """Cheapest way to cover ``residual`` kW in one hour from PV, grid and diesel.

    ``residual`` is the load plus battery charging minus battery discharge.
    PV is free and may be curtailed; grid import is unbounded; diesel runs in
    [P_D_min, P_D_max] when committed (in [0, P_D_max] if ``min_power`` is
    False). Both commitment states are evaluated and the cheaper is kept.
    Arguments broadcast. Returns (cost, P_PV, P_G, P_D, u_D) with cost = inf
    where no mix exists, which happens only for a negative residual.
    """
    r, pv_max, p_G, p_D = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                                for a in (residual, pv_max, p_G, p_D)))
    d_min = P_D_min if min_power else 0.0
    # round-off from the battery arithmetic must not turn an exact cover infeasible
    tol = ROUND_TOL * np.maximum(1.0, np.abs(r))
    r = np.where((r < 0) & (r >= -tol), 0.0, r)
    if d_min > 0:
        r = np.where((r < d_min) & (r >= d_min - tol), d_min, r)
    # diesel off
    pv0 = np.clip(r, 0.0, pv_max)
    g0 = np.maximum(r - pv_max, 0.0)
    cost0 = np.where(r >= 0, p_G * g0, np.inf)
    # diesel on: the forced minimum displaces PV first, then grid if cheaper
    feasible = (r >= d_min) & (P_D_max >= d_min) & (P_D_max > 0)
    cheap = p_D < p_G
    d1 = np.where(cheap, np.clip(r - pv_max, d_min, P_D_max), d_min)
    d1 = np.where(feasible, np.minimum(d1, np.maximum(r, d_min)), 0.0)
    pv1 = np.clip(r - d1, 0.0, pv_max)
    g1 = np.maximum(r - d1 - pv1, 0.0)
    cost1 = np.where(feasible, p_D * d1 + p_G * g1, np.inf)
    on = cost1 < cost0
    return (np.where(on, cost1, cost0), np.where(on, pv1, pv0), np.where(on, g1, g0),
            np.where(on, d1, 0.0), on.astype(int))


def battery_step(problem: DispatchProblem, soc, net):
    """SOC after one hour of net battery output ``net`` kW (positive discharges)."""
    prm = problem.params
    net = np.asarray(net, dtype=float)
    return np.where(net >= 0, soc - net / prm.eta_disch, soc - net * prm.eta_ch)


def schedule_from_battery(problem: DispatchProblem, soc: np.ndarray, min_power: bool,
                          method: str) -> DispatchSolution:
    """Schedule that follows a given SOC path and buys the rest at least cost each hour."""
    prm = problem.params
    soc = np.asarray(soc, dtype=float)
    step = np.diff(soc)
    ch = np.where(step > 0, step / prm.eta_ch, 0.0)
    dis = np.where(step < 0, -step * prm.eta_disch, 0.0)
    cost, pv, grid, diesel, on = hourly_supply(problem.load + ch - dis, problem.pv_max,
                                               problem.price, problem.p_D, prm.P_D_min,
                                               prm.P_D_max, min_power)
    if not np.all(np.isfinite(cost)):
        raise DispatchConsistencyError(f"{method}: SOC path has no feasible supply mix")
    sol = DispatchSolution(P_G=grid, P_D=diesel, P_PV=pv, P_B_ch=ch, P_B_disch=dis, SOC=soc,
                           op_cost=schedule_cost(problem, grid, diesel), method=method,
                           u_D=on if min_power else None)
    sol.check(problem, min_power=min_power)
    return sol


# ------------------------------------------------------------------- model
class VariableLayout:
    """Column offsets of each variable block for a window of T hours."""

    BLOCKS = ("P_G", "P_D", "P_PV", "P_B_ch", "P_B_disch")

    def __init__(self, T: int, milp: bool):
        self.T = T
        self.milp = milp
        self.P_G = 0
        self.P_D = T
        self.P_PV = 2 * T
        self.P_B_ch = 3 * T
        self.P_B_disch = 4 * T
        self.SOC = 5 * T
        self.u_D = 6 * T + 1
        self.s_up = 7 * T + 1
        self.s_lo = 8 * T + 1
        self.n = 9 * T + 1 if milp else 6 * T + 1
        self.m = 4 * T if milp else 2 * T

    def names(self) -> list[str]:
        T = self.T
        out = [f"{blk}_{t}" for blk in self.BLOCKS for t in range(T)]
        out += [f"SOC_{t}" for t in range(T + 1)]
        if self.milp:
            out += [f"{blk}_{t}" for blk in ("u_D", "s_up", "s_lo") for t in range(T)]
        return out


def _build(problem: DispatchProblem, milp: bool) -> StandardFormModel:
    T = problem.T
    prm = problem.params
    L = VariableLayout(T, milp)
    hours = np.arange(T)

    c = np.zeros(L.n)
    c[L.P_G + hours] = problem.price
    c[L.P_D + hours] = problem.p_D

    lb = np.zeros(L.n)
    ub = np.full(L.n, np.inf)
    ub[L.P_D + hours] = prm.P_D_max
    ub[L.P_PV + hours] = problem.pv_max
    rate = problem.battery_power_limit
    ub[L.P_B_ch + hours] = rate
    ub[L.P_B_disch + hours] = rate
    lb[L.SOC: L.SOC + T + 1] = problem.soc_min
    ub[L.SOC: L.SOC + T + 1] = problem.soc_max
    lb[L.SOC] = ub[L.SOC] = problem.soc_start

    rows, cols, vals = [], [], []

    def put(r, col, v):
        rows.append(r)
        cols.append(col)
        vals.append(np.broadcast_to(v, r.shape))

    # power balance: P_PV + P_D + P_G + P_disch - P_ch = load
    put(hours, L.P_PV + hours, 1.0)
    put(hours, L.P_D + hours, 1.0)
    put(hours, L.P_G + hours, 1.0)
    put(hours, L.P_B_disch + hours, 1.0)
    put(hours, L.P_B_ch + hours, -1.0)
    # SOC(t+1) - SOC(t) - eta_ch P_ch + P_disch / eta_disch = 0
    soc_rows = T + hours
    put(soc_rows, L.SOC + hours + 1, 1.0)
    put(soc_rows, L.SOC + hours, -1.0)
    put(soc_rows, L.P_B_ch + hours, -prm.eta_ch)
    put(soc_rows, L.P_B_disch + hours, 1.0 / prm.eta_disch)
    b = np.concatenate([problem.load, np.zeros(T)])
    hint = np.concatenate([L.P_G + hours, L.SOC + hours + 1])

    integrality = np.zeros(L.n, dtype=bool)
    if milp:
        up_rows = 2 * T + hours
        lo_rows = 3 * T + hours
        # P_D - P_D_max u + s_up = 0
        put(up_rows, L.P_D + hours, 1.0)
        put(up_rows, L.u_D + hours, -prm.P_D_max)
        put(up_rows, L.s_up + hours, 1.0)
        # P_D - P_D_min u - s_lo = 0
        put(lo_rows, L.P_D + hours, 1.0)
        put(lo_rows, L.u_D + hours, -prm.P_D_min)
        put(lo_rows, L.s_lo + hours, -1.0)
        ub[L.u_D + hours] = 1.0
        integrality[L.u_D + hours] = True
        b = np.concatenate([b, np.zeros(2 * T)])
        hint = np.concatenate([hint, L.s_up + hours, L.s_lo + hours])

    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(L.m, L.n))
    return StandardFormModel(c=c, A=A, b=b, lb=lb, ub=ub, integrality=integrality,
                             names=L.names(), basis_hint=hint)


def build_lp(problem: DispatchProblem) -> StandardFormModel:
    """The simple model: cost-minimal dispatch with 0 <= P_D <= P_D_max."""
    return _build(problem, milp=False)


def build_milp(problem: DispatchProblem) -> StandardFormModel:
    """The accurate model: diesel output is 0 or within [P_D_min, P_D_max]."""
    return _build(problem, milp=True)


# ------------------------------------------------------------- extraction
def _remove_simultaneous_flow(sol: DispatchSolution, problem: DispatchProblem, min_power: bool):
    """Replace a charge/discharge loop by its net flow where the balance allows it.

    The SOC trajectory is kept; the extra supply that a loss-free net flow
    frees up is taken off curtailable PV first, then grid import, then diesel
    (down to its minimum when committed). A loop that is the only available
    sink for forced diesel output is left in place.
    """
    prm = problem.params
    for t in np.flatnonzero(np.minimum(sol.P_B_ch, sol.P_B_disch) > 0):
        ch, dis = sol.P_B_ch[t], sol.P_B_disch[t]
        net_soc = prm.eta_ch * ch - dis / prm.eta_disch
        if net_soc >= 0:
            new_ch, new_dis = net_soc / prm.eta_ch, 0.0
        else:
            new_ch, new_dis = 0.0, -net_soc * prm.eta_disch
        # loss-free net flow returns more power to the bus; other sources give it up
        excess = (new_dis - new_ch) - (dis - ch)
        d_floor = prm.P_D_min if (min_power and sol.P_D[t] > TOL) else 0.0
        room = sol.P_PV[t] + sol.P_G[t] + max(sol.P_D[t] - d_floor, 0.0)
        if excess > room + 1e-12:
            continue
        take = max(excess, 0.0)
        for name in ("P_PV", "P_G", "P_D"):
            arr = getattr(sol, name)
            floor = d_floor if name == "P_D" else 0.0
            cut = min(take, max(arr[t] - floor, 0.0))
            arr[t] -= cut
            take -= cut
        sol.P_B_ch[t], sol.P_B_disch[t] = new_ch, new_dis


def extract_solution(model: StandardFormModel, raw: SolveReport, problem: DispatchProblem,
                     method: str | None = None) -> DispatchSolution:
    """Map a solver vector back to named hourly series and verify it."""
    if not raw.optimal:
        raise ValueError(f"cannot extract a schedule from a {raw.status} solve")
    milp = model.is_mip
    T = problem.T
    L = VariableLayout(T, milp)
    x = raw.x
    hours = np.arange(T)

    def block(start, size=T):
        return np.clip(x[start: start + size], model.lb[start: start + size],
                       model.ub[start: start + size]).astype(float)

    sol = DispatchSolution(
        P_G=block(L.P_G), P_D=block(L.P_D), P_PV=block(L.P_PV), P_B_ch=block(L.P_B_ch),
        P_B_disch=block(L.P_B_disch), SOC=block(L.SOC, T + 1), op_cost=raw.objective,
        u_D=np.round(x[L.u_D + hours]).astype(int) if milp else None,
        method=method or ("milp" if milp else "lp"),
        meta={"iterations": raw.iterations, "nodes": raw.nodes},
    )
    if milp:
        sol.P_D[(sol.u_D == 0) & (sol.P_D <= TOL)] = 0.0
    _remove_simultaneous_flow(sol, problem, min_power=milp)
    cost = schedule_cost(problem, sol.P_G, sol.P_D)
    if cost > raw.objective + TOL * max(1.0, abs(raw.objective)):
        raise DispatchConsistencyError(
            f"schedule cost {cost} exceeds solver objective {raw.objective}")
    sol.op_cost = cost
    sol.check(problem, min_power=milp)
    return sol


def solve_dispatch(problem: DispatchProblem, accurate: bool,
                   backend: SolverBackend | None = None) -> DispatchSolution:
    """Build and solve the simple (LP) or accurate (MILP) model of one window."""
    backend = backend or EmbeddedBackend()
    if accurate:
        model = build_milp(problem)
        raw = backend.solve_milp(model)
    else:
        model = build_lp(problem)
        raw = backend.solve_lp(model)
    if not raw.optimal:
        raise DispatchSolveError(raw.status)
    return extract_solution(model, raw, problem, method="milp" if accurate else "lp")
