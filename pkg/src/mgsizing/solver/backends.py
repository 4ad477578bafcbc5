"""Pluggable solver backends.

The embedded simplex/branch-and-bound is the reference implementation.
``HighsBackend`` routes the same models to the HiGHS solvers bundled with
SciPy and exists for cross-checking and for large runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .bnb import NODE_LIMIT_DEFAULT, solve_milp
from .model import (INFEASIBLE, ITERATION_LIMIT, NODE_LIMIT, OPTIMAL, UNBOUNDED, SolveReport,
                    StandardFormModel)
from .simplex import MAX_ITER, solve_lp


class SolverBackend(Protocol):
    name: str

    def solve_lp(self, model: StandardFormModel) -> SolveReport: ...

    def solve_milp(self, model: StandardFormModel) -> SolveReport: ...


@dataclass(frozen=True)
class EmbeddedBackend:
    rel_gap: float = 0.0
    node_limit: int = NODE_LIMIT_DEFAULT
    max_iter: int = MAX_ITER
    name: str = "embedded"

    def solve_lp(self, model: StandardFormModel) -> SolveReport:
        return solve_lp(model, max_iter=self.max_iter)

    def solve_milp(self, model: StandardFormModel) -> SolveReport:
        return solve_milp(model, rel_gap=self.rel_gap, node_limit=self.node_limit,
                          max_iter=self.max_iter)


@dataclass(frozen=True)
class HighsBackend:
    rel_gap: float = 0.0
    name: str = "highs"

    def solve_lp(self, model: StandardFormModel) -> SolveReport:
        return self._solve(model.relaxation())

    def solve_milp(self, model: StandardFormModel) -> SolveReport:
        return self._solve(model)

    def _solve(self, model: StandardFormModel) -> SolveReport:
        from scipy.optimize import Bounds, LinearConstraint, milp

        t0 = time.perf_counter()
        res = milp(model.c, constraints=LinearConstraint(model.A, model.b, model.b),
                   bounds=Bounds(model.lb, model.ub), integrality=model.integrality.astype(int),
                   options={"mip_rel_gap": self.rel_gap})
        # scipy.optimize.milp status: 0 optimal, 1 limit, 2 infeasible, 3 unbounded
        status = {0: OPTIMAL, 1: NODE_LIMIT if model.is_mip else ITERATION_LIMIT,
                  2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ITERATION_LIMIT)
        x = None if res.x is None else np.asarray(res.x, dtype=float)
        if x is not None and model.is_mip:
            x[model.integrality] = np.round(x[model.integrality])
        obj = float(model.c @ x) if x is not None else {
            INFEASIBLE: np.inf, UNBOUNDED: -np.inf}.get(status, np.nan)
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        return SolveReport(status, obj, x, nodes=nodes, wall_time=time.perf_counter() - t0)


BACKENDS = {"embedded": EmbeddedBackend, "highs": HighsBackend}


def get_backend(name: str, **options) -> SolverBackend:
    try:
        return BACKENDS[name](**options)
    except KeyError:
        raise ValueError(f"unknown solver backend {name!r}; choose from {sorted(BACKENDS)}") from None
