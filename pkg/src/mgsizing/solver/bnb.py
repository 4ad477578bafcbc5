"""Best-first branch-and-bound over binary variables.

Each node is an LP relaxation with some binaries fixed. A node is
re-optimized with dual simplex iterations starting from whatever optimal
basis the previous node left behind: changing bounds never breaks dual
feasibility, so no refactorization is needed when the search jumps between
branches of the tree.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

import numpy as np

from .model import (INFEASIBLE, ITERATION_LIMIT, NODE_LIMIT, OPTIMAL, UNBOUNDED, SolveReport,
                    StandardFormModel)
from . import _kernels as _k
from .simplex import MAX_ITER, SimplexEngine, SingularBasis

INT_TOL = 1e-6
NODE_LIMIT_DEFAULT = 1_000_000


@dataclass
class _Node:
    lb: np.ndarray  # 0/1 bounds of the integral columns, int8 to keep the heap small
    ub: np.ndarray
    depth: int


class _SlackRounding:
    """Moves zero-cost binaries to an integer value by absorbing the change in slacks.

    A slack here is a continuous zero-cost column with a single nonzero. If
    every row touched by a binary has such a slack whose adjusted value stays
    within bounds, the rounded point is another optimal solution of the same
    node LP. Fractionality is judged on the rounded point, so binaries that
    are only fractional through LP degeneracy are never branched on. Binaries
    that share a slack with another binary are left alone.
    """

    def __init__(self, model: StandardFormModel, int_idx: np.ndarray):
        A = model.A.tocsc()
        nnz = np.diff(A.indptr)
        slack_of_row = {}
        for j in np.flatnonzero((nnz == 1) & (model.c == 0) & ~model.integrality):
            row = int(A.indices[A.indptr[j]])
            slack_of_row.setdefault(row, (int(j), float(A.data[A.indptr[j]])))
        plans = {}
        for k, j in enumerate(int_idx):
            rows = A.indices[A.indptr[j]:A.indptr[j + 1]]
            vals = A.data[A.indptr[j]:A.indptr[j + 1]]
            if model.c[j] == 0 and all(int(r) in slack_of_row for r in rows):
                plans[k] = [(slack_of_row[int(r)][0], a / slack_of_row[int(r)][1])
                            for r, a in zip(rows, vals)]
        used = [sl for steps in plans.values() for sl, _ in steps]
        shared = {sl for sl in used if used.count(sl) > 1}
        plans = {k: st for k, st in plans.items() if not shared & {sl for sl, _ in st}}
        width = max((len(st) for st in plans.values()), default=0)
        self.k = np.array(sorted(plans), dtype=np.int64)
        self.cols = int_idx[self.k]
        # padded with a dummy (slack 0, ratio 0) entry, which never moves
        self.slack = np.zeros((self.k.size, width), dtype=np.int64)
        self.ratio = np.zeros((self.k.size, width))
        for row, k in enumerate(self.k):
            for c, (sl, r) in enumerate(plans[k]):
                self.slack[row, c] = sl
                self.ratio[row, c] = r
        self.lb = model.lb
        self.ub = model.ub

    def apply(self, x: np.ndarray, node_lb, node_ub, tol: float) -> None:
        """Round in place every fractional binary that admits it."""
        if self.k.size:
            _k.slack_round(x, self.cols, self.k, self.slack, self.ratio, self.lb, self.ub,
                           node_lb, node_ub, tol)


def _prune_tol(incumbent: float, rel_gap: float) -> float:
    if not np.isfinite(incumbent):
        return 0.0
    return max(1e-9 * max(1.0, abs(incumbent)), rel_gap * abs(incumbent))


def solve_milp(model: StandardFormModel, rel_gap: float = 0.0, node_limit: int = NODE_LIMIT_DEFAULT,
               int_tol: float = INT_TOL, max_iter: int = MAX_ITER,
               cutoff: float = np.inf) -> SolveReport:
    """Exact (``rel_gap=0``) optimum of a model whose integral columns are binary.

    Nodes are taken best bound first, deepest first among equal bounds.
    Branching is on the most fractional binary (lowest index among ties).
    ``max_iter`` caps the simplex iterations of each node LP. On hitting
    ``node_limit`` the best incumbent is returned with status ``node-limit``.
    Only solutions strictly cheaper than ``cutoff`` are accepted; if none
    exists the status is ``infeasible``.
    """
    t0 = time.perf_counter()
    int_idx = np.flatnonzero(model.integrality)
    eng = SimplexEngine(model, max_iter=max_iter)
    status = eng.start()
    if status != OPTIMAL or int_idx.size == 0:
        return _finish(eng, status, None, np.inf, 0, [], t0)

    incumbent_x = None
    incumbent = float(cutoff)
    history: list[float] = []
    seq = itertools.count()
    heap: list = []
    nodes = 0
    rounding = _SlackRounding(model, int_idx)
    node = _Node(model.lb[int_idx].astype(np.int8), model.ub[int_idx].astype(np.int8), 0)
    node_status = status  # the root is already solved

    while True:
        nodes += 1
        if node_status == ITERATION_LIMIT:
            return _finish(eng, ITERATION_LIMIT, incumbent_x, incumbent, nodes, history, t0)
        if node_status == OPTIMAL:
            x = eng.x[: eng.n].copy()
            rounding.apply(x, node.lb, node.ub, int_tol)
            obj = float(model.c @ x)
            if obj < incumbent - _prune_tol(incumbent, rel_gap):
                frac = np.abs(x[int_idx] - np.round(x[int_idx]))
                if np.all(frac <= int_tol):
                    incumbent = obj
                    incumbent_x = x
                    incumbent_x[int_idx] = np.round(incumbent_x[int_idx])
                    history.append(incumbent)
                else:
                    # argmax returns the lowest index among ties
                    k = int(np.argmax(frac))
                    value = x[int_idx[k]]
                    down = _Node(node.lb.copy(), node.ub.copy(), node.depth + 1)
                    down.ub[k] = np.floor(value)
                    up = _Node(node.lb.copy(), node.ub.copy(), node.depth + 1)
                    up.lb[k] = np.ceil(value)
                    # among equal bounds the child on the nearer side comes first
                    near_up = value - np.floor(value) >= 0.5
                    for child in ((up, down) if near_up else (down, up)):
                        heapq.heappush(heap, (obj, -child.depth, next(seq), child))

        node = None
        while heap:
            bound, _, _, cand = heapq.heappop(heap)
            if bound < incumbent - _prune_tol(incumbent, rel_gap):
                node = cand
                break
        if node is None:
            break
        if nodes >= node_limit:
            return _finish(eng, NODE_LIMIT, incumbent_x, incumbent, nodes, history, t0)
        eng.max_iter = eng.iterations + max_iter
        node_status = _solve_node(eng, model, node, int_idx)

    status = OPTIMAL if incumbent_x is not None else INFEASIBLE
    return _finish(eng, status, incumbent_x, incumbent, nodes, history, t0)


def _solve_node(eng: SimplexEngine, model, node: _Node, int_idx) -> str:
    """Re-optimize with dual simplex from the basis left by the previous node."""
    try:
        eng.set_bounds(int_idx, node.lb, node.ub)
        return eng.dual()
    except SingularBasis:
        # numerical trouble on the warm start: solve this node from scratch
        fresh = SimplexEngine(model, max_iter=eng.max_iter - eng.iterations)
        fresh.lb[int_idx] = node.lb
        fresh.ub[int_idx] = node.ub
        status = fresh.start()
        fresh.iterations += eng.iterations
        fresh.max_iter += eng.iterations
        eng.__dict__.update(fresh.__dict__)
        return status


def _finish(eng, status, x, obj, nodes, history, t0) -> SolveReport:
    wall = time.perf_counter() - t0
    if status == OPTIMAL and x is None:
        # no integral columns: the relaxation is the answer
        x = eng.x[: eng.n].copy()
        obj = float(eng.model.c @ x)
    if x is None:
        obj = {INFEASIBLE: np.inf, UNBOUNDED: -np.inf}.get(status, np.nan)
        if status in (INFEASIBLE, UNBOUNDED):
            return SolveReport(status, obj, None, iterations=eng.iterations, nodes=nodes,
                               wall_time=wall, incumbent_history=history)
    return SolveReport(status, float(obj), x, iterations=eng.iterations, nodes=nodes,
                       wall_time=wall, incumbent_history=history)
