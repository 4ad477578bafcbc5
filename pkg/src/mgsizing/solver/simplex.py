"""Bounded-variable revised simplex.

Variables with finite upper bounds are handled natively: a nonbasic variable
sits at its lower or upper bound and may flip between them without a basis
change. The basis inverse is kept dense and updated by rank-one eta steps,
with a sparse LU refactorization every ``REFACTOR_EVERY`` pivots. Pricing is
Dantzig's rule; after ``STALL_LIMIT`` consecutive degenerate pivots the
primal switches to Bland's rule, which cannot cycle.

The dual iteration is used by branch-and-bound to re-optimize a child node
from its parent's optimal basis after a bound change.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels as _k
from .model import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, SolveReport, StandardFormModel

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 256
STALL_LIMIT = 50
MAX_ITER = 50_000


class SingularBasis(RuntimeError):
    pass


class SimplexEngine:
    """Working memory for one model: bounds, basis, basis inverse, primal values.

    The engine owns copies of the bounds so branch-and-bound can tighten them
    in place between solves. When no usable starting basis exists, one
    artificial column per row is appended (cost 1 in phase 1, then fixed at
    zero), so ``n_total`` may exceed the model's variable count.
    """

    def __init__(self, model: StandardFormModel, max_iter: int = MAX_ITER):
        self.model = model
        self.m, self.n = model.A.shape
        self.max_iter = max_iter
        self.b = model.b.copy()
        self.cost = model.c.copy()
        self._set_matrix(model.A.tocsc(), model.lb.copy(), model.ub.copy())
        self.iterations = 0
        self.n_artificial = 0
        self.head: np.ndarray | None = None

    def _set_matrix(self, A, lb, ub):
        self.A = sp.csc_matrix(A)
        self.AT = self.A.T.tocsr()
        self.lb = lb
        self.ub = ub
        self.n_total = self.A.shape[1]

    # ------------------------------------------------------------------ basis
    def _resting_values(self) -> np.ndarray:
        """Default nonbasic values: the lower bound, else the upper bound, else zero."""
        return np.where(np.isfinite(self.lb), self.lb, np.where(np.isfinite(self.ub), self.ub, 0.0))

    def load_basis(self, head: np.ndarray, at_upper: np.ndarray | None = None):
        """Install a basis; nonbasic variables go to the bound given by ``at_upper``."""
        self.head = np.array(head, dtype=np.int64)
        self.is_basic = np.zeros(self.n_total, dtype=bool)
        self.is_basic[self.head] = True
        if at_upper is None:
            at_upper = np.zeros(self.n_total, dtype=bool)
        self.at_upper = np.array(at_upper, dtype=bool)
        self.at_upper &= np.isfinite(self.ub)
        self.at_upper[self.is_basic] = False
        self.x = np.where(self.at_upper, self.ub, self._resting_values())
        self.refactor()

    def refactor(self):
        B = self.A[:, self.head]
        try:
            lu = splu(sp.csc_matrix(B), permc_spec="NATURAL")
        except RuntimeError:
            try:
                lu = splu(sp.csc_matrix(B))
            except RuntimeError as exc:
                raise SingularBasis(str(exc)) from exc
        Binv = lu.solve(np.eye(self.m))
        if not np.all(np.isfinite(Binv)):
            raise SingularBasis("basis factorization produced non-finite values")
        # column-major: the kernels read and update B^-1 column by column
        self.Binv = np.asfortranarray(Binv)
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.head] = self.Binv @ (self.b - self.A @ xn)
        self._since_refactor = 0
        self._price()

    def _price(self):
        y = self.cost[self.head] @ self.Binv
        self.d = self.cost - self.AT @ y
        self.d[self.head] = 0.0

    def set_bounds(self, idx: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        """Change bounds of columns ``idx`` keeping the basis; basic values are recomputed.

        Nonbasic boxed columns among ``idx`` are placed on the bound their
        reduced cost favours, so a dual feasible basis stays dual feasible.
        """
        changed = (self.lb[idx] != lb) | (self.ub[idx] != ub)
        if not changed.any():
            return
        idx, lb, ub = idx[changed], lb[changed], ub[changed]
        self.lb[idx] = lb
        self.ub[idx] = ub
        nb = idx[~self.is_basic[idx]]
        if nb.size == 0:
            return
        dtol = self._dtol()
        d = self.d[nb]
        up = np.where(d < -dtol, True, np.where(d > dtol, False, self.at_upper[nb]))
        up &= np.isfinite(self.ub[nb])
        self.at_upper[nb] = up
        lo = self.lb[nb]
        rest = np.where(np.isfinite(lo), lo, np.where(np.isfinite(self.ub[nb]), self.ub[nb], 0.0))
        value = np.where(up, self.ub[nb], rest)
        delta = value - self.x[nb]
        moved = delta != 0
        if moved.any():
            cols, step = nb[moved], delta[moved]
            self.x[cols] = value[moved]
            _k.shift_basics(self.A.indptr, self.A.indices, self.A.data, self.Binv, self.head,
                            self.x, cols.astype(np.int64), step)

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        return self.head.copy(), self.at_upper.copy()

    # ------------------------------------------------------------ feasibility
    def primal_infeasibility(self) -> np.ndarray:
        xb = self.x[self.head]
        return np.maximum(self.lb[self.head] - xb, 0.0) + np.maximum(xb - self.ub[self.head], 0.0)

    def _feas_tol(self) -> np.ndarray:
        xb = self.x[self.head]
        return PRIMAL_TOL * np.maximum(1.0, np.abs(xb))

    def is_primal_feasible(self) -> bool:
        return bool(np.all(self.primal_infeasibility() <= self._feas_tol()))

    # ----------------------------------------------------------- iterations
    def _dtol(self) -> float:
        return DUAL_TOL * max(1.0, float(np.max(np.abs(self.cost), initial=0.0)))

    def _kernel_args(self):
        return (self.A.indptr, self.A.indices, self.A.data, self.lb, self.ub, self.head,
                self.is_basic, self.at_upper, self.x, self.Binv, self.d)

    def primal(self, cost: np.ndarray | None = None) -> str:
        """Primal simplex from the current (primal feasible) basis."""
        if cost is not None:
            self.cost = cost
            self._price()
        state = np.zeros(2, dtype=np.int64)
        while True:
            budget = REFACTOR_EVERY - self._since_refactor
            code, its, pivots = _k.primal_kernel(
                *self._kernel_args(), self._dtol(), PIVOT_TOL, budget,
                self.max_iter - self.iterations, STALL_LIMIT, state)
            self.iterations += its
            self._since_refactor += pivots
            if code == _k.UNBOUNDED:
                return UNBOUNDED
            if code == _k.ITER_LIMIT:
                return ITERATION_LIMIT
            if code == _k.REFACTOR:
                self.refactor()
                continue
            # no improving column: confirm with recomputed duals and residuals
            if self._since_refactor > 0 and not self._accurate():
                self.refactor()
                if not self.is_primal_feasible():
                    return self.dual(cost=None, _from_primal=True)
                continue
            self._price()
            if self.dual_feasible(DUAL_TOL):
                return OPTIMAL

    def _accurate(self) -> bool:
        """Whether the eta-updated iterate still satisfies A x = b tightly."""
        resid = np.max(np.abs(self.A @ self.x - self.b), initial=0.0)
        return resid <= 1e-9 * max(1.0, float(np.max(np.abs(self.b), initial=0.0)))

    def dual_feasible(self, tol: float = 1e-7) -> bool:
        dtol = tol * max(1.0, float(np.max(np.abs(self.cost), initial=0.0)))
        return not _k.dual_infeasible(self.lb, self.ub, self.is_basic, self.at_upper, self.d, dtol)

    def dual(self, cost: np.ndarray | None = None, _from_primal: bool = False) -> str:
        """Dual simplex from the current (dual feasible) basis."""
        if cost is not None:
            self.cost = cost
            self._price()
        stuck = 0
        while True:
            budget = REFACTOR_EVERY - self._since_refactor
            code, its, pivots = _k.dual_kernel(
                *self._kernel_args(), PRIMAL_TOL, PIVOT_TOL, budget,
                self.max_iter - self.iterations)
            self.iterations += its
            self._since_refactor += pivots
            if code == _k.INFEASIBLE:
                return INFEASIBLE
            if code == _k.ITER_LIMIT:
                return ITERATION_LIMIT
            if code == _k.REFACTOR:
                stuck = stuck + 1 if pivots == 0 else 0
                if stuck > 2:
                    raise SingularBasis("dual simplex cannot find a stable pivot")
                self.refactor()
                continue
            if self._since_refactor > 0 and not self._accurate():
                self.refactor()
                continue
            # the kernel keeps d current; recompute it only to confirm a failure
            if self.dual_feasible():
                return OPTIMAL
            self._price()
            if self.dual_feasible():
                return OPTIMAL
            if _from_primal:
                raise SingularBasis("basis lost both primal and dual feasibility")
            return self.primal()

    # --------------------------------------------------------------- drivers
    def add_artificials(self):
        """Append one artificial per row so the all-artificial basis is feasible."""
        x0 = self._resting_values()
        resid = self.b - self.A @ x0
        sign = np.where(resid >= 0, 1.0, -1.0)
        art = sp.diags(sign, format="csc")
        A = sp.hstack([self.A, art], format="csc")
        lb = np.concatenate([self.lb, np.zeros(self.m)])
        ub = np.concatenate([self.ub, np.full(self.m, np.inf)])
        self.n_artificial = self.m
        self.cost = np.concatenate([self.model.c, np.zeros(self.m)])
        self._set_matrix(A, lb, ub)
        head = np.arange(self.n, self.n + self.m)
        at_upper = np.zeros(self.n_total, dtype=bool)
        at_upper[: self.n] = np.isinf(lb[: self.n]) & np.isfinite(ub[: self.n])
        return head, at_upper

    def two_phase(self) -> str:
        head, at_upper = self.add_artificials()
        self.load_basis(head, at_upper)
        phase1 = np.concatenate([np.zeros(self.n), np.ones(self.m)])
        status = self.primal(phase1)
        if status != OPTIMAL:
            return status
        art_sum = float(np.sum(self.x[self.n:]))
        if art_sum > PRIMAL_TOL * max(1.0, float(np.max(np.abs(self.b), initial=0.0))) * self.m:
            return INFEASIBLE
        self.ub[self.n:] = 0.0
        self.x[self.n:][~self.is_basic[self.n:]] = 0.0
        cost = np.concatenate([self.model.c, np.zeros(self.m)])
        return self.primal(cost)

    def start(self) -> str:
        """Solve from the model's basis hint when it is usable, else two-phase."""
        hint = self.model.basis_hint
        if hint is not None:
            try:
                self.load_basis(hint)
            except SingularBasis:
                pass
            else:
                if self.is_primal_feasible():
                    return self.primal()
        return self.two_phase()

    def solution(self) -> np.ndarray:
        return self.x[: self.n].copy()


def solve_lp(model: StandardFormModel, max_iter: int = MAX_ITER) -> SolveReport:
    """Solve the continuous relaxation of ``model`` (integrality is ignored)."""
    t0 = time.perf_counter()
    eng = SimplexEngine(model, max_iter=max_iter)
    status = eng.start()
    return _report(eng, status, t0)


def _report(eng: SimplexEngine, status: str, t0: float) -> SolveReport:
    if status == OPTIMAL:
        x = eng.solution()
        obj = float(eng.model.c @ x)
        return SolveReport(OPTIMAL, obj, x, iterations=eng.iterations,
                           wall_time=time.perf_counter() - t0, basis=eng.basis())
    obj = {INFEASIBLE: np.inf, UNBOUNDED: -np.inf}.get(status, np.nan)
    x = eng.solution() if status == ITERATION_LIMIT and eng.head is not None else None
    return SolveReport(status, obj, x, iterations=eng.iterations, wall_time=time.perf_counter() - t0)
