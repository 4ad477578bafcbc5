"""Model and result containers shared by the LP and MILP solvers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"
NODE_LIMIT = "node-limit"


@dataclass
class StandardFormModel:
    """min c @ x  s.t.  A @ x = b,  lb <= x <= ub,  x[integrality] integral.

    ``basis_hint`` optionally names one column per row forming a primal
    feasible starting basis; the solver verifies it and falls back to an
    artificial phase 1 otherwise.
    """

    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    names: list[str] | None = None
    basis_hint: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csc_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.integrality = np.asarray(self.integrality, dtype=bool)
        m, n = self.A.shape
        for name, arr, size in (("c", self.c, n), ("b", self.b, m), ("lb", self.lb, n),
                                ("ub", self.ub, n), ("integrality", self.integrality, n)):
            if arr.shape != (size,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({size},)")
        if self.names is not None and len(self.names) != n:
            raise ValueError("names must have one entry per variable")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("bounds must not be NaN")
        if np.any(self.lb > self.ub):
            bad = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"lower bound exceeds upper bound for variable {bad}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))):
            raise ValueError("objective and right-hand side must be finite")
        if np.any(self.integrality & ((self.lb < 0) | (self.ub > 1))):
            raise ValueError("integral variables must have bounds within [0, 1]")
        if self.basis_hint is not None:
            self.basis_hint = np.asarray(self.basis_hint, dtype=np.int64)
            if self.basis_hint.shape != (m,):
                raise ValueError("basis_hint needs one column index per row")

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def is_mip(self) -> bool:
        return bool(self.integrality.any())

    def relaxation(self) -> StandardFormModel:
        return replace(self, integrality=np.zeros(self.n_vars, dtype=bool))

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def residual(self, x: np.ndarray) -> float:
        """Largest absolute equality-row violation."""
        if self.n_rows == 0:
            return 0.0
        return float(np.max(np.abs(self.A @ x - self.b)))

    def bound_violation(self, x: np.ndarray) -> float:
        below = np.max(self.lb - x, initial=0.0)
        above = np.max(x - self.ub, initial=0.0)
        return float(max(below, above))

    def to_lp_text(self) -> str:
        """Plain-text LP-format listing for cross-checking with external tools."""
        names = self.names or [f"x{j}" for j in range(self.n_vars)]

        def term(coef, name, first):
            sign = "-" if coef < 0 else ("" if first else "+")
            mag = abs(coef)
            body = name if mag == 1 else f"{mag:.12g} {name}"
            return f"{sign} {body}".strip() if first else f"{sign} {body}"

        lines = ["\\ generated by mgsizing", "Minimize", " obj:"]
        obj_terms = [term(cj, names[j], i == 0)
                     for i, (j, cj) in enumerate((j, cj) for j, cj in enumerate(self.c) if cj != 0)]
        lines[-1] += " " + (" ".join(obj_terms) if obj_terms else "0")
        lines.append("Subject To")
        csr = self.A.tocsr()
        for i in range(self.n_rows):
            lo, hi = csr.indptr[i], csr.indptr[i + 1]
            terms = [term(v, names[j], k == 0)
                     for k, (j, v) in enumerate(zip(csr.indices[lo:hi], csr.data[lo:hi]))]
            lines.append(f" r{i}: {' '.join(terms) if terms else '0'} = {self.b[i]:.12g}")
        lines.append("Bounds")
        for j, name in enumerate(names):
            lo, hi = self.lb[j], self.ub[j]
            if lo == hi:
                lines.append(f" {name} = {lo:.12g}")
            elif np.isinf(hi):
                lines.append(f" {name} >= {lo:.12g}" if np.isfinite(lo) else f" {name} free")
            else:
                lines.append(f" {lo:.12g} <= {name} <= {hi:.12g}")
        ints = [names[j] for j in np.flatnonzero(self.integrality)]
        if ints:
            lines.append("Binary")
            lines.extend(f" {name}" for name in ints)
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class SolveReport:
    status: str
    objective: float
    x: np.ndarray | None
    iterations: int = 0
    nodes: int = 0
    wall_time: float = field(default=0.0, compare=False)
    # (head, at_upper) of the final basis; used for warm starts, not part of equality
    basis: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False, compare=False)
    incumbent_history: list[float] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def __eq__(self, other):
        if not isinstance(other, SolveReport):
            return NotImplemented
        same_x = (self.x is None and other.x is None) or (
            self.x is not None and other.x is not None and np.array_equal(self.x, other.x))
        return (self.status == other.status and self.objective == other.objective
                and self.iterations == other.iterations and self.nodes == other.nodes
                and same_x and self.incumbent_history == other.incumbent_history)
