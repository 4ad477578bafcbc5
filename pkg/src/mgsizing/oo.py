"""Two-phase ordinal optimization over (battery, PV) designs.

Phase 1 ranks N sampled designs by total annual cost under the simple
dispatch model. Phase 2 re-evaluates the best s of them under the accurate
model and ranks again. N follows from the wanted confidence P that at least
one sample falls in the top alpha fraction of all designs; s is the smallest
selection whose top-s set shares at least k members with the (unknown) top-g
set with probability AP_target, a hypergeometric tail.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np
from scipy.stats import kendalltau, spearmanr

from .annual import WindowFailure, evaluate_design
from .dispatch import Design, DispatchParams
from .economics import CostBreakdown, CostModel
from .solver.backends import SolverBackend
from .timeseries import WEEK, HourlyTrace

log = logging.getLogger(__name__)


# ------------------------------------------------------------ plan arithmetic
def compute_N(P: float, alpha: float) -> int:
    """Smallest N with 1 - (1 - alpha)^N >= P."""
    if not (0 < P < 1 and 0 < alpha < 1):
        raise ValueError("P and alpha must lie strictly between 0 and 1")
    n = max(1, math.ceil(math.log(1 - P) / math.log(1 - alpha)))
    # guard the ceiling against rounding in the log ratio, both ways
    while 1 - (1 - alpha) ** n < P:
        n += 1
    while n > 1 and 1 - (1 - alpha) ** (n - 1) >= P:
        n -= 1
    return n


def hypergeometric_pmf(N: int, g: int, s: int) -> list[Fraction]:
    """Exact probabilities that a random s-subset of N holds i = 0..min(g, s) of g marked items."""
    if not (0 <= g <= N and 0 <= s <= N):
        raise ValueError("need 0 <= g, s <= N")
    total = math.comb(N, s)
    return [Fraction(math.comb(g, i) * math.comb(N - g, s - i), total) for i in range(min(g, s) + 1)]


def alignment_probability_exact(N: int, g: int, s: int, k: int) -> Fraction:
    if not 1 <= k <= min(g, s):
        raise ValueError(f"need 1 <= k <= min(g, s), got k={k}, g={g}, s={s}")
    if not (g <= N and s <= N):
        raise ValueError(f"g and s must not exceed N={N}")
    return sum(hypergeometric_pmf(N, g, s)[k:], Fraction(0))


def alignment_probability(N: int, g: int, s: int, k: int) -> float:
    """Probability that the selected top-s set and the good top-g set share at least k designs."""
    return float(alignment_probability_exact(N, g, s, k))


def compute_s(N: int, g: int, k: int, AP_target: float) -> int:
    """Smallest s with alignment_probability(N, g, s, k) >= AP_target."""
    if not 0 < AP_target < 1:
        raise ValueError("AP_target must lie strictly between 0 and 1")
    if not 1 <= k <= g <= N:
        raise ValueError(f"need 1 <= k <= g <= N, got k={k}, g={g}, N={N}")
    target = Fraction(repr(float(AP_target)))  # the decimal the caller wrote, e.g. 9/10
    for s in range(k, N + 1):
        if alignment_probability_exact(N, g, s, k) >= target:
            return s
    raise ValueError(f"no s <= {N} reaches AP >= {AP_target}")  # unreachable: AP(N) = 1


@dataclass(frozen=True)
class OOPlan:
    P: float
    alpha: float
    N: int
    g: int
    k: int
    AP_target: float
    s: int
    AP: float  # alignment probability achieved by (N, g, s, k)

    def __post_init__(self):
        if self.N < compute_N(self.P, self.alpha):
            raise ValueError(f"N={self.N} is below the minimum {compute_N(self.P, self.alpha)} "
                             f"for P={self.P}, alpha={self.alpha}")
        if not 1 <= self.k <= min(self.g, self.s) <= self.N:
            raise ValueError("need 1 <= k <= min(g, s) <= N")
        if self.AP + 1e-12 < self.AP_target:
            raise ValueError(f"s={self.s} gives AP={self.AP:.4f} < target {self.AP_target}")

    @classmethod
    def build(cls, P: float = 0.99, alpha: float = 0.05, g_frac: float = 0.10, k: int = 1,
              AP_target: float = 0.90, N: int | None = None, s: int | None = None) -> OOPlan:
        """Plan from confidence settings; N and s default to their minimal values."""
        N = compute_N(P, alpha) if N is None else int(N)
        if not 0 < g_frac <= 1:
            raise ValueError("g_frac must lie in (0, 1]")
        g = min(N, max(1, math.floor(g_frac * N + 0.5)))
        if s is None:
            s = compute_s(N, g, k, AP_target)
        return cls(P=P, alpha=alpha, N=N, g=g, k=k, AP_target=AP_target, s=int(s),
                   AP=alignment_probability(N, g, int(s), k))

    def as_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------ sampling
@dataclass(frozen=True)
class DesignBounds:
    E_B_min: float = 500.0
    E_B_max: float = 5000.0
    PV_min: float = 500.0
    PV_max: float = 3000.0

    def __post_init__(self):
        for lo, hi, name in ((self.E_B_min, self.E_B_max, "E_B"), (self.PV_min, self.PV_max, "PV")):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"{name} bounds must be finite")
            if lo < 0 or lo > hi:
                raise ValueError(f"{name} bounds need 0 <= min <= max, got [{lo}, {hi}]")


SAMPLING_STRATEGIES = ("grid", "random")


def sample_designs(N: int, bounds: DesignBounds = DesignBounds(), strategy: str = "grid",
                   seed: int = 0) -> list[Design]:
    """N distinct designs in the bounds rectangle.

    ``grid`` lays out ceil(sqrt(N)) battery levels times ceil(N / that) PV
    levels and keeps the first N in (E_B, PV) order; an axis with equal
    bounds collapses to a single level. ``random`` draws uniformly with a
    seeded generator.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    flat_e = bounds.E_B_min == bounds.E_B_max
    flat_p = bounds.PV_min == bounds.PV_max
    if flat_e and flat_p and N > 1:
        raise ValueError("bounds collapse to a single design; cannot draw N > 1 distinct designs")
    if strategy == "grid":
        if flat_e:
            n_e, n_p = 1, N
        elif flat_p:
            n_e, n_p = N, 1
        else:
            n_e = math.ceil(math.sqrt(N))
            n_p = math.ceil(N / n_e)
        e_levels = np.linspace(bounds.E_B_min, bounds.E_B_max, n_e)
        p_levels = np.linspace(bounds.PV_min, bounds.PV_max, n_p)
        pts = [Design(float(e), float(p)) for e in e_levels for p in p_levels]
        return pts[:N]
    if strategy == "random":
        rng = np.random.default_rng(seed)
        out: list[Design] = []
        seen = set()
        while len(out) < N:
            e = float(rng.uniform(bounds.E_B_min, bounds.E_B_max))
            p = float(rng.uniform(bounds.PV_min, bounds.PV_max))
            if (e, p) not in seen:
                seen.add((e, p))
                out.append(Design(e, p))
        return out
    raise ValueError(f"unknown sampling strategy {strategy!r}; choose from {SAMPLING_STRATEGIES}")


@dataclass(frozen=True)
class Sampling:
    bounds: DesignBounds = DesignBounds()
    strategy: str = "grid"
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in SAMPLING_STRATEGIES:
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")


# ------------------------------------------------------------------- ranking
@dataclass
class RankedDesign:
    design: Design
    phase1_cost: float  # $/yr, total under the simple model
    phase1_rank: int
    phase1_breakdown: CostBreakdown
    phase2_cost: float | None = None  # $/yr, total under the accurate model
    phase2_rank: int | None = None
    phase2_breakdown: CostBreakdown | None = None
    order_gain: int | None = None

    @property
    def is_finalist(self) -> bool:
        return self.phase2_rank is not None


@dataclass
class RobustnessReport:
    spearman_rho: float
    kendall_tau: float
    max_abs_gain: int
    frac_within_2: float
    count: int


@dataclass
class BoostResult:
    plan: OOPlan
    ranked: list[RankedDesign]  # every successful design, phase-1 order
    finalists: list[RankedDesign]  # phase-2 order
    excluded: list[tuple[Design, str, str]] = field(default_factory=list)  # (design, phase, reason)
    diagnostics: RobustnessReport | None = None

    @property
    def winner(self) -> RankedDesign:
        if not self.finalists:
            raise ValueError("no design survived phase 2")
        return self.finalists[0]


def _rank_order(items: list[tuple[Design, float]]) -> list[int]:
    """Indices sorted by cost, ties broken by (E_B, PV_size)."""
    return sorted(range(len(items)), key=lambda i: (items[i][1], items[i][0].key()))


def _evaluate(design: Design, trace: HourlyTrace, params: DispatchParams, method: str,
              window_length: int, backend: SolverBackend | None, cm: CostModel):
    try:
        return evaluate_design(trace, design, params, method, window_length, backend).breakdown(cm), None
    except WindowFailure as exc:
        return None, str(exc)


def _evaluate_all(designs, trace, params, method, window_length, backend, cm, jobs):
    work = partial(_evaluate, trace=trace, params=params, method=method,
                   window_length=window_length, backend=backend, cm=cm)
    if jobs > 1 and len(designs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, designs))
    return [work(d) for d in designs]


def run_boost(trace: HourlyTrace, plan: OOPlan, params: DispatchParams = DispatchParams(),
              cm: CostModel = CostModel(), sampling: Sampling = Sampling(),
              backend: SolverBackend | None = None, window_length: int = WEEK,
              jobs: int = 1, designs: list[Design] | None = None) -> BoostResult:
    """Algorithm: rank N designs with the simple model, re-rank the best s with the accurate one.

    ``designs`` overrides sampling (its length must equal ``plan.N``). A
    design whose evaluation fails in any window is dropped with a warning and
    listed in ``excluded``.
    """
    params = params if params.is_resolved else params.resolve(trace.peak_load)
    if designs is None:
        designs = sample_designs(plan.N, sampling.bounds, sampling.strategy, sampling.seed)
    elif len(designs) != plan.N:
        raise ValueError(f"got {len(designs)} designs for a plan with N={plan.N}")
    excluded = []

    phase1 = []
    for d, (bd, err) in zip(designs, _evaluate_all(designs, trace, params, "lp", window_length,
                                                   backend, cm, jobs)):
        if err is not None:
            log.warning("design %s excluded in phase 1: %s", d, err)
            excluded.append((d, "phase1", err))
            continue
        phase1.append((d, bd))
    order = _rank_order([(d, b.total) for d, b in phase1])
    ranked = [RankedDesign(phase1[i][0], phase1[i][1].total, r + 1, phase1[i][1])
              for r, i in enumerate(order)]

    chosen = ranked[: plan.s]
    survivors = []
    for rd, (bd, err) in zip(chosen, _evaluate_all([rd.design for rd in chosen], trace, params,
                                                   "milp", window_length, backend, cm, jobs)):
        if err is not None:
            log.warning("design %s excluded in phase 2: %s", rd.design, err)
            excluded.append((rd.design, "phase2", err))
            continue
        rd.phase2_breakdown = bd
        rd.phase2_cost = rd.phase2_breakdown.total
        survivors.append(rd)
    order = _rank_order([(rd.design, rd.phase2_cost) for rd in survivors])
    finalists = [survivors[i] for i in order]
    # survivors are in phase-1 order, so their position there is the phase-1 rank among finalists
    for pos1, rd in enumerate(survivors, start=1):
        rd.phase2_rank = finalists.index(rd) + 1
        rd.order_gain = pos1 - rd.phase2_rank
    diagnostics = order_robustness_report(finalists) if len(finalists) >= 2 else None
    return BoostResult(plan, ranked, finalists, excluded, diagnostics)


def order_robustness_report(finalists: list[RankedDesign]) -> RobustnessReport:
    """Rank agreement between the two phases over the finalists."""
    if len(finalists) < 2:
        raise ValueError("rank diagnostics need at least two finalists")
    if any(rd.phase2_rank is None or rd.order_gain is None for rd in finalists):
        raise ValueError("every finalist needs a phase-2 rank")
    r2 = np.array([rd.phase2_rank for rd in finalists])
    r1 = r2 + np.array([rd.order_gain for rd in finalists])  # phase-1 rank among finalists
    rho = float(spearmanr(r1, r2).statistic)
    tau = float(kendalltau(r1, r2).statistic)
    gains = np.abs(r1 - r2)
    return RobustnessReport(spearman_rho=rho, kendall_tau=tau, max_abs_gain=int(gains.max()),
                            frac_within_2=float(np.mean(gains <= 2)), count=len(finalists))


def exhaustive_search(trace: HourlyTrace, designs: list[Design],
                      params: DispatchParams = DispatchParams(), cm: CostModel = CostModel(),
                      backend: SolverBackend | None = None, window_length: int = WEEK,
                      method: str = "milp") -> list[tuple[Design, CostBreakdown]]:
    """Every design evaluated with one model, cheapest first (same tie-break as BOOST)."""
    params = params if params.is_resolved else params.resolve(trace.peak_load)
    rows = []
    for d in designs:
        rows.append((d, evaluate_design(trace, d, params, method, window_length, backend).breakdown(cm)))
    return [rows[i] for i in _rank_order([(d, b.total) for d, b in rows])]
