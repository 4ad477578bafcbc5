"""Compiled inner loops of the bounded simplex.

Both kernels mutate the engine's arrays in place and return a status code
plus the number of iterations and basis changes performed. They stop early
when ``max_pivots`` basis changes have been made so the caller can
refactorize.
"""

import numpy as np
from numba import njit

DONE = 0
UNBOUNDED = 1
REFACTOR = 2
ITER_LIMIT = 3
INFEASIBLE = 4

INF = np.inf


@njit(cache=True)
def _column(Ap, Ai, Ax, Binv, j, out):
    m = out.shape[0]
    for i in range(m):
        out[i] = 0.0
    for p in range(Ap[j], Ap[j + 1]):
        row = Ai[p]
        v = Ax[p]
        for i in range(m):
            out[i] += Binv[i, row] * v


@njit(cache=True)
def shift_basics(Ap, Ai, Ax, Binv, head, x, cols, step):
    """Update basic values after nonbasic columns ``cols`` move by ``step``."""
    m = head.shape[0]
    for q in range(cols.shape[0]):
        j = cols[q]
        for p in range(Ap[j], Ap[j + 1]):
            row = Ai[p]
            v = Ax[p] * step[q]
            for i in range(m):
                x[head[i]] -= Binv[i, row] * v


@njit(cache=True)
def dual_infeasible(lb, ub, is_basic, at_upper, d, dtol):
    """Whether some nonbasic column has a reduced cost of the wrong sign."""
    for j in range(d.shape[0]):
        if is_basic[j] or not ub[j] > lb[j]:
            continue
        if lb[j] == -INF and ub[j] == INF:
            if abs(d[j]) > dtol:
                return True
        elif at_upper[j]:
            if d[j] > dtol:
                return True
        elif d[j] < -dtol:
            return True
    return False


@njit(cache=True)
def slack_round(x, cols, k, slack, ratio, lb, ub, node_lb, node_ub, tol):
    """Round binaries ``cols`` where their private slacks can absorb the change."""
    width = slack.shape[1]
    for r in range(cols.shape[0]):
        v = x[cols[r]]
        nearest = np.round(v)
        if abs(v - nearest) <= tol:
            continue
        for attempt in range(2):
            target = nearest if attempt == 0 else 1.0 - nearest
            if not (node_lb[k[r]] <= target <= node_ub[k[r]]):
                continue
            ok = True
            for c in range(width):
                if ratio[r, c] == 0.0:
                    continue
                sl = slack[r, c]
                cur = x[sl]
                new = cur - ratio[r, c] * (target - v)
                scale = 1e-9 * max(1.0, abs(cur))
                if new < lb[sl] - scale or new > ub[sl] + scale:
                    ok = False
                    break
            if ok:
                for c in range(width):
                    if ratio[r, c] == 0.0:
                        continue
                    sl = slack[r, c]
                    new = x[sl] - ratio[r, c] * (target - v)
                    x[sl] = min(max(new, lb[sl]), ub[sl])
                x[cols[r]] = target
                break


@njit(cache=True)
def _row_times_A(Ap, Ai, Ax, rho, out):
    n = out.shape[0]
    for k in range(n):
        s = 0.0
        for p in range(Ap[k], Ap[k + 1]):
            s += rho[Ai[p]] * Ax[p]
        out[k] = s


@njit(cache=True)
def _pivot(Binv, head, is_basic, at_upper, d, alpha, rho_A, r, j):
    """Eta update of the basis inverse and reduced costs for entering j at row r."""
    m = alpha.shape[0]
    piv = alpha[r]
    ratio = d[j] / piv
    n = d.shape[0]
    for k in range(n):
        d[k] -= ratio * rho_A[k]
    row_r = np.empty(m)
    for k in range(m):
        row_r[k] = Binv[r, k] / piv
    for k in range(m):
        rk = row_r[k]
        if rk != 0.0:
            for i in range(m):
                Binv[i, k] -= alpha[i] * rk
        Binv[r, k] = rk
    leaving = head[r]
    head[r] = j
    is_basic[leaving] = False
    is_basic[j] = True
    at_upper[j] = False
    for i in range(m):
        d[head[i]] = 0.0
    d[leaving] = -ratio
    return leaving


@njit(cache=True)
def primal_kernel(Ap, Ai, Ax, lb, ub, head, is_basic, at_upper, x, Binv, d,
                  dtol, ptol, max_pivots, iter_left, stall_limit, state):
    """Bounded primal simplex iterations.

    ``state`` holds [bland flag, consecutive degenerate steps] across calls.
    """
    m = head.shape[0]
    n = d.shape[0]
    alpha = np.empty(m)
    rho_A = np.empty(n)
    rho = np.empty(m)
    limits = np.empty(m)
    it = 0
    piv = 0
    while True:
        if it >= iter_left:
            return ITER_LIMIT, it, piv
        if piv >= max_pivots:
            return REFACTOR, it, piv
        bland = state[0] == 1
        # pricing: Dantzig, or lowest eligible index under Bland
        j = -1
        best = 0.0
        for k in range(n):
            if is_basic[k] or not (ub[k] > lb[k]):
                continue
            dk = d[k]
            if at_upper[k]:
                ok = dk > dtol
            elif lb[k] == -INF and ub[k] == INF:
                ok = abs(dk) > dtol
            else:
                ok = dk < -dtol
            if ok:
                if bland:
                    j = k
                    break
                if abs(dk) > best:
                    best = abs(dk)
                    j = k
        if j < 0:
            return DONE, it, piv
        direction = 1.0 if d[j] < 0 else -1.0
        _column(Ap, Ai, Ax, Binv, j, alpha)

        # ratio test
        best_t = INF
        for i in range(m):
            bi = head[i]
            delta = direction * alpha[i]
            lim = INF
            if delta > ptol:
                if lb[bi] > -INF:
                    lim = (x[bi] - lb[bi]) / delta
            elif delta < -ptol:
                if ub[bi] < INF:
                    lim = (ub[bi] - x[bi]) / (-delta)
            if lim < 0.0:
                lim = 0.0
            limits[i] = lim
            if lim < best_t:
                best_t = lim
        own = ub[j] - lb[j]
        r = -1
        if best_t == INF and own == INF:
            return UNBOUNDED, it, piv
        if own <= best_t:
            theta = own
        else:
            theta = best_t
            cut = best_t + 1e-12 * max(1.0, abs(best_t))
            big = -1.0
            for i in range(m):
                if limits[i] <= cut:
                    if bland:
                        if r < 0 or head[i] < head[r]:
                            r = i
                    elif abs(alpha[i]) > big:
                        big = abs(alpha[i])
                        r = i
        it += 1
        step = direction * theta
        for i in range(m):
            x[head[i]] -= step * alpha[i]
        x[j] += step
        if r < 0:
            at_upper[j] = not at_upper[j]
            x[j] = ub[j] if at_upper[j] else lb[j]
        else:
            to_upper = direction * alpha[r] < 0
            for k in range(m):
                rho[k] = Binv[r, k]
            _row_times_A(Ap, Ai, Ax, rho, rho_A)
            leaving = _pivot(Binv, head, is_basic, at_upper, d, alpha, rho_A, r, j)
            at_upper[leaving] = to_upper
            x[leaving] = ub[leaving] if to_upper else lb[leaving]
            piv += 1
        if theta <= ptol:
            state[1] += 1
            if state[1] >= stall_limit:
                state[0] = 1
        else:
            state[1] = 0
            state[0] = 0


@njit(cache=True)
def dual_kernel(Ap, Ai, Ax, lb, ub, head, is_basic, at_upper, x, Binv, d,
                ftol, ptol, max_pivots, iter_left):
    """Bounded dual simplex iterations (largest infeasibility leaves)."""
    m = head.shape[0]
    n = d.shape[0]
    alpha = np.empty(m)
    rho = np.empty(m)
    row = np.empty(n)
    ratios = np.empty(n)
    it = 0
    piv = 0
    while True:
        if it >= iter_left:
            return ITER_LIMIT, it, piv
        if piv >= max_pivots:
            return REFACTOR, it, piv
        r = -1
        worst = 0.0
        for i in range(m):
            bi = head[i]
            xb = x[bi]
            tol = ftol * max(1.0, abs(xb))
            v = 0.0
            if xb < lb[bi] - tol:
                v = lb[bi] - xb
            elif xb > ub[bi] + tol:
                v = xb - ub[bi]
            if v > worst:
                worst = v
                r = i
        if r < 0:
            return DONE, it, piv
        p = head[r]
        below = x[p] < lb[p]
        target = lb[p] if below else ub[p]
        delta = x[p] - target
        for k in range(m):
            rho[k] = Binv[r, k]
        _row_times_A(Ap, Ai, Ax, rho, row)
        best = INF
        for k in range(n):
            ratios[k] = INF
            if is_basic[k] or not (ub[k] > lb[k]):
                continue
            a = row[k]
            if lb[k] == -INF and ub[k] == INF:
                ok = abs(a) > ptol
            elif below:
                ok = (a < -ptol) if not at_upper[k] else (a > ptol)
            else:
                ok = (a > ptol) if not at_upper[k] else (a < -ptol)
            if ok:
                ratios[k] = abs(d[k]) / abs(a)
                if ratios[k] < best:
                    best = ratios[k]
        # among near-ties take the largest pivot magnitude
        j = -1
        if best < INF:
            cut = best + 1e-12 * max(1.0, best)
            big = -1.0
            for k in range(n):
                if ratios[k] <= cut and abs(row[k]) > big:
                    big = abs(row[k])
                    j = k
        if j < 0:
            return INFEASIBLE, it, piv
        _column(Ap, Ai, Ax, Binv, j, alpha)
        if abs(alpha[r]) < ptol:
            return REFACTOR, it, piv
        it += 1
        theta = delta / alpha[r]
        for i in range(m):
            x[head[i]] -= theta * alpha[i]
        x[j] += theta
        _pivot(Binv, head, is_basic, at_upper, d, alpha, row, r, j)
        at_upper[p] = not below
        x[p] = target
        piv += 1

