"""Dense two-phase primal simplex for small equality-form LPs.

Solves  min c.x  s.t.  A x = b, x >= 0.  Everything the L1 solvers need
(split variables, residual slacks) is expressed in this form by the caller.

Numerical scheme: rows and columns are equilibrated before solving, basic
columns never re-enter, the ratio test breaks near-ties toward the largest
pivot element, and the tableau is re-canonicalized from the original data
every few dozen pivots so elimination error cannot accumulate.  Artificial
variables that cannot be pivoted out after phase 1 stay in the basis at
level zero (their rows are near-dependent) and are evicted with priority
whenever the entering column crosses them.  Pricing is most-negative
reduced cost; a run of degenerate pivots switches to Bland's rule, which
cannot cycle.  The final vertex is re-solved from the equilibrated data in
one shot for full precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

_PIVOT_TOL = 1e-8
_COST_TOL = 1e-9
_BLAND_AFTER = 200        # consecutive degenerate pivots before Bland's rule
_REFACTOR_EVERY = 60


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class SimplexError(Exception):
    pass


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    status: LpStatus
    iterations: int


class _Tableau:
    """Dense tableau over the columns of ``a`` with costs ``cost``.

    Keeps the data so the canonical form can be rebuilt exactly from the
    current basis at any time.
    """

    def __init__(self, a, b, cost, basis):
        self.a = a
        self.b = b
        self.cost = cost
        self.basis = list(basis)
        self.m, self.n = a.shape
        self.in_basis = np.zeros(self.n, dtype=bool)
        self.in_basis[self.basis] = True
        self.t = np.empty((self.m + 1, self.n + 1))
        self.refactor()

    def refactor(self) -> bool:
        bmat = self.a[:, self.basis]
        try:
            binv_a = np.linalg.solve(bmat, self.a)
            binv_b = np.linalg.solve(bmat, self.b)
        except np.linalg.LinAlgError:
            return False
        if not (np.all(np.isfinite(binv_a)) and np.all(np.isfinite(binv_b))):
            return False
        cb = self.cost[self.basis]
        self.t[: self.m, : self.n] = binv_a
        self.t[: self.m, -1] = binv_b
        self.t[-1, : self.n] = self.cost - cb @ binv_a
        self.t[-1, -1] = -float(cb @ binv_b)
        return True

    def set_costs(self, cost) -> None:
        self.cost = cost
        if not self.refactor():
            raise SimplexError("basis became singular while switching phases")

    def pivot(self, row: int, col: int) -> None:
        t = self.t
        t[row] /= t[row, col]
        factors = t[:, col].copy()
        factors[row] = 0.0
        t -= np.outer(factors, t[row])
        t[:, col] = 0.0
        t[row, col] = 1.0
        self.in_basis[self.basis[row]] = False
        self.in_basis[col] = True
        self.basis[row] = col

    def solution(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.basis] = self.t[: self.m, -1]
        return x


def _iterate(tab: _Tableau, max_iter: int, n_price: int, n_real: int,
             bland: bool = False, refactor_every: int = _REFACTOR_EVERY):
    """Pivot to optimality.

    Only columns < n_price may enter.  Rows whose basic variable is an
    artificial (index >= n_real) are evicted with priority when the
    entering column has support there.
    """
    degenerate_run = 0
    since_refactor = 0
    stall = 0
    best_obj = np.inf
    it = 0
    while it < max_iter:
        obj = -tab.t[-1, -1]
        if obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
            best_obj = obj
            stall = 0
        else:
            stall += 1
            if stall > max(5000, 3 * tab.m):
                return it, LpStatus.ITERATION_LIMIT
        costs = np.where(tab.in_basis[:n_price], np.inf, tab.t[-1, :n_price])
        if bland:
            negs = np.nonzero(costs < -_COST_TOL)[0]
            if negs.size == 0:
                return it, LpStatus.OPTIMAL
            col = int(negs[0])
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -_COST_TOL:
                return it, LpStatus.OPTIMAL
        colvals = tab.t[: tab.m, col]
        rhs = tab.t[: tab.m, -1]

        art_rows = [
            i for i in range(tab.m)
            if tab.basis[i] >= n_real and abs(colvals[i]) > _PIVOT_TOL
        ]
        if art_rows:
            # artificial sits at level ~0: pivoting it out keeps feasibility
            row = max(art_rows, key=lambda i: abs(colvals[i]))
            tab.pivot(row, col)
            it += 1
            continue

        pos = colvals > _PIVOT_TOL
        if not np.any(pos):
            if since_refactor > 0 and tab.refactor():
                since_refactor = 0
                continue
            return it, LpStatus.UNBOUNDED
        ratios = np.full(tab.m, np.inf)
        ratios[pos] = np.maximum(rhs[pos], 0.0) / colvals[pos]
        best = float(ratios.min())
        ties = np.nonzero(ratios <= best + 1e-10 * (1.0 + best))[0]
        if bland:
            row = int(min(ties, key=lambda i: tab.basis[i]))
        else:
            row = int(max(ties, key=lambda i: (colvals[i], -tab.basis[i])))
        if best <= 1e-10:
            degenerate_run += 1
            if degenerate_run >= _BLAND_AFTER:
                bland = True
        else:
            degenerate_run = 0
        tab.pivot(row, col)
        it += 1
        since_refactor += 1
        if since_refactor >= refactor_every:
            if tab.refactor():
                since_refactor = 0
    return it, LpStatus.ITERATION_LIMIT


def solve_lp(c, a_eq, b_eq, max_iter: int = 100_000) -> LpSolution:
    """Solve min c.x s.t. A x = b, x >= 0.

    Runs the fast pricing first and verifies the vertex against the original
    data; a failed verification falls back to a Bland's-rule run with a tight
    refactor cadence (slow but very hard to break).
    """
    c = np.asarray(c, dtype=float)
    a = np.array(a_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    if a.ndim != 2 or a.shape != (b.size, c.size):
        raise ValueError(f"shape mismatch: A {a.shape}, b {b.shape}, c {c.shape}")
    m, n = a.shape
    if m == 0:
        if np.all(c >= -_COST_TOL):
            return LpSolution(np.zeros(n), 0.0, LpStatus.OPTIMAL, 0)
        return LpSolution(np.zeros(n), -np.inf, LpStatus.UNBOUNDED, 0)

    try:
        sol = _solve_scaled(c, a, b, max_iter, bland=False,
                            refactor_every=_REFACTOR_EVERY)
    except SimplexError:
        sol = None
    if sol is not None:
        if sol.status is LpStatus.OPTIMAL and _verify(sol.x, a, b):
            return sol
        if sol.status is LpStatus.INFEASIBLE:
            return sol
    fallback = _solve_scaled(c, a, b, max_iter, bland=True, refactor_every=20)
    if sol is None:
        return fallback
    if fallback.status is LpStatus.OPTIMAL and _verify(fallback.x, a, b):
        if sol.status is LpStatus.OPTIMAL and sol.objective < fallback.objective:
            # both vertices verified; keep the better one
            if _verify(sol.x, a, b):
                return sol
        return fallback
    return fallback if fallback.status is LpStatus.OPTIMAL else sol


def _verify(x, a, b) -> bool:
    resid = np.linalg.norm(a @ x - b)
    return bool(resid <= 1e-7 * (1.0 + np.linalg.norm(b)))


def _solve_scaled(c, a, b, max_iter, bland, refactor_every) -> LpSolution:
    m, n = a.shape
    a0, b0 = a, b

    # equilibration: scale rows (solution-invariant), then columns
    # (variable substitution z_j = s_j x_j, costs c_j / s_j)
    row_scale = np.maximum(np.abs(a).max(axis=1), np.abs(b))
    row_scale[row_scale == 0] = 1.0
    a = a / row_scale[:, None]
    b = b / row_scale
    col_scale = np.abs(a).max(axis=0)
    col_scale[col_scale == 0] = 1.0
    a = a / col_scale
    c_scaled = c / col_scale
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    a_ext = np.hstack([a, np.eye(m)])

    # deterministic rhs perturbation kills ratio-test ties (degeneracy);
    # the final vertex is re-solved against the unperturbed rhs below
    b_tab = b + 1e-9 * (1.0 + b) * np.linspace(1.0 / m, 1.0, m)

    # ---- phase 1: minimize the artificial levels ----
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab = _Tableau(a_ext, b_tab, cost1, range(n, n + m))
    it1, status = _iterate(tab, max_iter, n + m, n + m, bland, refactor_every)
    if status is LpStatus.UNBOUNDED:
        raise SimplexError("phase-1 reported unbounded")
    if status is LpStatus.ITERATION_LIMIT:
        return LpSolution(np.zeros(n), np.nan, status, it1)
    if -tab.t[-1, -1] > 1e-7 * (1.0 + float(np.abs(b).sum())):
        return LpSolution(np.zeros(n), np.nan, LpStatus.INFEASIBLE, it1)

    # pivot artificials out where a usable entry exists; the rest stay
    # basic at level zero (their rows are dependent to working precision)
    for i in range(m):
        if tab.basis[i] < n:
            continue
        row = np.where(tab.in_basis[:n], 0.0, tab.t[i, :n])
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > _PIVOT_TOL:
            tab.pivot(i, j)

    # ---- phase 2: original costs; artificials pinned at zero ----
    tab.set_costs(np.concatenate([c_scaled, np.zeros(m)]))
    it2, status = _iterate(tab, max_iter - it1, n, n, bland, refactor_every)
    iters = it1 + it2
    if status is not LpStatus.OPTIMAL:
        return LpSolution(np.zeros(n), np.nan, status, iters)

    # one-shot re-solve of the final basis for full precision; keep the
    # tableau values when the basis system is too ill-conditioned to help
    z = np.zeros(n + m)
    xb = None
    try:
        xb = np.linalg.solve(a_ext[:, tab.basis], b)
    except np.linalg.LinAlgError:
        xb = None
    if xb is not None and np.all(np.isfinite(xb)):
        z[tab.basis] = xb
        if not _verify(z[:n] / col_scale, a0, b0):
            xb = None
    if xb is None:
        z[:] = 0.0
        z[tab.basis] = tab.t[: tab.m, -1]
    x = z[:n] / col_scale
    np.clip(x, 0.0, None, out=x)
    return LpSolution(x, float(c @ x), LpStatus.OPTIMAL, iters)
