"""Sparse recovery solvers.

Convex route: basis pursuit and its noisy variants as linear programs on the
split-variable form (x = x+ - x-), LASSO by monotone accelerated proximal
gradient, BPDN by bisection on the LASSO weight.  Greedy route: OMP, CoSaMP
and IHT.  All solvers are deterministic given their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .analysis import SubsetBudgetError
from .simplex import LpStatus, SimplexError, solve_lp

_SUBSET_GUARD = 10_000_000


class InfeasibleProblemError(Exception):
    """The constraint set is empty (epsilon too small / y not in range)."""


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.01
    lam: float = 1.0                      # LASSO L1 weight
    max_iterations: int = 10_000
    convergence_tol: float = 1e-8
    sparsity_k: int = 0

    def __post_init__(self):
        if self.epsilon < 0 or self.lam < 0:
            raise ValueError("epsilon and lam must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class RecoveryResult:
    x_hat: np.ndarray
    residual_l2: float
    solver: str
    iterations: int
    converged: bool
    objective_value: float
    notes: tuple[str, ...] = ()
    objective_history: tuple[float, ...] = ()

    def support(self, threshold: float = 0.0) -> np.ndarray:
        return np.nonzero(np.abs(self.x_hat) > threshold)[0]


def _result(solver, h, y, x, iterations, converged, objective=None, notes=(),
            history=()):
    x = np.asarray(x, dtype=float)
    residual = float(np.linalg.norm(y - h @ x))
    if objective is None:
        objective = float(np.abs(x).sum())
    return RecoveryResult(x, residual, solver, int(iterations), bool(converged),
                          float(objective), tuple(notes), tuple(history))


# ---------------------------------------------------------------- L0 oracle

def l0_oracle(h, y, k_max: int, residual_tol: float = 1e-8) -> RecoveryResult:
    """Exhaustive minimum-support solve of H x = y.

    Enumerates supports of increasing size, least-squares solving each, and
    returns the first support whose residual is <= residual_tol * ||y||.
    Only for small instances; refuses when the enumeration exceeds 10^7
    subsets.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = h.shape
    k_max = min(k_max, n)
    if sum(math.comb(n, s) for s in range(k_max + 1)) > _SUBSET_GUARD:
        raise SubsetBudgetError(
            f"l0 enumeration over {n} columns up to size {k_max} exceeds budget"
        )
    ynorm = np.linalg.norm(y)
    tol = residual_tol * ynorm
    if ynorm <= 0:
        return _result("l0_oracle", h, y, np.zeros(n), 0, True)
    for s in range(1, k_max + 1):
        for cols in combinations(range(n), s):
            sub = h[:, cols]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(y - sub @ coef) <= tol:
                x = np.zeros(n)
                x[list(cols)] = coef
                return _result("l0_oracle", h, y, x, s, True)
    return _result("l0_oracle", h, y, np.zeros(n), k_max, False,
                   notes=(f"no support of size <= {k_max} fits y",))


# ------------------------------------------------------------ LP-based L1

def _lp_l1(solver_name, c, a, b, n, h, y):
    """Solve the split-variable LP and return the recovered x.

    The self-contained simplex is the primary engine; a result that is not
    verifiably optimal-and-feasible falls back to scipy's LP solver when
    available (noted on the result).
    """
    notes = []
    try:
        sol = solve_lp(c, a, b)
    except SimplexError:
        sol = None
    if sol is not None and sol.status is LpStatus.INFEASIBLE:
        raise InfeasibleProblemError(f"{solver_name}: constraints infeasible")
    ok = (
        sol is not None
        and sol.status is LpStatus.OPTIMAL
        and np.linalg.norm(a @ sol.x - b) <= 1e-7 * (1.0 + np.linalg.norm(b))
    )
    if ok:
        x = sol.x[:n] - sol.x[n:2 * n]
        return _result(solver_name, h, y, x, sol.iterations, True)
    z, iters = _scipy_lp(c, a, b, solver_name)
    notes.append("simplex result unverified; solved with scipy linprog")
    x = z[:n] - z[n:2 * n]
    return _result(solver_name, h, y, x, iters, True, notes=notes)


def _scipy_lp(c, a, b, solver_name):
    try:
        from scipy.optimize import linprog
    except ImportError as exc:
        raise SimplexError(
            f"{solver_name}: simplex failed and scipy is not installed"
        ) from exc
    res = linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method="highs")
    if res.status == 2:
        raise InfeasibleProblemError(f"{solver_name}: constraints infeasible")
    if res.status != 0:
        raise SimplexError(f"{solver_name}: scipy linprog status {res.status}")
    return res.x, int(res.nit)


def bp_lp(h, y) -> RecoveryResult:
    """Basis pursuit: min ||x||_1 s.t. H x = y, as a split-variable LP."""
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = h.shape
    c = np.ones(2 * n)
    a = np.hstack([h, -h])
    res = _lp_l1("bp_lp", c, a, y, n, h, y)
    feas = res.residual_l2 <= 1e-7 * (1.0 + np.linalg.norm(y))
    if not feas:
        res = replace(res, converged=False,
                      notes=res.notes + ("equality residual above tolerance",))
    return res


def bp_noisy(h, y, epsilon: float, bound_norm: str = "linf") -> RecoveryResult:
    """min ||x||_1 s.t. ||y - H x||_p <= epsilon for p in {1, inf}."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = h.shape
    if bound_norm == "l1":
        # H(x+ - x-) + r+ - r- = y ;  1.(r+ + r-) + s = eps
        c = np.concatenate([np.ones(2 * n), np.zeros(2 * m + 1)])
        top = np.hstack([h, -h, np.eye(m), -np.eye(m), np.zeros((m, 1))])
        bot = np.concatenate(
            [np.zeros(2 * n), np.ones(2 * m), [1.0]]
        )[None, :]
        a = np.vstack([top, bot])
        b = np.concatenate([y, [epsilon]])
        return _lp_l1("bp_noisy_l1", c, a, b, n, h, y)
    if bound_norm == "linf":
        # H(x+ - x-) + u = y + eps ;  H(x+ - x-) - v = y - eps
        c = np.concatenate([np.ones(2 * n), np.zeros(2 * m)])
        a = np.vstack([
            np.hstack([h, -h, np.eye(m), np.zeros((m, m))]),
            np.hstack([h, -h, np.zeros((m, m)), -np.eye(m)]),
        ])
        b = np.concatenate([y + epsilon, y - epsilon])
        return _lp_l1("bp_noisy_linf", c, a, b, n, h, y)
    raise ValueError(f"bound_norm must be 'l1' or 'linf', got {bound_norm!r}")


def dantzig(h, y, epsilon: float) -> RecoveryResult:
    """Dantzig selector: min ||x||_1 s.t. ||H^T (y - H x)||_inf <= epsilon."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    n = h.shape[1]
    g = h.T @ h
    hty = h.T @ y
    c = np.concatenate([np.ones(2 * n), np.zeros(2 * n)])
    a = np.vstack([
        np.hstack([g, -g, np.eye(n), np.zeros((n, n))]),
        np.hstack([g, -g, np.zeros((n, n)), -np.eye(n)]),
    ])
    b = np.concatenate([hty + epsilon, hty - epsilon])
    res = _lp_l1("dantzig", c, a, b, n, h, y)
    corr = float(np.max(np.abs(hty - g @ res.x_hat)))
    if corr > epsilon + 1e-6:
        res = replace(res, converged=False,
                      notes=res.notes + (f"correlation bound violated: {corr:.3e}",))
    return res


# ------------------------------------------------------- proximal solvers

def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso(h, y, lam: float, config: SolverConfig = DEFAULT_CONFIG) -> RecoveryResult:
    """min ||y - H x||_2^2 + lam ||x||_1 by monotone FISTA.

    The objective is nonincreasing across iterations (non-improving
    accelerated steps fall back to the previous iterate).
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    return _lasso_engine(h, y, lam, config, keep_history=True)[0]


def _lasso_engine(h, y, lam, config, x0=None, keep_history=False):
    """Monotone FISTA followed by cyclic coordinate-descent polish.

    The accelerated phase makes fast global progress; the exact coordinate
    minimizations then drive the iterate to coordinatewise optimality, which
    plain proximal steps cannot reach on badly scaled columns.  Both phases
    are objective-nonincreasing.
    """
    n = h.shape[1]
    g = h.T @ h
    hty = h.T @ y
    yty = float(y @ y)
    signorm = np.linalg.norm(h, 2)
    if signorm == 0:
        return _result("lasso", h, y, np.zeros(n), 0, True,
                       objective=yty), np.zeros(n)
    step = 1.0 / (2.0 * signorm**2)
    thresh = step * lam

    def objective(x):
        return float(x @ (g @ x) - 2.0 * (hty @ x) + yty + lam * np.abs(x).sum())

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    z = x.copy()
    fx = objective(x)
    t = 1.0
    history = [fx]
    it = 0
    fista_cap = max(2, config.max_iterations // 4)
    for it in range(1, fista_cap + 1):
        u = _soft(z - step * 2.0 * (g @ z - hty), thresh)
        fu = objective(u)
        if fu <= fx:
            x_new, f_new = u, fu
        else:
            x_new, f_new = x, fx          # monotone safeguard
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + (t / t_new) * (u - x_new) + ((t - 1.0) / t_new) * (x_new - x)
        delta = fx - f_new
        x, fx, t = x_new, f_new, t_new
        if keep_history:
            history.append(fx)
        if delta <= config.convergence_tol * max(1.0, abs(fx)) and it > 2:
            break

    # coordinate-descent polish: exact per-coordinate minimization
    diag = np.diag(g).copy()
    active = diag > 0
    grad = g @ x - hty
    converged = False
    half_lam = 0.5 * lam
    for sweep in range(1, 3 * config.max_iterations // 4 + 1):
        max_move = 0.0
        for j in range(n):
            if not active[j]:
                if x[j] != 0.0:
                    grad -= g[:, j] * x[j]
                    x[j] = 0.0
                continue
            old = x[j]
            target = old - grad[j] / diag[j]
            new = math.copysign(
                max(abs(target) - half_lam / diag[j], 0.0), target
            )
            if new != old:
                grad += g[:, j] * (new - old)
                x[j] = new
                max_move = max(max_move, abs(new - old))
        it += 1
        if keep_history:
            history.append(objective(x))
        if max_move <= config.convergence_tol * max(1.0, np.abs(x).max()):
            converged = True
            break
    fx = objective(x)
    res = _result("lasso", h, y, x, it, converged, objective=fx,
                  history=tuple(history) if keep_history else ())
    return res, x


def bpdn(h, y, epsilon: float, config: SolverConfig = DEFAULT_CONFIG) -> RecoveryResult:
    """min ||x||_1 s.t. ||y - H x||_2 <= epsilon.

    Solved on the LASSO path: the residual is increasing in the weight, so a
    geometric search plus bisection finds the weight whose residual meets the
    ball radius to 1e-6.  epsilon = 0 collapses to basis pursuit.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    n = h.shape[1]
    ynorm = float(np.linalg.norm(y))
    if epsilon >= ynorm:
        return _result("bpdn", h, y, np.zeros(n), 0, True)
    if epsilon <= 1e-12 * max(1.0, ynorm):
        res = bp_lp(h, y)
        return replace(res, solver="bpdn",
                       notes=res.notes + ("epsilon ~ 0: solved as basis pursuit",))
    xls, *_ = np.linalg.lstsq(h, y, rcond=None)
    rmin = float(np.linalg.norm(y - h @ xls))
    tol = 1e-6
    if epsilon < rmin - tol:
        raise InfeasibleProblemError(
            f"bpdn: epsilon={epsilon:.3e} below least-squares residual {rmin:.3e}"
        )
    lam_top = 2.0 * float(np.max(np.abs(h.T @ y)))
    total_it = 0
    # geometric descent until the ball is reached
    lam_lo = lam_top
    lam_hi = lam_top
    x_lo = np.zeros(n)
    r_lo = ynorm
    for _ in range(200):
        lam_hi = lam_lo
        lam_lo /= 4.0
        res, x_lo = _lasso_engine(h, y, lam_lo, config, x0=x_lo)
        total_it += res.iterations
        r_lo = res.residual_l2
        if r_lo <= epsilon:
            break
    if r_lo > epsilon:
        raise InfeasibleProblemError(
            f"bpdn: could not reach residual {epsilon:.3e} on the lasso path"
        )
    # coarse bisection on the weight locates the active face
    for _ in range(40):
        if abs(r_lo - epsilon) <= tol or lam_hi - lam_lo <= 1e-12 * lam_hi:
            break
        lam_mid = 0.5 * (lam_lo + lam_hi)
        res, x_mid = _lasso_engine(h, y, lam_mid, config, x0=x_lo)
        total_it += res.iterations
        if res.residual_l2 <= epsilon:
            lam_lo, x_lo, r_lo = lam_mid, x_mid, res.residual_l2
        else:
            lam_hi = lam_mid
    # exact polish on the face: fixed support and signs, scalar root-find on
    # the multiplier places the residual exactly on the ball
    best_x, best_r = x_lo, r_lo
    best_l1 = np.abs(x_lo).sum()
    xmax = np.abs(x_lo).max() if x_lo.size else 0.0
    for frac in (1e-2, 1e-3, 1e-4, 1e-6):
        polished = _ball_polish(h, y, x_lo, epsilon, supp_tol=frac * max(xmax, 1e-300))
        if polished is None:
            continue
        l1 = np.abs(polished).sum()
        if l1 <= best_l1 + tol:
            r_p = float(np.linalg.norm(y - h @ polished))
            if r_p <= epsilon + tol and (l1 < best_l1 or abs(r_p - epsilon) < abs(best_r - epsilon)):
                best_x, best_r, best_l1 = polished, r_p, l1
    converged = abs(best_r - epsilon) <= tol
    return _result("bpdn", h, y, best_x, total_it, converged)


def _ball_polish(h, y, x, epsilon, supp_tol):
    """Exact minimizer of sum(s*x_S) on the ball boundary for the support and
    sign pattern of ``x``; None when the pattern is not usable."""
    supp = np.nonzero(np.abs(x) > supp_tol)[0]
    if supp.size == 0 or supp.size > h.shape[0]:
        return None
    hs = h[:, supp]
    s = np.sign(x[supp])
    g = hs.T @ hs
    hty = hs.T @ y
    try:
        xls = np.linalg.solve(g, hty)
    except np.linalg.LinAlgError:
        return None
    rmin = float(np.linalg.norm(y - hs @ xls))
    if rmin > epsilon:
        return None

    def x_of(mu):
        return np.linalg.solve(g, hty - s / (2.0 * mu))

    def r_of(mu):
        return float(np.linalg.norm(y - hs @ x_of(mu)))

    # r(mu) decreases to rmin as mu -> inf; bracket the crossing r = epsilon
    mu_hi = 1.0
    for _ in range(200):
        if r_of(mu_hi) <= epsilon:
            break
        mu_hi *= 4.0
    else:
        return None
    mu_lo = mu_hi
    for _ in range(200):
        mu_lo /= 4.0
        if r_of(mu_lo) > epsilon:
            break
    else:
        return None
    for _ in range(200):
        mu_mid = 0.5 * (mu_lo + mu_hi)
        if r_of(mu_mid) > epsilon:
            mu_lo = mu_mid
        else:
            mu_hi = mu_mid
        if mu_hi - mu_lo <= 1e-15 * mu_hi:
            break
    xs = x_of(mu_hi)
    if np.any(xs * s < -1e-9 * max(1.0, np.abs(xs).max())):
        return None                        # sign pattern changed: not this face
    out = np.zeros(h.shape[1])
    out[supp] = xs
    return out


# ------------------------------------------------------------------ greedy

def omp(h, y, k: int, config: SolverConfig = DEFAULT_CONFIG) -> RecoveryResult:
    """Orthogonal matching pursuit with per-step least squares on the support."""
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = h.shape
    if not 0 <= k <= min(m, n):
        raise ValueError(f"k must be in 0..min(m,n)={min(m, n)}")
    norms = np.linalg.norm(h, axis=0)
    if np.any(norms == 0):
        raise ValueError("H has a zero column")
    hn = h / norms
    ynorm = np.linalg.norm(y)
    rtol = config.convergence_tol * max(ynorm, 1.0)
    support: list[int] = []
    notes: list[str] = []
    x = np.zeros(n)
    r = y.copy()
    it = 0
    while it < k and np.linalg.norm(r) > rtol:
        corr = np.abs(hn.T @ r)
        corr[support] = -1.0
        j = int(np.argmax(corr))
        support.append(j)
        coef, _, rank, _ = np.linalg.lstsq(h[:, support], y, rcond=None)
        if rank < len(support) and "ill-conditioned support" not in notes:
            notes.append("ill-conditioned support")
        x = np.zeros(n)
        x[support] = coef
        r = y - h @ x
        it += 1
    return _result("omp", h, y, x, it, True, notes=notes)


def cosamp(h, y, k: int, config: SolverConfig = DEFAULT_CONFIG) -> RecoveryResult:
    """Compressive sampling matching pursuit (merge 2k proxy, prune to k)."""
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = h.shape
    if k < 1 or 3 * k > m:
        raise ValueError(f"cosamp requires 1 <= k <= m/3 (k={k}, m={m})")
    norms = np.linalg.norm(h, axis=0)
    if np.any(norms == 0):
        raise ValueError("H has a zero column")
    hn = h / norms
    ynorm = np.linalg.norm(y)
    rtol = config.convergence_tol * max(ynorm, 1.0)
    x = np.zeros(n)
    r = y.copy()
    best_x, best_r = x.copy(), np.linalg.norm(r)
    prev_rnorm = best_r
    converged = best_r <= rtol
    it = 0
    while not converged and it < config.max_iterations:
        it += 1
        proxy = np.abs(hn.T @ r)
        omega = np.argsort(-proxy, kind="stable")[:2 * k]
        t_set = np.union1d(omega, np.nonzero(x)[0]).astype(int)
        coef, *_ = np.linalg.lstsq(h[:, t_set], y, rcond=None)
        keep = np.argsort(-np.abs(coef), kind="stable")[:k]
        x = np.zeros(n)
        x[t_set[keep]] = coef[keep]
        r = y - h @ x
        rnorm = np.linalg.norm(r)
        if rnorm < best_r:
            best_x, best_r = x.copy(), rnorm
        if rnorm <= rtol:
            converged = True
        elif abs(prev_rnorm - rnorm) <= config.convergence_tol * max(ynorm, 1.0):
            break                          # stagnation
        prev_rnorm = rnorm
    return _result("cosamp", h, y, best_x, it, converged or best_r <= rtol)


def iht(h, y, k: int, config: SolverConfig = DEFAULT_CONFIG) -> RecoveryResult:
    """Iterative hard thresholding; best iterate by residual is returned.

    The matrix is rescaled internally to unit spectral norm and the solution
    scaled back.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = h.shape
    if k < 1 or k > n:
        raise ValueError(f"k must be in 1..{n}")
    signorm = np.linalg.norm(h, 2)
    if signorm == 0:
        return _result("iht", h, y, np.zeros(n), 0, True)
    hs = h / signorm
    ynorm = np.linalg.norm(y)
    rtol = config.convergence_tol * max(ynorm, 1.0)
    xs = np.zeros(n)
    best_xs, best_r = xs.copy(), ynorm
    converged = best_r <= rtol
    it = 0
    while not converged and it < config.max_iterations:
        it += 1
        xs_new = xs + hs.T @ (y - hs @ xs)
        if k < n:
            drop = np.argsort(-np.abs(xs_new), kind="stable")[k:]
            xs_new[drop] = 0.0
        rnorm = np.linalg.norm(y - hs @ xs_new)
        if rnorm < best_r:
            best_xs, best_r = xs_new.copy(), rnorm
        if rnorm <= rtol:
            xs = xs_new
            converged = True
        elif np.linalg.norm(xs_new - xs) <= config.convergence_tol * max(
            1.0, np.linalg.norm(xs)
        ):
            xs = xs_new
            break                          # fixed point
        else:
            xs = xs_new
    x = best_xs / signorm
    return _result("iht", h, y, x, it, converged or best_r <= rtol)


SOLVERS = {
    "bp": lambda h, y, cfg: bp_lp(h, y),
    "bp_noisy_l1": lambda h, y, cfg: bp_noisy(h, y, cfg.epsilon, "l1"),
    "bp_noisy_linf": lambda h, y, cfg: bp_noisy(h, y, cfg.epsilon, "linf"),
    "bpdn": lambda h, y, cfg: bpdn(h, y, cfg.epsilon, cfg),
    "lasso": lambda h, y, cfg: lasso(h, y, cfg.lam, cfg),
    "dantzig": lambda h, y, cfg: dantzig(h, y, cfg.epsilon),
    "omp": lambda h, y, cfg: omp(h, y, cfg.sparsity_k, cfg),
    "cosamp": lambda h, y, cfg: cosamp(h, y, cfg.sparsity_k, cfg),
    "iht": lambda h, y, cfg: iht(h, y, cfg.sparsity_k, cfg),
}


def solve(name: str, h, y, config: SolverConfig = DEFAULT_CONFIG) -> RecoveryResult:
    """Dispatch a solver by name (see SOLVERS for the registry)."""
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ValueError(
            f"unknown solver {name!r}; choose from {sorted(SOLVERS)}"
        ) from None
    return fn(h, y, config)
