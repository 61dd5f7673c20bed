"""Competing solvers used in the benchmark comparisons.

All methods return a raw candidate vector (or a list of candidates for the
lasso sweep); the benchmark harness applies the shared post-processing
(project to the k largest magnitudes, least-squares refit, keep the smallest
residual) uniformly to every method's output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .problem import proj_k, trimmed_lasso
from .wl1 import InnerSolverConfig, least_squares_on_support, solve_wl1_power1, solve_wl1_power2, soft_threshold

__all__ = [
    "BaselineConfig",
    "dc_trimmed_lasso",
    "admm_trimmed_lasso",
    "prox_trimmed_l1",
    "irls",
    "irl1",
    "ls_omp",
    "extend_support",
    "lasso_sweep",
]

_P_GRID_FULL = (1e-8, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class BaselineConfig:
    """Method-specific tunables for a baseline run.

    ``p_grid``/``lambda_grid`` drive the lp methods' sweeps in the benchmark
    harness; the epsilon schedule follows the adaptive rule
    eps <- min(eps, eps_alpha * |x|_(k+1)), triggered after ``eps_stall_iters``
    consecutive iterations with relative objective decrease below
    ``eps_stall_rel``.
    """

    method: str = ""
    p_grid: tuple = _P_GRID_FULL
    lambda_grid: tuple | None = None
    eps_init: float = 1.0
    eps_alpha: float = 0.9
    eps_min: float = 1e-8
    eps_stall_iters: int = 3
    eps_stall_rel: float = 1e-3
    eta: float = 1e-2
    rho: float = 1.0
    max_iters: int = 500
    sparse_stop_iters: int = 10
    sparse_eps: float = 1e-6

    def __post_init__(self):
        if len(self.p_grid) == 0:
            raise ValueError("p_grid must be nonempty")
        for q in self.p_grid:
            if not (0.0 < q <= 1.0):
                raise ValueError("p exponents must lie in (0, 1]")
        if self.lambda_grid is not None and len(self.lambda_grid) == 0:
            raise ValueError("lambda_grid must be nonempty")


# ---------------------------------------------------------------------------
# Direct trimmed-lasso optimizers (difference-of-convex and ADMM).
# ---------------------------------------------------------------------------


def _dc_objective(p, x, lam, eta):
    r = p.residual(x)
    return 0.5 * float(r @ r) + lam * trimmed_lasso(x, p.k) + eta * float(
        np.abs(x).sum()
    )


def _topk_sign_subgradient(x, k):
    """Subgradient of the top-k magnitude sum: the sign pattern on the
    lowest-index top-k support, zero elsewhere."""
    g = np.zeros_like(x)
    keep = np.argsort(-np.abs(x), kind="stable")[:k]
    g[keep] = np.sign(x[keep])
    return g


def dc_trimmed_lasso(p, lam, eta=1e-2, x0=None, max_outer=200, rel_tol=1e-8, inner_cfg=None, trace=None):
    """Difference-of-convex iterations for the l1-regularized trimmed lasso.

    Splits lam*tau_k(x) = lam*||x||_1 - lam*h_k(x) with h_k the top-k
    magnitude sum, linearizes h_k at the current iterate and solves the
    resulting l1 problem with the power-2 inner solver.
    """
    if lam < 0 or eta < 0:
        raise ValueError("lam and eta must be nonnegative")
    inner_cfg = inner_cfg or InnerSolverConfig(rel_obj_tol=1e-10)
    x = np.zeros(p.d) if x0 is None else np.asarray(x0, np.float64).copy()
    fx = _dc_objective(p, x, lam, eta)
    if trace is not None:
        trace.append(fx)
    ones = np.ones(p.d)
    for _ in range(max_outer):
        g = _topk_sign_subgradient(x, p.k)
        x_new = solve_wl1_power2(
            p, ones, lam + eta, x0=x, cfg=inner_cfg, linear=-lam * g
        )
        f_new = _dc_objective(p, x_new, lam, eta)
        if f_new > fx:
            break  # inner tolerance artifact; keep the current iterate
        x, drop = x_new, fx - f_new
        fx = f_new
        if trace is not None:
            trace.append(fx)
        if drop <= rel_tol * max(1.0, abs(fx)):
            break
    return x


def prox_trimmed_l1(v, k, a, b):
    """prox of a*tau_k + b*||.||_1 at v (thresholds a, b >= 0).

    Protects the k largest magnitudes of v (ties to the lowest index),
    shrinking them by b and the remaining entries by a + b.  Tie-consistent
    protected sets give equal objectives, so the stable choice is optimal.
    """
    v = np.asarray(v, dtype=np.float64)
    z = soft_threshold(v, a + b)
    keep = np.argsort(-np.abs(v), kind="stable")[:k]
    z[keep] = soft_threshold(v[keep], b)
    return z


def admm_trimmed_lasso(p, lam, eta=1e-2, rho=1.0, x0=None, max_iters=1000, tol=1e-8, adaptive_rho=True, trace=None):
    """Consensus-splitting ADMM (reimplementation) for the same objective.

    x-update is a ridge solve with cached factorization (Woodbury form when
    d > n); z-update is the exact prox of (lam*tau_k + eta*||.||_1)/rho; rho
    is rebalanced by factors of 2 when the primal/dual residuals drift
    apart by more than 10x.
    """
    if lam < 0 or eta < 0 or rho <= 0:
        raise ValueError("need lam, eta >= 0 and rho > 0")
    A, y = p.A, p.y
    n, d = p.n, p.d
    Aty = A.T @ y
    gram_small = d <= n

    def factor(r):
        if gram_small:
            return cho_factor(A.T @ A + r * np.eye(d))
        return cho_factor(A @ A.T + r * np.eye(n))

    def solve_ridge(fac, r, q):
        if gram_small:
            return cho_solve(fac, q)
        return (q - A.T @ cho_solve(fac, A @ q)) / r

    fac = factor(rho)
    z = np.zeros(d) if x0 is None else np.asarray(x0, np.float64).copy()
    u = np.zeros(d)
    sqd = math.sqrt(d)
    for it in range(max_iters):
        x = solve_ridge(fac, rho, Aty + rho * (z - u))
        z_prev = z
        z = prox_trimmed_l1(x + u, p.k, lam / rho, eta / rho)
        u = u + x - z
        if trace is not None:
            rr = p.residual(x)
            aug = (
                0.5 * float(rr @ rr)
                + lam * trimmed_lasso(z, p.k)
                + eta * float(np.abs(z).sum())
                + 0.5 * rho * float(np.linalg.norm(x - z + u) ** 2)
                - 0.5 * rho * float(np.linalg.norm(u) ** 2)
            )
            trace.append(aug)
        r_norm = float(np.linalg.norm(x - z))
        s_norm = float(np.linalg.norm(rho * (z - z_prev)))
        eps_pri = sqd * tol + tol * max(
            float(np.linalg.norm(x)), float(np.linalg.norm(z))
        )
        eps_dual = sqd * tol + tol * float(np.linalg.norm(rho * u))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            break
        if adaptive_rho and (it + 1) % 10 == 0:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                u /= 2.0
                fac = factor(rho)
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                u *= 2.0
                fac = factor(rho)
    return z


# ---------------------------------------------------------------------------
# Iteratively reweighted lp methods.
# ---------------------------------------------------------------------------


def _lp_feasible_l1_init(p):
    """argmin ||x||_1 s.t. Ax = y when feasible, else plain least squares.

    Feasibility holds for full-row-rank systems with n <= d; the l1 problem
    is then solved through the power-1 solver in its zero-residual regime.
    """
    if p.n <= p.d and p.sigma_n > 1e-10 * max(p._sigma_1, 1e-300):
        lam_tiny = 0.4 * p.sigma_n / math.sqrt(p.d)
        return solve_wl1_power1(
            p,
            np.ones(p.d),
            lam_tiny,
            cfg=InnerSolverConfig(max_iters=6000, rel_obj_tol=1e-11),
        )
    sol, *_ = np.linalg.lstsq(p.A, p.y, rcond=None)
    return sol


def _ridge_weighted(p, w2, lam):
    """argmin 0.5*||Ax-y||^2 + lam * sum w2_i x_i^2 (Woodbury when d > n)."""
    A, y = p.A, p.y
    dvec = 2.0 * lam * w2
    if p.d <= p.n:
        H = A.T @ A + np.diag(dvec)
        return np.linalg.solve(H, A.T @ y)
    Dinv_At = A.T / dvec[:, None]
    M = np.eye(p.n) + A @ Dinv_At
    return Dinv_At @ np.linalg.solve(M, y)


def _run_reweighted(p, lam, pexp, cfg, kind, trace=None):
    if not (0.0 < pexp <= 1.0):
        raise ValueError("p exponent must lie in (0, 1]")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    x = _lp_feasible_l1_init(p)
    eps = cfg.eps_init
    inner_cfg = InnerSolverConfig(max_iters=2000, rel_obj_tol=1e-9)

    def objective(xv):
        if kind == "irls":
            return 0.5 * float(np.linalg.norm(p.residual(xv)) ** 2) + (
                2.0 * lam / pexp
            ) * float(np.sum((xv * xv + eps * eps) ** (pexp / 2.0)))
        return 0.5 * float(np.linalg.norm(p.residual(xv)) ** 2) + (
            lam / pexp
        ) * float(np.sum((np.abs(xv) + eps) ** pexp))

    fx = objective(x)
    if trace is not None:
        trace.append((eps, fx))
    stall = 0
    sparse_streak = 0
    prev_supp = None
    for _ in range(cfg.max_iters):
        if kind == "irls":
            w = (x * x + eps * eps) ** (pexp / 2.0 - 1.0)
            x = _ridge_weighted(p, w, lam)
        else:
            w = (np.abs(x) + eps) ** (pexp - 1.0)
            x = solve_wl1_power2(p, w, lam, x0=x, cfg=inner_cfg)
        f_new = objective(x)
        if trace is not None:
            trace.append((eps, f_new))
        if fx - f_new < cfg.eps_stall_rel * max(abs(fx), 1e-300):
            stall += 1
        else:
            stall = 0
        fx = f_new
        if stall >= cfg.eps_stall_iters:
            a = np.sort(np.abs(x))
            xk1 = a[p.d - p.k - 1] if p.d > p.k else 0.0
            eps = min(eps, cfg.eps_alpha * xk1)
            fx = objective(x)  # epsilon changed; rebase the stall detector
            stall = 0
        if eps < cfg.eps_min:
            break
        if trimmed_lasso(x, p.k) <= p.k * cfg.sparse_eps:
            supp = frozenset(np.flatnonzero(proj_k(x, p.k)))
            sparse_streak = sparse_streak + 1 if supp == prev_supp else 1
            prev_supp = supp
            if sparse_streak >= cfg.sparse_stop_iters:
                break
        else:
            sparse_streak = 0
            prev_supp = None
    return x


def irls(p, lam, pexp, cfg=None, trace=None):
    """Iteratively reweighted least squares for the lp-penalized residual.

    Weights (x_i^2 + eps^2)^(p/2 - 1) feed a weighted ridge solve; eps
    follows the adaptive schedule from the config, and iterations stop when
    eps underflows its floor or the iterate is k-sparse with a constant
    support for ``sparse_stop_iters`` rounds.
    """
    return _run_reweighted(p, lam, pexp, cfg or BaselineConfig(method="irls"), "irls", trace)


def irl1(p, lam, pexp, cfg=None, trace=None):
    """Iteratively reweighted l1: weights (|x_i| + eps)^(p-1), same epsilon
    schedule and stopping rules as IRLS, weighted-l1 inner solves."""
    return _run_reweighted(p, lam, pexp, cfg or BaselineConfig(method="irl1"), "irl1", trace)


# ---------------------------------------------------------------------------
# Greedy methods.
# ---------------------------------------------------------------------------


def _greedy_lsomp_support(p, k, init_support=()):
    """Extend a support greedily, each step adding the column that minimizes
    the post-refit residual (exact least-squares OMP selection via
    incrementally projected columns)."""
    A, y = p.A, p.y
    S = list(dict.fromkeys(int(i) for i in init_support))
    B = A.copy()
    c2 = np.sum(B * B, axis=0)
    c2_floor = 1e-12 * float(c2.max())
    r = y.astype(np.float64).copy()
    taken = np.zeros(p.d, dtype=bool)

    def absorb(j):
        nrm = math.sqrt(c2[j])
        q = B[:, j] / nrm
        proj = q @ B
        B[:] -= np.outer(q, proj)
        np.maximum(c2 - proj * proj, 0.0, out=c2)
        nonlocal r
        r = r - q * float(q @ r)
        taken[j] = True

    for j in S:
        if c2[j] > c2_floor:
            absorb(j)
        else:
            taken[j] = True
    while len(S) < k:
        t = B.T @ r
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = np.where(taken | (c2 <= c2_floor), -np.inf, t * t / c2)
        j = int(np.argmax(gains))
        if not np.isfinite(gains[j]):
            break  # remaining columns lie in the current span
        S.append(j)
        absorb(j)
    return S


def ls_omp(p, k=None):
    """Least-squares OMP down to the target sparsity level.

    Greedily adds the column minimizing the residual after refit; returns
    the k-sparse least-squares solution on the selected support.
    """
    k = p.k if k is None else int(k)
    if k > p.n:
        raise ValueError("ls_omp requires k <= n")
    S = _greedy_lsomp_support(p, k)
    return least_squares_on_support(p, S)


def extend_support(p, support, k, rule="ls_omp"):
    """Grow ``support`` to size k greedily.

    ``ls_omp`` continues full least-squares OMP; ``omp_step`` repeats single
    orthogonal-matching steps (refit, then add the column most correlated
    with the residual).
    """
    S = list(dict.fromkeys(int(i) for i in support))
    if len(S) >= k:
        return S[:k]
    if rule == "ls_omp":
        return _greedy_lsomp_support(p, k, S)
    if rule != "omp_step":
        raise ValueError(f"unknown rule {rule!r}")
    while len(S) < k:
        x = least_squares_on_support(p, S)
        corr = np.abs(p.A.T @ p.residual(x))
        corr[S] = -np.inf
        j = int(np.argmax(corr))
        if not np.isfinite(corr[j]) or corr[j] == 0.0:
            remaining = [i for i in range(p.d) if i not in S]
            if not remaining:
                break
            j = remaining[0]  # residual already orthogonal; pad deterministically
        S.append(j)
    return S


def lasso_sweep(p, lambda_grid=None):
    """Penalized l1 path over a logarithmic grid (61 points by default).

    Solved from the largest penalty downwards with warm starts; returns one
    candidate per grid value, in grid order.
    """
    if lambda_grid is None:
        lam_max = float(np.abs(p.A.T @ p.y).max())
        lambda_grid = lam_max * np.logspace(0.0, -8.0, 61)
    lambda_grid = np.asarray(lambda_grid, dtype=np.float64)
    if lambda_grid.size == 0:
        raise ValueError("lambda grid must be nonempty")
    order = np.argsort(-lambda_grid)
    ones = np.ones(p.d)
    cfg = InnerSolverConfig(max_iters=2000, rel_obj_tol=1e-10)
    out = [None] * lambda_grid.size
    x = np.zeros(p.d)
    for pos in order:
        x = solve_wl1_power2(p, ones, float(lambda_grid[pos]), x0=x, cfg=cfg)
        out[pos] = x.copy()
    return out
