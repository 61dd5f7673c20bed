"""Majorization-minimization and homotopy optimization of the penalized
objectives, plus the penalty-sweep driver for the best-subset problem.

The homotopy path solves a sequence of soft-surrogate problems with the
softness parameter grown geometrically from a near-convex start to infinity,
warm-starting each majorization-minimization solve from the previous
solution.  Each MM step reduces to one weighted-l1 convex problem whose
weights come from the kernel; the weights are bounded in [0, 1] with constant
sum, so no weight regularization is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import extend_support
from .kernel import mu_theta_full, tau_and_weights
from .problem import objective_value, proj_k, thresholds, trimmed_lasso
from .wl1 import (
    InnerSolverConfig,
    least_squares_on_support,
    solve_wl1_power1,
    solve_wl1_power2,
)

__all__ = [
    "HomotopyConfig",
    "Solution",
    "mm_solve",
    "homotopy_solve",
    "postprocess_ambiguous",
    "solve_p0",
    "lambda_grid_power2",
    "lambda_grid_power1",
    "lambda_grid_coarse",
]


@dataclass
class HomotopyConfig:
    """Tunables of the MM/homotopy scheme.

    Defaults follow the reference parameterization: initial softness chosen
    so that the first weight vector is uniform to within delta0, geometric
    growth by (1 + delta_gamma) with an accelerated (1 + delta_gamma_big)
    attempt every n_gamma rounds (revoked unless the iterate barely moves),
    and the two stopping rules (consecutive k-sparse iterates with a stable
    support / consecutive nearly-(d-k)-sparse weight vectors) before a final
    pass at gamma = inf.
    """

    delta0: float = 1e-4
    delta_gamma: float = 0.02
    delta_gamma_big: float = 9.0
    n_gamma: int = 10
    eps_x: float = 1e-6
    eps_w: float = 1e-5
    mm_rel_tol_single: float = 1e-6
    mm_rel_tol_double: float = 1e-3
    sparse_stop_iters: int = 10
    wsparse_stop_iters: int = 4
    power: int = 2
    mm_max_iters: int = 500
    homotopy_max_rounds: int = 4000
    gamma_max: float = 1e18
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    inner_loose_tol: float = 1e-8
    final_inner_max_iters: int = 20000

    def __post_init__(self):
        if self.power not in (1, 2):
            raise ValueError("power must be 1 or 2")
        for name in ("delta0", "delta_gamma", "delta_gamma_big", "eps_x", "eps_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.delta_gamma >= self.delta_gamma_big:
            raise ValueError("delta_gamma must be smaller than delta_gamma_big")


@dataclass
class Solution:
    """Solver output: the raw path endpoint and its k-sparse refit."""

    x: np.ndarray
    x_sparse: np.ndarray
    objective: float
    residual_norm: float
    gamma_final: float
    trace: list
    lambda_used: float | None = None


def _inner_solve(p, w, lam, x0, cfg, rel_tol=None, max_iters=None, patient=False):
    inner = cfg.inner
    if rel_tol is not None or max_iters is not None:
        inner = replace(
            inner,
            rel_obj_tol=rel_tol if rel_tol is not None else inner.rel_obj_tol,
            max_iters=max_iters if max_iters is not None else inner.max_iters,
        )
    if cfg.power == 2:
        return solve_wl1_power2(p, w, lam, x0=x0, cfg=inner)
    # the final pass disables the stagnation backstop; the iteration cap
    # still bounds the work
    stall = 10**9 if patient else 12
    return solve_wl1_power1(p, w, lam, x0=x0, cfg=inner, stall_checks=stall)


def mm_solve(p, lam, gamma, x0=None, cfg=None, rel_tol=None, max_inner_iters=None, trace=None, patient=False):
    """Majorization-minimization at a fixed softness level.

    gamma = 0 is the convex case: a single weighted-l1 solve with uniform
    weights (d-k)/d.  Otherwise each round computes the weight vector at the
    current iterate and solves the weighted convex subproblem, stopping when
    the objective decreases by less than a factor 1e-6 once, or 1e-3 twice
    in a row.  The objective never increases along the rounds.
    """
    cfg = cfg or HomotopyConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    gamma = float(gamma)
    if gamma == 0.0:
        w = np.full(p.d, (p.d - p.k) / p.d)
        x = _inner_solve(p, w, lam, x0, cfg, rel_tol, max_inner_iters, patient)
        if trace is not None:
            trace.append(objective_value(p, x, lam, gamma, cfg.power))
        return x
    if x0 is None:
        raise ValueError("mm_solve requires a starting point when gamma > 0")
    x = np.asarray(x0, dtype=np.float64).copy()
    fx = objective_value(p, x, lam, gamma, cfg.power)
    if trace is not None:
        trace.append(fx)
    slow_rounds = 0
    for _ in range(cfg.mm_max_iters):
        _, w = tau_and_weights(x, p.k, gamma)
        x_new = _inner_solve(p, w, lam, x, cfg, rel_tol, max_inner_iters, patient)
        f_new = objective_value(p, x_new, lam, gamma, cfg.power)
        if f_new > fx:
            break  # inner tolerance artifact; keep the incumbent
        x, fx_prev = x_new, fx
        fx = f_new
        if trace is not None:
            trace.append(fx)
        if fx >= (1.0 - cfg.mm_rel_tol_single) * fx_prev:
            break
        if fx >= (1.0 - cfg.mm_rel_tol_double) * fx_prev:
            slow_rounds += 1
            if slow_rounds >= 2:
                break
        else:
            slow_rounds = 0
    return x


def _gamma_first(p, x0_star, cfg):
    """Initial softness from the spread of the (d-k)-subset sums of |x0*|.

    A degenerate spread (all magnitudes equal, e.g. x0* = 0) falls back to
    the problem's natural scale ||y|| / max_i ||a_i||.
    """
    a = np.abs(x0_star)
    m = p.d - p.k
    hi = mu_theta_full(a, m, math.inf).mu
    lo = mu_theta_full(a, m, -math.inf).mu
    spread = hi - lo
    if not (spread > 0.0) or not math.isfinite(spread):
        scale = float(np.linalg.norm(p.y)) / float(p.col_norms.max())
        return cfg.delta0 / (scale + np.finfo(float).eps)
    return cfg.delta0 / spread


def _topk_support(x, k):
    return frozenset(np.flatnonzero(proj_k(x, k)))


def homotopy_solve(p, lam, cfg=None):
    """Optimize the trimmed-lasso objective by continuation in the softness.

    Starts from the convex problem, grows gamma geometrically (with periodic
    accelerated jumps that are revoked if the iterate moves), stops when the
    iterates are k-sparse with a stable support for ``sparse_stop_iters``
    rounds or the weights are nearly (d-k)-sparse for ``wsparse_stop_iters``
    rounds, then runs a final MM pass at gamma = inf.  The recorded
    objective trace is nonincreasing.
    """
    cfg = cfg or HomotopyConfig()
    if lam <= 0:
        raise ValueError("homotopy requires lambda > 0")
    loose = cfg.inner_loose_tol
    trace = []

    x = mm_solve(p, lam, 0.0, None, cfg)
    trace.append((0.0, objective_value(p, x, lam, 0.0, cfg.power), trimmed_lasso(x, p.k)))

    move_tol = (
        float(np.linalg.norm(p.y)) / float(p.col_norms.max())
    ) * cfg.eps_x
    gamma = 0.0
    gamma_next = _gamma_first(p, x, cfg)
    sparse_streak = 0
    wsparse_streak = 0
    prev_supp = None
    for r in range(1, cfg.homotopy_max_rounds + 1):
        accelerated = r % cfg.n_gamma == 0 and r > 1
        if accelerated:
            gamma_try = gamma * (1.0 + cfg.delta_gamma_big)
            x_try = mm_solve(p, lam, gamma_try, x, cfg, rel_tol=loose)
            if float(np.abs(x_try - x).sum()) <= move_tol:
                gamma, x_new = gamma_try, x_try
            else:
                gamma = gamma * (1.0 + cfg.delta_gamma)
                x_new = mm_solve(p, lam, gamma, x, cfg, rel_tol=loose)
        else:
            gamma = gamma_next if r == 1 else gamma * (1.0 + cfg.delta_gamma)
            x_new = mm_solve(p, lam, gamma, x, cfg, rel_tol=loose)
        x = x_new
        tau_x = trimmed_lasso(x, p.k)
        trace.append((gamma, objective_value(p, x, lam, gamma, cfg.power), tau_x))

        if tau_x <= p.k * cfg.eps_x:
            supp = _topk_support(x, p.k)
            sparse_streak = sparse_streak + 1 if supp == prev_supp else 1
            prev_supp = supp
        else:
            sparse_streak = 0
            prev_supp = None
        _, w = tau_and_weights(x, p.k, gamma)
        if trimmed_lasso(w, p.d - p.k) <= (p.d - p.k) * cfg.eps_w:
            wsparse_streak += 1
        else:
            wsparse_streak = 0
        if (
            sparse_streak >= cfg.sparse_stop_iters
            or wsparse_streak >= cfg.wsparse_stop_iters
            or gamma >= cfg.gamma_max
        ):
            break

    x = mm_solve(
        p,
        lam,
        math.inf,
        x,
        cfg,
        rel_tol=1e-11,
        max_inner_iters=cfg.final_inner_max_iters,
        patient=True,
    )
    trace.append(
        (math.inf, objective_value(p, x, lam, math.inf, cfg.power), trimmed_lasso(x, p.k))
    )

    x = postprocess_ambiguous(
        p,
        x,
        p.k,
        mode="ls_omp" if p.d <= 1000 else "omp_step",
        lam=lam,
        power=cfg.power,
    )
    x_sparse = least_squares_on_support(p, np.flatnonzero(proj_k(x, p.k)))
    return Solution(
        x=x,
        x_sparse=x_sparse,
        objective=objective_value(p, x, lam, math.inf, cfg.power),
        residual_norm=float(np.linalg.norm(p.residual(x_sparse))),
        gamma_final=math.inf,
        trace=trace,
        lambda_used=lam,
    )


def _is_ambiguous(x, k):
    """Top-k support not numerically unique: |x|_(k) ~ |x|_(k+1)."""
    a = np.sort(np.abs(x))[::-1]
    if k >= a.size:
        return False
    return a[k - 1] - a[k] <= 1e-9 * (a[0] + 1e-300)


def postprocess_ambiguous(p, x, k, mode="ls_omp", lam=None, power=2):
    """Greedy support augmentation for deficient-support outputs.

    When the top-k support of x holds fewer than k nonzeros, extend it
    greedily (full least-squares OMP continuation, or single matching steps
    with refit) and return the k-sparse refit -- but only if it improves the
    penalized objective; otherwise x is returned unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    supp = np.flatnonzero(proj_k(x, k))
    if supp.size >= k:
        return x
    full = extend_support(p, supp, k, rule=mode)
    cand = least_squares_on_support(p, full)
    if lam is None:
        return cand if np.linalg.norm(p.residual(cand)) < np.linalg.norm(p.residual(x)) else x
    f_old = objective_value(p, x, lam, math.inf, power)
    f_new = objective_value(p, cand, lam, math.inf, power)
    return cand if f_new < f_old else x


# ---------------------------------------------------------------------------
# Penalty grids and the best-subset driver.
# ---------------------------------------------------------------------------


def lambda_grid_power2(p, num=50, delta_lambda=1e-4):
    """Exponential grid ending just above the k-sparsity threshold."""
    th = thresholds(p)
    i = np.arange(1, num + 1)
    return 10.0 ** (-8.0 * (num - i) / (num - 1)) * (1.0 + delta_lambda) * th.lambda_bar


def lambda_grid_power1(p, num=50, delta_lambda=1e-4):
    """Tangent-spaced grid between the zero-residual and k-sparsity
    thresholds, roughly twice denser near the lower end.

    Rank-deficient instances have a zero lower threshold; the grid then
    starts at 1e-8 times the upper threshold.
    """
    th = thresholds(p)
    lam_a = th.lambda_a if th.lambda_a > 0 else 1e-8 * th.lambda_b
    i = np.arange(1, num + 1)
    low = math.atan((1 - delta_lambda) / (1 + delta_lambda) * lam_a / th.lambda_b)
    return (
        (1.0 + delta_lambda)
        * th.lambda_b
        * np.tan((num - i) / (num - 1) * low + (i - 1) / (num - 1) * (math.pi / 4))
    )


def lambda_grid_coarse(p, num=7, delta_lambda=1e-4):
    """Short exponential grid used at large scale."""
    th = thresholds(p)
    i = np.arange(1, num + 1)
    return 10.0 ** (-3.0 * (num - i) / (num - 1)) * (1.0 + delta_lambda) * th.lambda_bar


def solve_p0(p, cfg=None, lambda_grid=None, sparse_early_stop=7):
    """Best-subset driver: sweep the penalty, refit, keep the best residual.

    Runs the homotopy for each penalty value in ascending order, projects
    each output to its k largest magnitudes with a least-squares refit, and
    returns the candidate with the smallest residual (ties to the smaller
    penalty).  The sweep stops early after ``sparse_early_stop`` consecutive
    already-k-sparse homotopy outputs; the per-penalty runs are independent,
    so callers may parallelize them externally (with early stopping off).
    """
    cfg = cfg or HomotopyConfig()
    if lambda_grid is None:
        grid = lambda_grid_power2(p) if cfg.power == 2 else lambda_grid_power1(p)
    else:
        grid = np.asarray(lambda_grid, dtype=np.float64)
        if grid.size == 0 or np.any(grid <= 0):
            raise ValueError("lambda grid must be nonempty and positive")
    grid = np.sort(grid)
    best = None
    streak = 0
    for lam in grid:
        sol = homotopy_solve(p, float(lam), cfg)
        if best is None or sol.residual_norm < best.residual_norm:
            best = sol
        if trimmed_lasso(sol.x, p.k) <= p.k * cfg.eps_x:
            streak += 1
            if streak >= sparse_early_stop:
                break
        else:
            streak = 0
    return best
