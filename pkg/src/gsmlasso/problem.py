"""Trimmed-lasso objectives, projections, penalty thresholds and majorizers.

The penalized objectives are

    F2(x) = 0.5 * ||A x - y||^2 + lambda * tau_k(x)      (residual power 2)
    F1(x) = ||A x - y||   + lambda * tau_k(x)            (residual power 1)

where tau_k(x) is the l1 mass of x outside its k largest-magnitude entries.
Replacing tau_k by its soft surrogate tau(x; k, gamma) gives the smoothed
objectives optimized by the homotopy scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import BudgetError
from .kernel import tau_and_weights, tau_value

__all__ = [
    "ProblemInstance",
    "PenaltyThresholds",
    "trimmed_lasso",
    "proj_k",
    "objective_value",
    "majorizer_value",
    "thresholds",
    "alpha2k_lower_bound",
]

_ALPHA_BUDGET = 10**5


@dataclass
class PenaltyThresholds:
    """Critical penalty levels of the two objectives.

    * above ``lambda_bar`` every local minimum of F2 is k-sparse;
    * above ``lambda_b`` every local minimum of F1 is k-sparse;
    * below ``lambda_a`` every local minimum of F1 has zero residual
      (``lambda_a`` is 0 when A is rank deficient).
    """

    lambda_bar: float
    lambda_a: float
    lambda_b: float


class ProblemInstance:
    """A sparse-approximation instance (A, y, k) with cached norms.

    ``spec_norm_sq`` is a certified upper bound on ||A||_2^2 (power method
    plus a 1% safety factor), valid as a Lipschitz constant for the gradient
    of 0.5*||Ax - y||^2.  The n-th singular value is computed lazily.
    """

    def __init__(self, A, y, k, power_seed=12345):
        A = np.ascontiguousarray(A, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64).ravel()
        if A.ndim != 2:
            raise ValueError("A must be a 2-d matrix")
        n, d = A.shape
        if y.size != n:
            raise ValueError(f"y has length {y.size}, expected {n}")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(y)):
            raise ValueError("A and y must be finite")
        k = int(k)
        if not (0 < k < d):
            raise ValueError(f"need 0 < k < d; got k={k}, d={d}")
        col_norms = np.linalg.norm(A, axis=0)
        if not np.all(col_norms > 0):
            raise ValueError("A contains a zero column")
        self.A = A
        self.y = y
        self.k = k
        self.n = n
        self.d = d
        self.col_norms = col_norms
        self.spec_norm_sq = _power_method_sq(A, seed=power_seed)
        self._sigma_n = None
        self._sigma_1 = None

    @property
    def sigma_n(self):
        """n-th singular value of A (0 when n exceeds the rank budget)."""
        if self._sigma_n is None:
            s = np.linalg.svd(self.A, compute_uv=False)
            self._sigma_1 = float(s[0])
            self._sigma_n = float(s[self.n - 1]) if self.n <= s.size else 0.0
        return self._sigma_n

    def residual(self, x):
        return self.A @ x - self.y


def _power_method_sq(A, iters=50, safety=1.01, seed=12345):
    """Upper estimate of ||A||_2^2 by the power method on A^T A."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return float(np.sum(A * A)) * safety  # A^T A v = 0; Frobenius bound
        est = nw
        v = w / nw
    return float(est) * safety


def trimmed_lasso(x, k):
    """tau_k(x): the l1 mass of x outside its k largest magnitudes."""
    x = np.asarray(x, dtype=np.float64).ravel()
    d = x.size
    k = int(k)
    if not (0 <= k <= d):
        raise ValueError(f"need 0 <= k <= d; got k={k}, d={d}")
    if k == 0:
        return float(np.abs(x).sum())
    if k >= d:
        return 0.0
    a = np.abs(x)
    return float(np.sort(a)[: d - k].sum())


def proj_k(x, k):
    """Keep the k largest-magnitude entries (ties to the lowest index)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    k = int(k)
    if not (0 <= k <= x.size):
        raise ValueError(f"need 0 <= k <= d; got k={k}, d={x.size}")
    if k == 0:
        return np.zeros_like(x)
    if k >= x.size:
        return x.copy()
    keep = np.argsort(-np.abs(x), kind="stable")[:k]
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out


def objective_value(p, x, lam, gamma=math.inf, power=2):
    """F(x) with the soft penalty tau(x; k, gamma); gamma=inf is exact."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x = np.asarray(x, dtype=np.float64).ravel()
    r = p.residual(x)
    if math.isinf(gamma):
        tau = trimmed_lasso(x, p.k)
    else:
        tau = tau_value(x, p.k, gamma)
    if power == 2:
        return 0.5 * float(r @ r) + lam * tau
    if power == 1:
        return float(np.linalg.norm(r)) + lam * tau
    raise ValueError("power must be 1 or 2")


def majorizer_value(p, x, x_ref, lam, gamma=math.inf, power=2):
    """G(x, x_ref) >= F(x), touching at x = x_ref.

    The penalty part is tau(x_ref; k, gamma) + <w(x_ref), |x| - |x_ref|>;
    at gamma = 0 the weights are uniform and G no longer depends on x_ref.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x = np.asarray(x, dtype=np.float64).ravel()
    x_ref = np.asarray(x_ref, dtype=np.float64).ravel()
    tau_ref, w = tau_and_weights(x_ref, p.k, gamma)
    pen = tau_ref + float(w @ (np.abs(x) - np.abs(x_ref)))
    r = p.residual(x)
    if power == 2:
        return 0.5 * float(r @ r) + lam * pen
    if power == 1:
        return float(np.linalg.norm(r)) + lam * pen
    raise ValueError("power must be 1 or 2")


def thresholds(p):
    """Penalty thresholds of the instance; sigma_n via a singular decomposition."""
    max_col = float(p.col_norms.max())
    lambda_bar = float(np.linalg.norm(p.y)) * max_col
    sigma_n = p.sigma_n
    if p._sigma_1 is not None and sigma_n < 1e-10 * p._sigma_1:
        lambda_a = 0.0
    else:
        lambda_a = sigma_n / math.sqrt(p.d - p.k)
    return PenaltyThresholds(
        lambda_bar=lambda_bar, lambda_a=lambda_a, lambda_b=max_col
    )


def alpha2k_lower_bound(p):
    """Lower bound on the one-sided RIP constant alpha_{2k}.

    Enumerates every support of size 2k and returns the minimum of
    sigma_min(A_S) / sqrt(2k); since ||u||_1 <= sqrt(2k) ||u||_2 on such
    supports, this bounds min ||A u||_2 / ||u||_1 from below.  Tiny
    instances only.
    """
    m = 2 * p.k
    if m > p.d:
        raise ValueError("2k exceeds d")
    if math.comb(p.d, m) > _ALPHA_BUDGET:
        raise BudgetError(f"C({p.d},{m}) exceeds the support-enumeration budget")
    best = math.inf
    for S in combinations(range(p.d), m):
        s = np.linalg.svd(p.A[:, S], compute_uv=False)
        smin = s[-1] if p.n >= m else 0.0
        if smin < best:
            best = smin
    return float(best) / math.sqrt(m)
