"""Numerically stable generalized soft-min kernel.

Computes, in O(kd) time and O(k) extra memory, the soft maximum-of-k-subset-sums

    mu(z; k, gamma) = (1/gamma) * log( mean over |S|=k of exp(gamma * sum_S z) )

together with its gradient theta (a "soft top-k indicator" with entries in
[0, 1] summing to k), for gamma in [0, inf].  From these, the trimmed-lasso
surrogate penalty tau(x; k, gamma) and its weight vector w are obtained via
the complement identities

    mu(z; k, gamma) + mu(z; d-k, -gamma) = sum(z)
    theta(z; k, gamma) + theta(z; d-k, -gamma) = 1
    mu(z; k, gamma) = -mu(-z; k, -gamma)

so that tau(x; k, gamma) = mu(|x|; d-k, -gamma) and w = theta(|x|; d-k, -gamma).

All recursions run in a logarithmic representation.  The central object is the
b-table

    b[q] = log( mean over |S|=q of exp(gamma * (sum_S z - top-q-sum(z))) )

whose entries are confined to [-q*log(d), 0], so no intermediate value can
overflow.  Steps that would lose significance near log(1) are evaluated with
log1p/expm1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import gammaln

__all__ = [
    "BTable",
    "GsmKernelResult",
    "mu_btable",
    "mu_theta",
    "mu_theta_full",
    "tau_and_weights",
    "tau_value",
    "theta_forward",
    "theta_backward_left",
    "delta_table",
    "theta_convert",
    "log_twoset_binom",
]


@dataclass
class BTable:
    """Log-domain subset-sum accumulators b[0..s] and sorted entries z_(0..s).

    ``zsorted[0]`` is +inf by convention; ``zsorted[1..s]`` are the s largest
    entries of z in nonincreasing order.  ``permutation``, when present, maps
    positions of the internally partitioned vector back to the caller's
    original index order.
    """

    b: np.ndarray
    zsorted: np.ndarray
    permutation: np.ndarray | None = None


@dataclass
class GsmKernelResult:
    """Value/gradient pair of the soft top-k sum, plus its b-table.

    ``clamp_excess`` records how far theta exceeded [0, 1] before being
    clamped (pure roundoff; should be ~1e-16, never above 1e-9).
    """

    mu: float
    theta: np.ndarray
    btable: BTable | None = None
    clamp_excess: float = 0.0


# ---------------------------------------------------------------------------
# Low-level recursions (Algorithms operate on already-validated float64 data).
# ---------------------------------------------------------------------------


@njit(cache=True)
def _btable_kernel(z, k, s, gamma):
    """b-table recursion over suffixes of z.

    Returns (mu, b, v) with b[q] = b_q(z), v[q] = z_(q) for q = 0..s and
    mu = (1/gamma) * b[k] + sum of the k largest entries.
    """
    d = z.shape[0]
    b = np.zeros(s + 1)
    bt = np.zeros(s + 1)
    v = np.full(s + 1, -np.inf)
    v[0] = np.inf
    vt = v.copy()
    for r in range(d, 0, -1):
        zr = z[r - 1]
        nr = d - r + 1  # length of the suffix (z_r, ..., z_d)
        qmax = min(s, nr - 1)
        for q in range(1, qmax + 1):
            v[q] = max(min(zr, vt[q - 1]), vt[q])
            xi = gamma * (zr - vt[q])
            eta = bt[q] - bt[q - 1] - xi
            if eta <= 0.0:
                b[q] = (
                    np.log1p(((nr - q) / nr) * np.expm1(eta))
                    + bt[q - 1]
                    - max(-xi, 0.0)
                )
            else:
                b[q] = (
                    np.log1p((q / nr) * np.expm1(-eta)) + bt[q] - max(xi, 0.0)
                )
        if s >= nr:
            v[nr] = min(zr, vt[nr - 1])
            b[nr] = 0.0
        for q in range(0, min(s, nr) + 1):
            bt[q] = b[q]
            vt[q] = v[q]
    mu = b[k] / gamma
    for q in range(1, k + 1):
        mu += v[q]
    return mu, b, v


@njit(cache=True)
def _theta_forward_kernel(zi, k, gamma, b, v, d):
    """Forward recursion theta_q = c_q * (1 - theta_{q-1}).

    Safe whenever every multiplier c_q <= 1, which the caller guarantees.
    """
    th = 0.0
    for q in range(1, k + 1):
        th = (q / (d - q + 1.0)) * np.exp(
            gamma * (zi - v[q]) + b[q - 1] - b[q]
        ) * (1.0 - th)
    return th


@njit(cache=True)
def _theta_backward_kernel(zi, k, gamma, bL, vL, dL, th):
    """Fill th[0..dL] with theta_q(z_left) for q = 0..dL (entries above the
    crossover computed backwards from th[dL] = 1)."""
    th[0] = 0.0
    th[dL] = 1.0
    qhat = k + 1
    for q in range(1, k + 1):
        eta = gamma * (zi - vL[q]) + bL[q - 1] - bL[q]
        if eta <= np.log((dL - q + 1.0) / q):
            th[q] = (q / (dL - q + 1.0)) * np.exp(eta) * (1.0 - th[q - 1])
        else:
            qhat = q
            break
    if qhat <= k:
        for q in range(dL - 1, qhat - 1, -1):
            eta = bL[q + 1] - bL[q] - gamma * (zi - vL[q + 1])
            th[q] = 1.0 - ((dL - q) / (q + 1.0)) * np.exp(eta) * th[q + 1]


@njit(cache=True)
def _delta_kernel(v, vL, vR, k, dR):
    """Nonnegative max-sum defects Delta_{k,t} for a left/right split.

    The recursion telescopes differences of equal-magnitude terms, so the
    result is exactly zero whenever the top-k sums decompose additively.
    """
    delta = np.zeros(k + 1)
    for q in range(1, k + 1):
        ta = max(0, q - dR)
        tb = min(q, k)
        for t in range(tb, max(ta, 1) - 1, -1):
            if v[q] >= vL[t]:
                delta[t] = delta[t - 1] + (v[q] - vL[t])
            else:
                delta[t] = delta[t] + (v[q] - vR[q - t])
        if ta == 0:
            delta[0] = delta[0] + (v[q] - vR[q])
        else:
            delta[ta - 1] = 0.0
    return delta


@njit(cache=True)
def _theta_convert_kernel(k, gamma, bk, bL, bR, delta, logtsb, thL, dR):
    """Recombine theta_q(z_left) into theta_k(z) for one index.

    Every summand's exponential factor is bounded by 1, so the sum cannot
    overflow."""
    xi = 0.0
    for q in range(k, max(1, k - dR) - 1, -1):
        xi += np.exp(
            logtsb[q] + bL[q] + bR[k - q] - bk - gamma * delta[q]
        ) * thL[q]
    return xi


@njit(cache=True)
def _theta_all_kernel(zs, k, gamma, b, v, bL, vL, bR, dL, dR, delta, logtsb):
    """Per-index dispatch between the forward recursion on the full vector
    and the backward-then-convert path on the left block."""
    d = zs.shape[0]
    out = np.empty(d)
    work = np.empty(dL + 1)
    thr = np.log((d - k + 1.0) / k)
    for i in range(d):
        if i >= dL or gamma * (zs[i] - v[k]) + b[k - 1] - b[k] <= thr:
            out[i] = _theta_forward_kernel(zs[i], k, gamma, b, v, d)
        else:
            _theta_backward_kernel(zs[i], k, gamma, bL, vL, dL, work)
            out[i] = _theta_convert_kernel(
                k, gamma, b[k], bL, bR, delta, logtsb, work, dR
            )
    return out


# ---------------------------------------------------------------------------
# Validation helpers.
# ---------------------------------------------------------------------------


def _as_vector(z, name="z"):
    z = np.ascontiguousarray(z, dtype=np.float64).ravel()
    if z.size == 0:
        raise ValueError(f"{name} must be a nonempty vector")
    if not np.all(np.isfinite(z)):
        raise ValueError(f"{name} contains non-finite entries")
    return z


def _check_gamma(gamma, allow_negative=False):
    gamma = float(gamma)
    if math.isnan(gamma):
        raise ValueError("gamma must not be NaN")
    if not allow_negative and gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return gamma


def _stable_partition_desc(z, m):
    """Index order placing the m largest entries of z first.

    Ties at the cut magnitude are broken by original index; within each block
    the original order is preserved.  O(d).
    """
    d = z.size
    if m >= d:
        return np.arange(d)
    pivot = np.partition(z, d - m)[d - m]  # m-th largest value
    greater = z > pivot
    n_greater = int(np.count_nonzero(greater))
    need = m - n_greater
    eq_idx = np.flatnonzero(z == pivot)
    left_eq = eq_idx[:need]
    in_left = greater.copy()
    in_left[left_eq] = True
    left = np.flatnonzero(in_left)
    right = np.flatnonzero(~in_left)
    return np.concatenate((left, right))


def log_twoset_binom(m, n, q, t):
    """log of C(m,t)*C(n,q-t)/C(m+n,q); -inf outside the support."""
    t = np.asarray(t)
    valid = (t >= np.maximum(0, q - n)) & (t <= np.minimum(q, m))
    t_safe = np.where(valid, t, 0)
    val = (
        _log_binom(m, t_safe)
        + _log_binom(n, q - t_safe)
        - _log_binom(m + n, q)
    )
    return np.where(valid, val, -np.inf)


def _log_binom(n, j):
    return gammaln(n + 1.0) - gammaln(np.asarray(j) + 1.0) - gammaln(n - np.asarray(j) + 1.0)


# ---------------------------------------------------------------------------
# Public operations.
# ---------------------------------------------------------------------------


def mu_btable(z, k, s, gamma):
    """Run the log-domain b-table recursion on z.

    Parameters
    ----------
    z : array_like
        Input vector (any order; the recursion maintains its own sorted
        prefix tables).
    k, s : int
        Order of the returned mu and table size, 1 <= k <= s <= len(z).
    gamma : float
        Finite positive softness parameter.

    Returns
    -------
    (mu, BTable)
        mu = (1/gamma) * b[k] + sum of the k largest entries of z, and the
        table of b[q], z_(q) for q = 0..s.
    """
    z = _as_vector(z)
    d = z.size
    k = int(k)
    s = int(s)
    if not (1 <= k <= s <= d):
        raise ValueError(f"expected 1 <= k <= s <= d, got k={k}, s={s}, d={d}")
    gamma = _check_gamma(gamma)
    if gamma == 0 or math.isinf(gamma):
        raise ValueError("mu_btable requires 0 < gamma < inf")
    mu, b, v = _btable_kernel(z, k, s, gamma)
    return mu, BTable(b=b, zsorted=v)


def theta_forward(i, k, gamma, btable, z):
    """theta_k at index i by the forward recursion (all multipliers <= 1)."""
    z = _as_vector(z)
    return float(
        _theta_forward_kernel(
            z[i], int(k), float(gamma), btable.b, btable.zsorted, z.size
        )
    )


def theta_backward_left(i, k, gamma, btable_L, zL):
    """theta_q(z_left) for q = 0..k at index i of the left block.

    Runs the forward recursion up to the crossover order where the recursion
    multiplier exceeds 1, then fills the remaining orders backwards from
    theta_{dL} = 1.
    """
    zL = _as_vector(zL, "zL")
    dL = zL.size
    k = int(k)
    if not (1 <= k <= dL):
        raise ValueError("need 1 <= k <= len(zL)")
    work = np.empty(dL + 1)
    _theta_backward_kernel(
        zL[i], k, float(gamma), btable_L.b, btable_L.zsorted, dL, work
    )
    return work[: k + 1].copy()


def delta_table(zL, zR, k):
    """Delta_{k,t} = M_k([zL, zR]) - M_t(zL) - M_{k-t}(zR) for t = 0..k,
    where M_q is the sum of the q largest entries.

    Computed by a roundoff-safe recursion: results are exactly zero whenever
    the decompositions coincide, and always nonnegative.
    """
    zL = _as_vector(zL, "zL")
    zR = _as_vector(zR, "zR")
    k = int(k)
    dR = zR.size
    if not (1 <= k <= zL.size):
        raise ValueError("need 1 <= k <= len(zL)")
    inf = np.array([np.inf])
    v = np.concatenate((inf, np.sort(np.concatenate((zL, zR)))[::-1][:k]))
    vL = np.concatenate((inf, np.sort(zL)[::-1][:k]))
    nR = min(k, dR)
    vR = np.concatenate((inf, np.sort(zR)[::-1][:nR]))
    return _delta_kernel(v, vL, vR, k, dR)


def theta_convert(k, gamma, btable, btable_L, btable_R, delta, theta_left, d_right):
    """theta_k(z) for one index from its theta_q(z_left) values.

    The two-set binomial coefficients are evaluated in log space via
    log-gamma, so the conversion is overflow-free for any dimension.
    """
    k = int(k)
    dL = btable_L.b.size - 1
    dR = int(d_right)
    logtsb = log_twoset_binom(dL, dR, k, np.arange(k + 1))
    return float(
        _theta_convert_kernel(
            k,
            float(gamma),
            btable.b[k],
            btable_L.b,
            btable_R.b,
            np.asarray(delta, dtype=np.float64),
            logtsb,
            np.asarray(theta_left, dtype=np.float64),
            dR,
        )
    )


def mu_theta(z, k, gamma):
    """mu and theta for 0 <= k <= floor(d/2), gamma in [0, inf].

    Dispatches the closed-form cases (k = 0, gamma = 0, gamma = inf) and
    otherwise runs the O(kd) split recursion: b-tables for the full vector,
    the block of the max(1, 2k-2) largest entries and its complement, then a
    per-index choice between the forward recursion and the
    backward-plus-conversion path.
    """
    z = _as_vector(z)
    d = z.size
    k = int(k)
    if not (0 <= k <= d // 2):
        raise ValueError(
            f"mu_theta requires 0 <= k <= floor(d/2); got k={k}, d={d} "
            "(use mu_theta_full for the complement regime)"
        )
    gamma = _check_gamma(gamma)

    if k == 0:
        return GsmKernelResult(mu=0.0, theta=np.zeros(d))
    if gamma == 0.0:
        return GsmKernelResult(
            mu=(k / d) * float(z.sum()), theta=np.full(d, k / d)
        )
    if math.isinf(gamma):
        return _mu_theta_hard_max(z, k)

    dL = max(1, 2 * k - 2)
    dR = d - dL
    order = _stable_partition_desc(z, dL)
    zs = z[order]

    mu, b, v = _btable_kernel(zs, k, k, gamma)
    _, bL, vL = _btable_kernel(zs[:dL], k, dL, gamma)
    sR = min(k, dR)
    _, bR, vR = _btable_kernel(zs[dL:], sR, sR, gamma)
    delta = _delta_kernel(v, vL[: k + 1], vR, k, dR)
    logtsb = log_twoset_binom(dL, dR, k, np.arange(k + 1))

    theta_sorted = _theta_all_kernel(
        zs, k, gamma, b, v, bL, vL, bR, dL, dR, delta, logtsb
    )
    theta = np.empty(d)
    theta[order] = theta_sorted
    theta, excess = _clamp_unit(theta)
    return GsmKernelResult(
        mu=float(mu),
        theta=theta,
        btable=BTable(b=b, zsorted=v, permutation=order),
        clamp_excess=excess,
    )


def _mu_theta_hard_max(z, k):
    """Exact top-k sum and its limit gradient, fractional on the tie set."""
    d = z.size
    zk = np.partition(z, d - k)[d - k]  # k-th largest value
    above = z > zk
    na = int(np.count_nonzero(above))
    tie = z == zk
    nb = int(np.count_nonzero(tie))
    theta = np.zeros(d)
    theta[above] = 1.0
    theta[tie] = (k - na) / nb
    mu = float(z[above].sum() + (k - na) * zk)
    return GsmKernelResult(mu=mu, theta=theta)


def _clamp_unit(theta):
    lo = float(theta.min())
    hi = float(theta.max())
    excess = max(0.0, -lo, hi - 1.0)
    if excess > 0.0:
        np.clip(theta, 0.0, 1.0, out=theta)
    return theta, excess


def mu_theta_full(z, k, gamma):
    """mu and theta for any 0 <= k <= d and gamma in [-inf, inf].

    Reduces to the canonical regime k <= floor(d/2), gamma >= 0 through the
    sign identity mu(z; k, gamma) = -mu(-z; k, -gamma) and the complement
    identity mu(z; k, gamma) = sum(z) - mu(z; d-k, -gamma); Algorithms on the
    canonical side never see the reduced regimes.
    """
    z = _as_vector(z)
    d = z.size
    k = int(k)
    if not (0 <= k <= d):
        raise ValueError(f"need 0 <= k <= d; got k={k}, d={d}")
    gamma = _check_gamma(gamma, allow_negative=True)

    sign = 1.0
    zz = z
    g = gamma
    if g < 0:
        zz = -zz
        g = -g
        sign = -1.0
    if k > d // 2:
        base = mu_theta(-zz, d - k, g)
        mu = float(zz.sum()) + base.mu
        theta = 1.0 - base.theta
    else:
        base = mu_theta(zz, k, g)
        mu = base.mu
        theta = base.theta
    theta, excess = _clamp_unit(theta)
    return GsmKernelResult(
        mu=sign * mu,
        theta=theta,
        btable=base.btable,
        clamp_excess=max(excess, base.clamp_excess),
    )


def tau_and_weights(x, k, gamma):
    """Trimmed-lasso surrogate tau(x; k, gamma) and weight vector w.

    tau = mu(|x|; d-k, -gamma) and w = theta(|x|; d-k, -gamma); w lies in
    [0, 1]^d with sum d-k.  gamma = 0 gives the uniform weights (d-k)/d and
    tau = ((d-k)/d)*||x||_1; gamma = inf gives the exact trimmed lasso with
    fractional weights on ties of the k-th magnitude.
    """
    x = _as_vector(x, "x")
    d = x.size
    k = int(k)
    if not (0 <= k < d):
        raise ValueError(f"need 0 <= k < d; got k={k}, d={d}")
    gamma = _check_gamma(gamma)
    res = mu_theta_full(np.abs(x), d - k, -gamma)
    return res.mu, res.theta


def tau_value(x, k, gamma):
    """tau(x; k, gamma) without the weight vector (b-table only).

    Uses tau = sum|x| - mu(|x|; k, gamma) and, when k > d/2, the further
    reduction mu(z; k, gamma) = sum(z) + mu(-z; d-k, gamma).
    """
    x = _as_vector(x, "x")
    d = x.size
    k = int(k)
    if not (0 <= k < d):
        raise ValueError(f"need 0 <= k < d; got k={k}, d={d}")
    gamma = _check_gamma(gamma)
    z = np.abs(x)
    total = float(z.sum())
    if k == 0:
        return total
    if gamma == 0.0:
        return (1.0 - k / d) * total
    if math.isinf(gamma):
        zk_sum = float(np.sort(z)[d - k :].sum())
        return total - zk_sum
    if k <= d // 2:
        mu_k, _, _ = _btable_kernel(z, k, k, gamma)
    else:
        mu_c, _, _ = _btable_kernel(-z, d - k, d - k, gamma)
        mu_k = total + mu_c
    return total - float(mu_k)
