"""Reference oracles for the soft top-k kernel.

Three independent routes to mu/theta, used by tests and by the accuracy
benchmark; none of them is a production path:

* ``brute_force_mu_theta`` evaluates the definition directly with a stable
  log-sum-exp over all C(d, k) subsets.
* ``naive_recursion_mu_theta`` runs the elementary-symmetric-polynomial
  recursion in linear space; it overflows outside small gamma * range(z) and
  is guarded accordingly.
* ``highprec_mu_theta`` re-runs the production recursions with 80-bit
  extended-precision arithmetic (numpy longdouble) in every
  accumulation-sensitive step, providing the reference values for the
  accuracy protocol.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetError, NumericError
from .kernel import (
    GsmKernelResult,
    _as_vector,
    _check_gamma,
    _mu_theta_hard_max,
    _stable_partition_desc,
    _clamp_unit,
)

__all__ = [
    "brute_force_mu_theta",
    "naive_recursion_mu_theta",
    "highprec_mu_theta",
]

_LD = np.longdouble
_BRUTE_BUDGET = 10**6


def brute_force_mu_theta(z, k, gamma):
    """mu and theta by direct enumeration over all C(d, k) subsets.

    Supports the full domain 0 <= k <= d, gamma in [-inf, inf].  Raises
    BudgetError when C(d, k) exceeds 10^6.
    """
    z = _as_vector(z)
    d = z.size
    k = int(k)
    if not (0 <= k <= d):
        raise ValueError(f"need 0 <= k <= d; got k={k}, d={d}")
    gamma = _check_gamma(gamma, allow_negative=True)
    if math.comb(d, k) > _BRUTE_BUDGET:
        raise BudgetError(f"C({d},{k}) exceeds the enumeration budget")

    if k == 0:
        return 0.0, np.zeros(d)
    if k == d:
        return float(z.sum()), np.ones(d)
    if gamma == 0.0:
        return (k / d) * float(z.sum()), np.full(d, k / d)
    if math.isinf(gamma):
        if gamma > 0:
            res = _mu_theta_hard_max(z, k)
            return res.mu, res.theta
        res = _mu_theta_hard_max(-z, k)
        return -res.mu, res.theta

    idx = np.array(list(combinations(range(d), k)), dtype=np.intp)
    sums = gamma * z[idx].sum(axis=1)
    m = float(sums.max())
    # log-mean-exp via log1p/expm1: immune to cancellation as gamma -> 0.
    mu = (m + math.log1p(float(np.expm1(sums - m).mean()))) / gamma
    ls_all = float(logsumexp(sums))
    theta = np.empty(d)
    for i in range(d):
        mask = (idx == i).any(axis=1)
        theta[i] = math.exp(float(logsumexp(sums[mask])) - ls_all)
    return float(mu), theta


def naive_recursion_mu_theta(z, k, gamma):
    """mu and theta by the linear-space symmetric-polynomial recursion.

    Intermediate values are exp(gamma * subset sums) without any log-domain
    normalization, so this only works while they stay inside double range;
    a NumericError is raised the moment they do not.
    """
    z = _as_vector(z)
    d = z.size
    k = int(k)
    if not (1 <= k <= d):
        raise ValueError(f"need 1 <= k <= d; got k={k}, d={d}")
    gamma = _check_gamma(gamma)
    if gamma == 0.0 or math.isinf(gamma):
        raise ValueError("naive recursion requires 0 < gamma < inf")

    y = np.exp(gamma * z)
    s_prev = 1.0
    t_prev = np.zeros(d)
    for q in range(1, k + 1):
        t = (s_prev - t_prev) * y
        s = float(t.sum()) / q
        if not np.isfinite(s) or s <= 0.0 or not np.all(np.isfinite(t)):
            raise NumericError(
                "naive recursion overflowed; inputs outside its safe regime"
            )
        s_prev, t_prev = s, t
    mu = (math.log(s_prev) - math.log(math.comb(d, k))) / gamma
    theta = t_prev / s_prev
    return float(mu), theta


# ---------------------------------------------------------------------------
# Extended-precision mirror of the production recursions.
# ---------------------------------------------------------------------------

if np.finfo(_LD).eps >= 1e-18:  # pragma: no cover - platform guard
    raise ImportError(
        "numpy longdouble offers no extra precision on this platform; "
        "the high-precision oracle requires 80-bit extended doubles"
    )


def _btable_ext(z, k, s, gamma):
    """Extended-precision b-table recursion, vectorized over the order q."""
    d = z.shape[0]
    g = _LD(gamma)
    b = np.zeros(s + 1, dtype=_LD)
    bt = np.zeros(s + 1, dtype=_LD)
    v = np.full(s + 1, -np.inf, dtype=_LD)
    v[0] = np.inf
    vt = v.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for r in range(d, 0, -1):
            zr = z[r - 1]
            nr = _LD(d - r + 1)
            qmax = min(s, d - r)
            if qmax >= 1:
                q = np.arange(1, qmax + 1)
                vt_lo = vt[:qmax]
                vt_hi = vt[1 : qmax + 1]
                v[1 : qmax + 1] = np.maximum(np.minimum(zr, vt_lo), vt_hi)
                xi = g * (zr - vt_hi)
                eta = bt[1 : qmax + 1] - bt[:qmax] - xi
                use_a = eta <= 0
                ca = (nr - q) / nr
                cb = q / nr
                val_a = (
                    np.log1p(ca * np.expm1(np.where(use_a, eta, _LD(0))))
                    + bt[:qmax]
                    - np.maximum(-xi, 0)
                )
                val_b = (
                    np.log1p(cb * np.expm1(np.where(use_a, _LD(0), -eta)))
                    + bt[1 : qmax + 1]
                    - np.maximum(xi, 0)
                )
                b[1 : qmax + 1] = np.where(use_a, val_a, val_b)
            if s >= d - r + 1:
                nri = d - r + 1
                v[nri] = min(zr, vt[nri - 1])
                b[nri] = 0.0
            bt[:] = b
            vt[:] = v
    mu = b[k] / g + v[1 : k + 1].sum()
    return mu, b, v


def _log_binom_prefix(n, kmax):
    """log C(n, j) for j = 0..kmax in extended precision."""
    j = np.arange(1, kmax + 1, dtype=_LD)
    ratios = np.log((_LD(n) - j + 1) / j)
    out = np.empty(kmax + 1, dtype=_LD)
    out[0] = 0.0
    np.cumsum(ratios, out=out[1:])
    return out


def _theta_ext(zs, k, gamma, b, v, bL, vL, bR, dL, dR, delta, logtsb):
    d = zs.shape[0]
    g = _LD(gamma)
    theta = np.empty(d, dtype=_LD)

    safety = np.empty(d, dtype=bool)
    safety[dL:] = True
    lhs = g * (zs[:dL] - v[k]) + b[k - 1] - b[k]
    safety[:dL] = lhs <= np.log((_LD(d) - k + 1) / k)

    fwd = np.flatnonzero(safety)
    if fwd.size:
        zi = zs[fwd]
        th = np.zeros(fwd.size, dtype=_LD)
        for q in range(1, k + 1):
            th = (
                (_LD(q) / (d - q + 1))
                * np.exp(g * (zi - v[q]) + b[q - 1] - b[q])
                * (1 - th)
            )
        theta[fwd] = th

    bwd = np.flatnonzero(~safety)
    if bwd.size:
        zi = zs[bwd]
        m = bwd.size
        thq = np.zeros((m, dL + 1), dtype=_LD)
        thq[:, dL] = 1.0
        qhat = np.full(m, k + 1, dtype=np.intp)
        alive = np.ones(m, dtype=bool)
        for q in range(1, k + 1):
            eta = g * (zi - vL[q]) + bL[q - 1] - bL[q]
            ok = alive & (eta <= np.log((_LD(dL) - q + 1) / q))
            thq[ok, q] = (
                (_LD(q) / (dL - q + 1)) * np.exp(eta[ok]) * (1 - thq[ok, q - 1])
            )
            crossed = alive & ~ok
            qhat[crossed] = q
            alive = ok
            if not alive.any():
                break
        need_bwd = qhat <= k
        if need_bwd.any():
            qmin = int(qhat[need_bwd].min())
            for q in range(dL - 1, qmin - 1, -1):
                rows = need_bwd & (qhat <= q)
                if not rows.any():
                    continue
                eta = bL[q + 1] - bL[q] - g * (zi[rows] - vL[q + 1])
                thq[rows, q] = 1 - (
                    (_LD(dL) - q) / (q + 1) * np.exp(eta) * thq[rows, q + 1]
                )
        lo = max(1, k - dR)
        wq = np.exp(logtsb[lo : k + 1] + bL[lo : k + 1] + bR[k - lo :: -1] - b[k] - g * delta[lo : k + 1])
        theta[bwd] = thq[:, lo : k + 1] @ wq
    return theta


def _mu_theta_ext_canonical(z, k, gamma):
    """Extended-precision mu/theta for 1 <= k <= d/2, 0 < gamma < inf."""
    d = z.size
    dL = max(1, 2 * k - 2)
    dR = d - dL
    order = _stable_partition_desc(z, dL)
    zs = z[order].astype(_LD)

    mu, b, v = _btable_ext(zs, k, k, gamma)
    _, bL, vL = _btable_ext(zs[:dL], k, dL, gamma)
    sR = min(k, dR)
    _, bR, vR = _btable_ext(zs[dL:], sR, sR, gamma)
    delta = _delta_ext(v, vL[: k + 1], vR, k, dR)

    lcL = _log_binom_prefix(dL, k)
    lcR_part = _log_binom_prefix(dR, sR)
    lcR = np.full(k + 1, -np.inf, dtype=_LD)
    lcR[: sR + 1] = lcR_part
    lcd = _log_binom_prefix(d, k)[k]
    logtsb = lcL + lcR[::-1] - lcd  # logtsb[q] pairs C(dL,q) with C(dR,k-q)

    theta_sorted = _theta_ext(zs, k, gamma, b, v, bL, vL, bR, dL, dR, delta, logtsb)
    theta = np.empty(d, dtype=_LD)
    theta[order] = theta_sorted
    return mu, theta


def _delta_ext(v, vL, vR, k, dR):
    delta = np.zeros(k + 1, dtype=_LD)
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


def highprec_mu_theta(z, k, gamma):
    """mu and theta recomputed with 80-bit extended precision internals.

    Same domain as ``mu_theta_full``; returns float64 values rounded from the
    extended-precision results.
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

    complement = k > d // 2
    kk = d - k if complement else k
    zin = -zz if complement else zz

    if kk == 0:
        mu_ld = _LD(0)
        theta_ld = np.zeros(d, dtype=_LD)
    elif g == 0.0:
        mu_ld = (_LD(kk) / d) * zin.astype(_LD).sum()
        theta_ld = np.full(d, _LD(kk) / d)
    elif math.isinf(g):
        res = _mu_theta_hard_max(zin, kk)
        mu_ld = _LD(res.mu)
        theta_ld = res.theta.astype(_LD)
    else:
        mu_ld, theta_ld = _mu_theta_ext_canonical(zin, kk, g)

    if complement:
        mu_ld = zz.astype(_LD).sum() + mu_ld
        theta_ld = 1 - theta_ld
    mu = sign * float(mu_ld)
    theta, _ = _clamp_unit(theta_ld.astype(np.float64))
    return mu, theta
