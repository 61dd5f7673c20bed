"""Deterministic data generation for the benchmark harness.

Every random quantity derives from one 64-bit experiment seed through
counter-based Philox bit generators.  Sub-streams are identified by a spawn
key ``(trial, STREAM)`` where STREAM is 0 for the measurement matrix, 1 for
the signal, 2 for the noise vector and 3 for the Monte-Carlo noise-variance
estimate, so regenerating any component is independent of the order in which
the others were drawn.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "substream",
    "gen_matrix",
    "gen_signal",
    "gen_noise",
    "MATRIX_KINDS",
    "SIGNAL_KINDS",
]

STREAM_MATRIX = 0
STREAM_SIGNAL = 1
STREAM_NOISE = 2
STREAM_MC = 3

MATRIX_KINDS = ("uncorrelated", "correlated")
SIGNAL_KINDS = ("gaussian", "equispaced_linear", "equispaced_pm1")


def substream(seed, *spawn_key):
    """A Philox generator on the sub-stream identified by ``spawn_key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in spawn_key))
    return np.random.Generator(np.random.Philox(ss))


def gen_matrix(kind, n, d, rho=0.8, seed=0, normalize=True, trial=0):
    """Random measurement matrix, bit-identical for a given (seed, trial).

    ``uncorrelated`` draws i.i.d. standard normal entries; ``correlated``
    draws each row from N(0, Sigma) with Sigma_ij = rho^|i-j| using the
    stationary AR(1) recursion column by column (no dense Cholesky factor is
    ever formed).
    """
    if kind not in MATRIX_KINDS:
        raise ValueError(f"unknown matrix kind {kind!r}")
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not (0.0 <= rho < 1.0):
        raise ValueError("rho must lie in [0, 1)")
    rng = substream(seed, trial, STREAM_MATRIX)
    G = rng.standard_normal((n, d))
    if kind == "uncorrelated" or rho == 0.0:
        A = G
    else:
        A = np.empty_like(G)
        A[:, 0] = G[:, 0]
        c = math.sqrt(1.0 - rho * rho)
        for j in range(1, d):
            A[:, j] = rho * A[:, j - 1] + c * G[:, j]
    if normalize:
        A = A / np.linalg.norm(A, axis=0)
    return A


def _signal_values(kind, d, k, rng):
    if kind == "gaussian":
        idx = rng.choice(d, size=k, replace=False)
        vals = rng.standard_normal(k)
        return idx, vals
    idx = (np.arange(k) * d) // k
    signs = rng.choice([-1.0, 1.0], size=k)
    if kind == "equispaced_pm1":
        return idx, signs
    if k == 1:
        mags = np.array([30.0])
    else:
        mags = 1.0 + (np.arange(k) / (k - 1)) * 29.0
    return idx, rng.permutation(mags) * signs


def gen_signal(kind, d, k, seed=0, trial=0):
    """k-sparse ground-truth signal.

    ``gaussian``: random support, N(0,1) values.  ``equispaced_linear``:
    equispaced support, magnitudes a random permutation of k points evenly
    spanning [1, 30], i.i.d. signs.  ``equispaced_pm1``: equispaced support,
    i.i.d. +-1 values.
    """
    if kind not in SIGNAL_KINDS:
        raise ValueError(f"unknown signal kind {kind!r}")
    if not (1 <= k <= d):
        raise ValueError("need 1 <= k <= d")
    rng = substream(seed, trial, STREAM_SIGNAL)
    idx, vals = _signal_values(kind, d, k, rng)
    x = np.zeros(d)
    x[idx] = vals
    return x


def gen_noise(A, signal_kind, k, nu, seed=0, trial=0, mc_draws=2000):
    """Gaussian noise with variance nu^2 * E||Ax||^2 / n.

    The expectation over the signal distribution is estimated by Monte Carlo
    from ``mc_draws`` signals on a dedicated sub-stream, so the noise vector
    itself stays reproducible independently of the estimate.
    """
    A = np.asarray(A)
    n, d = A.shape
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if nu == 0.0:
        return np.zeros(n)
    rng_mc = substream(seed, trial, STREAM_MC)
    acc = 0.0
    for _ in range(mc_draws):
        idx, vals = _signal_values(signal_kind, d, k, rng_mc)
        ax = A[:, idx] @ vals
        acc += float(ax @ ax)
    sigma2 = nu * nu * (acc / mc_draws) / n
    rng = substream(seed, trial, STREAM_NOISE)
    return math.sqrt(sigma2) * rng.standard_normal(n)
