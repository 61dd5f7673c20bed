"""Experiment orchestration: recovery benchmarks and kernel suites.

Each trial owns its instance (matrix, signal, noise all derived from the
experiment seed and the trial index), methods produce raw candidate vectors,
and a shared post-processing step projects every candidate to its k largest
magnitudes, refits by least squares and keeps the smallest residual.  Rows
are emitted in a deterministic order, so identical specs and seeds reproduce
identical metric columns byte for byte (timing columns excepted).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..baselines import BaselineConfig, dc_trimmed_lasso, admm_trimmed_lasso, irl1, irls, lasso_sweep, ls_omp
from ..errors import ConfigError
from ..kernel import mu_theta
from ..oracles import highprec_mu_theta
from ..optimizer import (
    HomotopyConfig,
    lambda_grid_power1,
    lambda_grid_power2,
    solve_p0,
)
from ..problem import ProblemInstance, proj_k
from ..wl1 import least_squares_on_support
from .data import MATRIX_KINDS, SIGNAL_KINDS, gen_matrix, gen_noise, gen_signal, substream
from .io import write_csv_rows
from .metrics import evaluate

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "METHODS",
    "PAPER_GAMMA_GRID",
    "run_recovery",
    "run_kernel_accuracy",
    "run_kernel_timing",
    "postprocess_candidates",
]

# The 18-value softness grid of the kernel accuracy protocol.
PAPER_GAMMA_GRID = (
    1e-20,
    1e-10,
    1e-5,
    1e-2,
    0.2,
    0.4,
    0.6,
    0.8,
    1.0,
    2.0,
    4.0,
    6.0,
    8.0,
    10.0,
    1e2,
    1e5,
    1e10,
    1e20,
)

RESULT_HEADER = (
    "k",
    "trial",
    "method",
    "lambda_used",
    "norm_obj",
    "rec_err",
    "supp_prec",
    "opt_success",
    "rec_success",
    "wall_time",
)

SUMMARY_HEADER = (
    "k",
    "method",
    "trials",
    "opt_success_rate",
    "rec_success_rate",
    "mean_supp_prec",
)


@dataclass
class ExperimentSpec:
    """A recovery experiment: data model, sizes, trial count and methods."""

    matrix: str = "uncorrelated"
    signal: str = "gaussian"
    n: int = 100
    d: int = 800
    k: tuple = (16,)
    rho: float = 0.8
    nu: float = 1e-6
    trials: int = 50
    seed: int = 0
    methods: tuple = ("gsm2", "lsomp")
    lambda_points: int = 20
    full_scale: bool = False

    def __post_init__(self):
        if self.matrix not in MATRIX_KINDS:
            raise ConfigError(f"unknown matrix kind {self.matrix!r}")
        if self.signal not in SIGNAL_KINDS:
            raise ConfigError(f"unknown signal kind {self.signal!r}")
        if isinstance(self.k, int):
            self.k = (self.k,)
        self.k = tuple(int(v) for v in self.k)
        if not self.k:
            raise ConfigError("k grid must be nonempty")
        for kv in self.k:
            if not (0 < kv < self.d):
                raise ConfigError(f"need 0 < k < d; got k={kv}, d={self.d}")
        if not (0.0 <= self.rho < 1.0):
            raise ConfigError("rho must lie in [0, 1)")
        if not (0.0 <= self.nu <= 1.0):
            raise ConfigError("nu must lie in [0, 1]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        self.methods = tuple(self.methods)
        if not self.methods:
            raise ConfigError("methods list must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(
                    f"unknown method {m!r}; known: {', '.join(sorted(METHODS))}"
                )
        if self.lambda_points < 2:
            raise ConfigError("lambda_points must be >= 2")

    @classmethod
    def from_dict(cls, raw):
        """Build from the raw string mapping of a parsed config file."""
        known = {
            "matrix": str,
            "signal": str,
            "n": int,
            "d": int,
            "rho": float,
            "nu": float,
            "trials": int,
            "seed": int,
            "lambda_points": int,
        }
        kwargs = {}
        for key, value in raw.items():
            if key in known:
                try:
                    kwargs[key] = known[key](value)
                except ValueError as exc:
                    raise ConfigError(f"config key {key}: {exc}") from exc
            elif key == "k":
                try:
                    kwargs["k"] = tuple(int(v) for v in value.split(","))
                except ValueError as exc:
                    raise ConfigError(f"config key k: {exc}") from exc
            elif key == "methods":
                kwargs["methods"] = tuple(
                    m.strip() for m in value.split(",") if m.strip()
                )
            elif key == "full_scale":
                kwargs["full_scale"] = value.lower() in ("1", "true", "yes")
            elif key == "out":
                continue  # handled by the CLI
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**kwargs)


@dataclass
class ResultRow:
    k: int
    trial: int
    method: str
    lambda_used: float
    norm_obj: float
    rec_err: float
    supp_prec: float
    opt_success: bool
    rec_success: bool
    wall_time: float

    def as_csv(self):
        return (
            self.k,
            self.trial,
            self.method,
            float(self.lambda_used) if self.lambda_used == self.lambda_used else math.nan,
            float(self.norm_obj),
            float(self.rec_err),
            float(self.supp_prec),
            int(self.opt_success),
            int(self.rec_success),
            float(self.wall_time),
        )


def postprocess_candidates(p, candidates):
    """Shared post-processing: proj_k + least-squares refit + min residual.

    Returns (x_best, index_of_best).
    """
    best_x = None
    best_r = math.inf
    best_i = -1
    for i, c in enumerate(candidates):
        xs = least_squares_on_support(p, np.flatnonzero(proj_k(c, p.k)))
        r = float(np.linalg.norm(p.residual(xs)))
        if r < best_r:
            best_x, best_r, best_i = xs, r, i
    if best_x is None:
        raise ValueError("no candidates to post-process")
    return best_x, best_i


# --- method registry -------------------------------------------------------
# Each method maps (instance, spec) -> (candidate list, lambda list); the
# lambda list aligns with the candidates (nan when not applicable).


def _method_gsm(p, spec, power):
    cfg = HomotopyConfig(power=power)
    num = 50 if spec.full_scale else spec.lambda_points
    grid = lambda_grid_power2(p, num) if power == 2 else lambda_grid_power1(p, num)
    sol = solve_p0(p, cfg, lambda_grid=grid)
    return [sol.x_sparse], [sol.lambda_used]


def _method_dc(p, spec):
    num = 50 if spec.full_scale else spec.lambda_points
    grid = lambda_grid_power2(p, num)
    cands, lams = [], []
    x = np.zeros(p.d)
    for lam in grid:
        x = dc_trimmed_lasso(p, float(lam), eta=1e-2, x0=x)
        cands.append(x.copy())
        lams.append(float(lam))
    return cands, lams


def _method_admm(p, spec):
    num = 50 if spec.full_scale else spec.lambda_points
    grid = lambda_grid_power2(p, num)
    cands, lams = [], []
    x = np.zeros(p.d)
    for lam in grid:
        x = admm_trimmed_lasso(p, float(lam), eta=1e-2, x0=x)
        cands.append(x.copy())
        lams.append(float(lam))
    return cands, lams


def _lp_grids(spec):
    if spec.full_scale:
        p_grid = (1e-8, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
        lam_grid = tuple(1e-8 * 1.5**i for i in range(90))
    else:
        p_grid = (1e-8, 0.1, 0.3, 0.5, 0.7, 0.9)
        lam_grid = tuple(1e-8 * 1.5 ** (3 * i) for i in range(30))
    return p_grid, lam_grid


def _method_lp(p, spec, solver):
    p_grid, lam_grid = _lp_grids(spec)
    cfg = BaselineConfig(method="lp", p_grid=p_grid, lambda_grid=lam_grid)
    cands, lams = [], []
    for pexp in p_grid:
        for lam in lam_grid:
            cands.append(solver(p, lam, pexp, cfg))
            lams.append(float(lam))
    return cands, lams


def _method_lsomp(p, spec):
    return [ls_omp(p)], [math.nan]


def _method_bp(p, spec):
    cands = lasso_sweep(p)
    lam_max = float(np.abs(p.A.T @ p.y).max())
    lams = list(lam_max * np.logspace(0.0, -8.0, 61))
    return cands, lams


METHODS = {
    "gsm2": lambda p, spec: _method_gsm(p, spec, 2),
    "gsm1": lambda p, spec: _method_gsm(p, spec, 1),
    "dc": _method_dc,
    "admm": _method_admm,
    "irls": lambda p, spec: _method_lp(p, spec, irls),
    "irl1": lambda p, spec: _method_lp(p, spec, irl1),
    "lsomp": _method_lsomp,
    "bp": _method_bp,
}


def _run_trial(spec, k, trial):
    A = gen_matrix(spec.matrix, spec.n, spec.d, spec.rho, spec.seed, True, trial)
    x0 = gen_signal(spec.signal, spec.d, k, spec.seed, trial)
    e = gen_noise(A, spec.signal, k, spec.nu, spec.seed, trial)
    y = A @ x0 + e
    p = ProblemInstance(A, y, k)
    rows = []
    for name in spec.methods:
        t0 = time.perf_counter()
        cands, lams = METHODS[name](p, spec)
        x_hat, best_i = postprocess_candidates(p, cands)
        wall = time.perf_counter() - t0
        m = evaluate(p, x_hat, x0, spec.nu)
        rows.append(
            ResultRow(
                k=k,
                trial=trial,
                method=name,
                lambda_used=lams[best_i] if lams else math.nan,
                norm_obj=m.norm_obj,
                rec_err=m.rec_err,
                supp_prec=m.supp_prec,
                opt_success=m.opt_success,
                rec_success=m.rec_success,
                wall_time=wall,
            )
        )
    return rows


def _trial_star(args):
    return _run_trial(*args)


def run_recovery(spec, out_results=None, out_summary=None, workers=1):
    """Run the recovery experiment; returns (rows, summary_rows).

    Trials execute on a bounded worker pool when ``workers > 1``; rows are
    sorted afterwards, so aggregation and output do not depend on completion
    order.
    """
    if spec.full_scale:
        spec = replace(spec, trials=max(spec.trials, 200))
    jobs = [(spec, k, t) for k in spec.k for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial_star, jobs))
    else:
        chunks = [_run_trial(*job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.k, r.trial, spec.methods.index(r.method)))

    summary = []
    for k in spec.k:
        for name in spec.methods:
            sel = [r for r in rows if r.k == k and r.method == name]
            summary.append(
                (
                    k,
                    name,
                    len(sel),
                    float(np.mean([r.opt_success for r in sel])),
                    float(np.mean([r.rec_success for r in sel])),
                    float(np.mean([r.supp_prec for r in sel])),
                )
            )
    if out_results:
        write_csv_rows(out_results, RESULT_HEADER, [r.as_csv() for r in rows])
    if out_summary:
        write_csv_rows(out_summary, SUMMARY_HEADER, summary)
    return rows, summary


# --- kernel suites ---------------------------------------------------------

ACCURACY_HEADER = ("d", "k", "gamma", "dist", "trials", "mu_rel_err", "theta_err")
TIMING_HEADER = ("d", "k", "trials", "mean_seconds")

_DISTS = ("uniform", "absnormal")


def _draw_z(dist, d, rng):
    if dist == "uniform":
        return rng.uniform(0.0, 1.0, d)
    if dist == "absnormal":
        return np.abs(rng.standard_normal(d))
    raise ConfigError(f"unknown distribution {dist!r}")


def run_kernel_accuracy(
    dims=(1000,),
    ks=(10, 100, 500),
    gammas=PAPER_GAMMA_GRID,
    dists=_DISTS,
    trials=20,
    seed=0,
    out=None,
):
    """Max kernel errors per cell against the extended-precision reference.

    Error measures: |mu - mu_ref| / |mu_ref| and (1/k) * max_i |theta_i -
    theta_ref_i|, maximized over ``trials`` fresh inputs per cell.
    """
    rows = []
    for d in dims:
        for k in ks:
            if k > d // 2:
                continue
            for gi, gamma in enumerate(gammas):
                for di, dist in enumerate(dists):
                    mu_err = 0.0
                    th_err = 0.0
                    for t in range(trials):
                        rng = substream(seed, d, k, gi, di, t)
                        z = _draw_z(dist, d, rng)
                        res = mu_theta(z, k, gamma)
                        mu_ref, th_ref = highprec_mu_theta(z, k, gamma)
                        mu_err = max(
                            mu_err, abs(res.mu - mu_ref) / abs(mu_ref)
                        )
                        th_err = max(
                            th_err, float(np.abs(res.theta - th_ref).max()) / k
                        )
                    rows.append((d, k, float(gamma), dist, trials, mu_err, th_err))
    if out:
        write_csv_rows(out, ACCURACY_HEADER, rows)
    return rows


def run_kernel_timing(dims=(1000, 10000, 100000), ks=(10, 100), trials=5, seed=0, out=None):
    """Mean wall time of the kernel per (d, k) cell.

    Only relative growth across cells is meaningful; a warmup call per cell
    excludes one-time compilation from the measurement.
    """
    rows = []
    for d in dims:
        for k in ks:
            if k > d // 2:
                continue
            rng = substream(seed, d, k)
            z = rng.uniform(0.0, 1.0, d)
            mu_theta(z, k, 5.0)  # warmup
            total = 0.0
            for _ in range(trials):
                t0 = time.perf_counter()
                mu_theta(z, k, 5.0)
                total += time.perf_counter() - t0
            rows.append((d, k, trials, total / trials))
    if out:
        write_csv_rows(out, TIMING_HEADER, rows)
    return rows
