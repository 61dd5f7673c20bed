"""Benchmark quality measures for a post-processed k-sparse estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Metrics", "evaluate"]


@dataclass
class Metrics:
    norm_obj: float
    rec_err: float
    supp_prec: float
    opt_success: bool
    rec_success: bool


def evaluate(p, x_hat, x0, nu):
    """Residual ratio, relative l1 recovery error and support precision.

    ``norm_obj`` compares the estimate's residual against the ground truth's;
    in a noiseless instance (zero reference residual) it is defined as 1 when
    the estimate is also exact and +inf otherwise.  An optimization counts as
    successful when norm_obj <= 1, a recovery when
    rec_err <= max(2*nu, 1e-3).
    """
    x_hat = np.asarray(x_hat, dtype=np.float64).ravel()
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    r_hat = float(np.linalg.norm(p.residual(x_hat)))
    r_ref = float(np.linalg.norm(p.residual(x0)))
    if r_ref == 0.0:
        norm_obj = 1.0 if r_hat == 0.0 else math.inf
    else:
        norm_obj = r_hat / r_ref
    nrm0 = float(np.abs(x0).sum())
    diff = float(np.abs(x_hat - x0).sum())
    if nrm0 == 0.0:
        rec_err = 0.0 if diff == 0.0 else math.inf
    else:
        rec_err = diff / nrm0
    supp_hat = set(np.flatnonzero(x_hat))
    supp0 = set(np.flatnonzero(x0))
    supp_prec = len(supp_hat & supp0) / p.k
    return Metrics(
        norm_obj=norm_obj,
        rec_err=rec_err,
        supp_prec=supp_prec,
        opt_success=norm_obj <= 1.0,
        rec_success=rec_err <= max(2.0 * nu, 1e-3),
    )
