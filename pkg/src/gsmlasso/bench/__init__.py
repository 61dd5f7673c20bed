"""Benchmark harness: data generation, metrics, experiment runners, CLI."""

from .data import gen_matrix, gen_noise, gen_signal, substream
from .metrics import Metrics, evaluate
from .runner import (
    METHODS,
    PAPER_GAMMA_GRID,
    ExperimentSpec,
    ResultRow,
    postprocess_candidates,
    run_kernel_accuracy,
    run_kernel_timing,
    run_recovery,
)

__all__ = [
    "METHODS",
    "Metrics",
    "PAPER_GAMMA_GRID",
    "ExperimentSpec",
    "ResultRow",
    "evaluate",
    "gen_matrix",
    "gen_noise",
    "gen_signal",
    "postprocess_candidates",
    "run_kernel_accuracy",
    "run_kernel_timing",
    "run_recovery",
    "substream",
]
