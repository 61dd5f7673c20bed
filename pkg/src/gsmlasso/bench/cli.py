"""Command-line interface.

Exit codes: 0 on success, 2 on configuration/usage errors, 3 on numeric
failure.  Every subcommand accepts ``--print-config`` to show its resolved
defaults and exit.
"""

from __future__ import annotations

import dataclasses
import math
import sys

import click
import numpy as np

from ..errors import ConfigError, NumericError
from ..kernel import mu_theta_full
from ..oracles import brute_force_mu_theta, highprec_mu_theta
from ..optimizer import (
    HomotopyConfig,
    homotopy_solve,
    lambda_grid_power1,
    lambda_grid_power2,
    solve_p0,
)
from ..problem import ProblemInstance, thresholds
from . import io as bio
from .runner import (
    PAPER_GAMMA_GRID,
    ExperimentSpec,
    run_kernel_accuracy,
    run_kernel_timing,
    run_recovery,
)


def _echo_config(pairs):
    for key, value in pairs:
        click.echo(f"{key} = {value}")


def _parse_gamma(text):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(t)
    except ValueError as exc:
        raise click.UsageError(f"invalid gamma {text!r}") from exc


@click.group()
def cli():
    """Sparse approximation via the trimmed lasso and its soft surrogate."""


@cli.group()
def kernel():
    """Soft top-k kernel utilities."""


@kernel.command("eval")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), help="vector file (CSV or GSMB)")
@click.option("--k", "k", type=int, help="subset order")
@click.option("--gamma", "gamma", default="inf", show_default=True, help="softness (number, inf or -inf)")
@click.option("--brute", is_flag=True, help="use the enumeration oracle")
@click.option("--highprec", "highprec", is_flag=True, help="use the extended-precision oracle")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="write theta here (CSV, one value per line)")
@click.option("--print-config", is_flag=True, help="print resolved defaults and exit")
def kernel_eval(input_path, k, gamma, brute, highprec, out_path, print_config):
    """Evaluate mu and theta for a vector z."""
    if print_config:
        _echo_config(
            [("gamma", "inf"), ("brute", False), ("highprec", False), ("out", "")]
        )
        return
    if input_path is None or k is None:
        raise click.UsageError("--input and --k are required")
    if brute and highprec:
        raise click.UsageError("--brute and --highprec are mutually exclusive")
    z = bio.as_vector_file(input_path)
    g = _parse_gamma(gamma)
    if brute:
        mu, theta = brute_force_mu_theta(z, k, g)
    elif highprec:
        mu, theta = highprec_mu_theta(z, k, g)
    else:
        res = mu_theta_full(z, k, g)
        mu, theta = res.mu, res.theta
    click.echo(bio.format_float(mu))
    if out_path:
        bio.save_array_csv(out_path, theta.reshape(-1, 1))


@cli.command()
@click.option("--matrix", "matrix_path", type=click.Path(exists=True, dir_okay=False), help="matrix A (CSV or GSMB)")
@click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False), help="observation vector")
@click.option("--k", "k", type=int, help="target sparsity")
@click.option("--power", type=click.Choice(["1", "2"]), default="2", show_default=True)
@click.option("--lambda", "lam", type=float, default=None, help="single penalty value (skips the sweep)")
@click.option("--lambda-grid", "lambda_points", type=int, default=50, show_default=True, help="number of sweep points")
@click.option("--seed", type=int, default=12345, show_default=True, help="seed of the spectral-norm power method")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="solution CSV (columns i,x,x_sparse)")
@click.option("--print-config", is_flag=True, help="print resolved defaults and exit")
def solve(matrix_path, y_path, k, power, lam, lambda_points, seed, out_path, print_config):
    """Solve the best-subset problem by the homotopy method."""
    if print_config:
        defaults = HomotopyConfig()
        pairs = [("power", 2), ("lambda", ""), ("lambda_grid", 50), ("seed", 12345)]
        pairs += [
            (f.name, getattr(defaults, f.name))
            for f in dataclasses.fields(HomotopyConfig)
            if f.name != "inner"
        ]
        _echo_config(pairs)
        return
    if matrix_path is None or y_path is None or k is None:
        raise click.UsageError("--matrix, --y and --k are required")
    A = bio.load_array(matrix_path)
    y = bio.as_vector_file(y_path)
    p = ProblemInstance(A, y, k, power_seed=seed)
    cfg = HomotopyConfig(power=int(power))
    if lam is not None:
        sol = homotopy_solve(p, lam, cfg)
    else:
        grid = (
            lambda_grid_power2(p, lambda_points)
            if cfg.power == 2
            else lambda_grid_power1(p, lambda_points)
        )
        sol = solve_p0(p, cfg, lambda_grid=grid)
    click.echo(f"lambda_used,{bio.format_float(sol.lambda_used)}")
    click.echo(f"objective,{bio.format_float(sol.objective)}")
    click.echo(f"residual_norm,{bio.format_float(sol.residual_norm)}")
    if out_path:
        bio.write_csv_rows(
            out_path,
            ("i", "x", "x_sparse"),
            [
                (i, float(sol.x[i]), float(sol.x_sparse[i]))
                for i in range(sol.x.size)
            ],
        )


@cli.command("thresholds")
@click.option("--matrix", "matrix_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", "k", type=int)
@click.option("--print-config", is_flag=True)
def thresholds_cmd(matrix_path, y_path, k, print_config):
    """Print the penalty thresholds lambda_bar, lambda_a, lambda_b."""
    if print_config:
        _echo_config([("matrix", ""), ("y", ""), ("k", "")])
        return
    if matrix_path is None or y_path is None or k is None:
        raise click.UsageError("--matrix, --y and --k are required")
    A = bio.load_array(matrix_path)
    y = bio.as_vector_file(y_path)
    th = thresholds(ProblemInstance(A, y, k))
    click.echo(f"lambda_bar,{bio.format_float(th.lambda_bar)}")
    click.echo(f"lambda_a,{bio.format_float(th.lambda_a)}")
    click.echo(f"lambda_b,{bio.format_float(th.lambda_b)}")


@cli.group()
def bench():
    """Benchmark suites (recovery experiments, kernel accuracy/timing)."""


@bench.command("recovery")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--full-scale", is_flag=True, help="restore full-scale trial counts and grids")
@click.option("--print-config", is_flag=True)
def bench_recovery(config_path, out_dir, workers, full_scale, print_config):
    """Run a recovery experiment from a key = value config file."""
    if print_config:
        spec = ExperimentSpec()
        _echo_config(
            [(f.name, getattr(spec, f.name)) for f in dataclasses.fields(spec)]
        )
        return
    if config_path is None or out_dir is None:
        raise click.UsageError("--config and --out are required")
    import os

    raw = bio.load_config(config_path)
    spec = ExperimentSpec.from_dict(raw)
    if full_scale:
        spec = dataclasses.replace(spec, full_scale=True)
    os.makedirs(out_dir, exist_ok=True)
    rows, summary = run_recovery(
        spec,
        out_results=os.path.join(out_dir, "results.csv"),
        out_summary=os.path.join(out_dir, "summary.csv"),
        workers=workers,
    )
    for row in summary:
        click.echo(
            f"k={row[0]} method={row[1]} opt={row[3]:.3f} rec={row[4]:.3f} prec={row[5]:.3f}"
        )


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise click.UsageError(f"invalid integer list {text!r}") from exc


@bench.command("kernel-accuracy")
@click.option("--dims", default="1000", show_default=True, help="comma-separated dimensions")
@click.option("--ks", default="10,100,500", show_default=True, help="comma-separated orders")
@click.option("--gammas", default="paper", show_default=True, help="'paper' or a comma-separated list")
@click.option("--dists", default="uniform,absnormal", show_default=True)
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=False)
@click.option("--print-config", is_flag=True)
def bench_kernel_accuracy(dims, ks, gammas, dists, trials, seed, out_path, print_config):
    """Kernel accuracy versus the extended-precision reference."""
    if print_config:
        _echo_config(
            [
                ("dims", "1000"),
                ("ks", "10,100,500"),
                ("gammas", "paper"),
                ("dists", "uniform,absnormal"),
                ("trials", 20),
                ("seed", 0),
            ]
        )
        return
    gamma_vals = (
        PAPER_GAMMA_GRID
        if gammas.strip() == "paper"
        else tuple(_parse_gamma(g) for g in gammas.split(","))
    )
    rows = run_kernel_accuracy(
        dims=_int_list(dims),
        ks=_int_list(ks),
        gammas=gamma_vals,
        dists=tuple(s.strip() for s in dists.split(",") if s.strip()),
        trials=trials,
        seed=seed,
        out=out_path,
    )
    worst_mu = max(r[5] for r in rows)
    worst_th = max(r[6] for r in rows)
    click.echo(f"max_mu_rel_err,{bio.format_float(worst_mu)}")
    click.echo(f"max_theta_err,{bio.format_float(worst_th)}")


@bench.command("kernel-timing")
@click.option("--dims", default="1000,10000,100000", show_default=True)
@click.option("--ks", default="10,100", show_default=True)
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=False)
@click.option("--print-config", is_flag=True)
def bench_kernel_timing(dims, ks, trials, seed, out_path, print_config):
    """Kernel wall-time growth across problem sizes."""
    if print_config:
        _echo_config(
            [("dims", "1000,10000,100000"), ("ks", "10,100"), ("trials", 5), ("seed", 0)]
        )
        return
    rows = run_kernel_timing(
        dims=_int_list(dims), ks=_int_list(ks), trials=trials, seed=seed, out=out_path
    )
    for d, k, t, sec in rows:
        click.echo(f"d={d} k={k} mean_seconds={sec:.6f}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(1)
    except (NumericError, FloatingPointError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(3)
    except (ConfigError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
