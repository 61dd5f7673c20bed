"""Benchmark harness tests: generators, metrics, file formats, runner, CLI."""

import math
import os
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from gsmlasso import ProblemInstance
from gsmlasso.bench import (
    ExperimentSpec,
    evaluate,
    gen_matrix,
    gen_noise,
    gen_signal,
    run_kernel_accuracy,
    run_kernel_timing,
    run_recovery,
)
from gsmlasso.bench import io as bio
from gsmlasso.bench.cli import cli, main
from gsmlasso.errors import ConfigError


class TestGenMatrix:
    def test_unit_columns(self):
        A = gen_matrix("correlated", 40, 25, 0.8, seed=3)
        np.testing.assert_allclose(np.linalg.norm(A, axis=0), 1.0, atol=1e-12)

    def test_rho_zero_iid(self):
        A = gen_matrix("correlated", 2000, 5, 0.0, seed=5, normalize=False)
        C = (A.T @ A) / 2000
        off = C - np.diag(np.diag(C))
        assert np.abs(off).max() <= 0.1

    def test_correlated_covariance(self):
        rho = 0.8
        A = gen_matrix("correlated", 20000, 4, rho, seed=7, normalize=False)
        C = (A.T @ A) / 20000
        expect = rho ** np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
        assert np.abs(C - expect).max() <= 0.05

    def test_seed_determinism(self):
        A1 = gen_matrix("uncorrelated", 30, 20, seed=11, trial=4)
        A2 = gen_matrix("uncorrelated", 30, 20, seed=11, trial=4)
        assert np.array_equal(A1, A2)
        A3 = gen_matrix("uncorrelated", 30, 20, seed=11, trial=5)
        assert not np.array_equal(A1, A3)

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            gen_matrix("diagonal", 5, 5)


class TestGenSignal:
    def test_pm1_values(self):
        x = gen_signal("equispaced_pm1", 50, 7, seed=2)
        nz = x[np.flatnonzero(x)]
        assert np.all(np.isin(nz, [-1.0, 1.0])) and nz.size == 7

    def test_linear_magnitudes(self):
        x = gen_signal("equispaced_linear", 60, 2, seed=2)
        mags = np.abs(x[np.flatnonzero(x)])
        assert set(mags) == {1.0, 30.0}
        x5 = gen_signal("equispaced_linear", 60, 5, seed=2)
        mags5 = sorted(np.abs(x5[np.flatnonzero(x5)]))
        np.testing.assert_allclose(mags5, 1.0 + 29.0 * np.arange(5) / 4)

    def test_equispaced_gaps(self):
        x = gen_signal("equispaced_pm1", 100, 7, seed=1)
        gaps = np.diff(np.flatnonzero(x))
        assert set(gaps) <= {100 // 7, 100 // 7 + 1}

    def test_gaussian_support_size(self):
        x = gen_signal("gaussian", 40, 9, seed=6)
        assert np.count_nonzero(x) == 9


class TestGenNoise:
    def test_zero_nu(self):
        A = gen_matrix("uncorrelated", 10, 20, seed=0)
        assert np.all(gen_noise(A, "gaussian", 3, 0.0, seed=0) == 0.0)

    def test_energy_calibration(self):
        # with nu = 1, noise energy matches signal energy within 10%
        A = gen_matrix("uncorrelated", 50, 80, seed=4)
        e_noise = np.mean(
            [
                np.linalg.norm(gen_noise(A, "gaussian", 5, 1.0, seed=4, trial=t)) ** 2
                for t in range(200)
            ]
        )
        e_sig = np.mean(
            [
                np.linalg.norm(A @ gen_signal("gaussian", 80, 5, seed=99, trial=t)) ** 2
                for t in range(200)
            ]
        )
        assert abs(e_noise - e_sig) <= 0.1 * e_sig

    def test_determinism(self):
        A = gen_matrix("uncorrelated", 10, 20, seed=0)
        e1 = gen_noise(A, "gaussian", 3, 0.3, seed=8, trial=2)
        e2 = gen_noise(A, "gaussian", 3, 0.3, seed=8, trial=2)
        assert np.array_equal(e1, e2)


class TestEvaluate:
    def _instance(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(12, 30))
        A /= np.linalg.norm(A, axis=0)
        x0 = np.zeros(30)
        x0[[2, 9, 20]] = [1.0, -2.0, 0.5]
        y = A @ x0 + 0.01 * rng.normal(size=12)
        return ProblemInstance(A, y, 3), x0

    def test_exact_estimate(self):
        p, x0 = self._instance()
        m = evaluate(p, x0, x0, 0.01)
        assert m.supp_prec == 1.0 and m.rec_err == 0.0
        assert m.opt_success and m.rec_success

    def test_zero_estimate(self):
        p, x0 = self._instance()
        m = evaluate(p, np.zeros(30), x0, 0.01)
        assert m.supp_prec == 0.0 and m.rec_err == 1.0

    def test_support_precision_count(self):
        p, x0 = self._instance()
        x_hat = np.zeros(30)
        x_hat[[2, 9, 25]] = 1.0
        assert evaluate(p, x_hat, x0, 0.0).supp_prec == pytest.approx(2 / 3)

    def test_noiseless_norm_obj_guard(self):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(10, 20))
        x0 = np.zeros(20)
        x0[3] = 1.0
        p = ProblemInstance(A, A @ x0, 1)
        assert evaluate(p, x0, x0, 0.0).norm_obj == 1.0
        assert math.isinf(evaluate(p, np.zeros(20), x0, 0.0).norm_obj)


class TestIO:
    def test_csv_roundtrip(self, tmp_path):
        arr = np.random.default_rng(0).normal(size=(7, 4))
        path = tmp_path / "a.csv"
        bio.save_array_csv(path, arr)
        np.testing.assert_array_equal(bio.load_array(path), arr)

    def test_bin_roundtrip(self, tmp_path):
        arr = np.random.default_rng(0).normal(size=(1000, 3))
        path = tmp_path / "a.bin"
        bio.save_array_bin(path, arr)
        np.testing.assert_array_equal(bio.load_array(path), arr)

    def test_bin_rejects_truncation(self, tmp_path):
        path = tmp_path / "a.bin"
        bio.save_array_bin(path, np.ones((4, 4)))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ConfigError):
            bio.load_array_bin(path)

    def test_config_parsing(self):
        raw = bio.parse_config_text(
            "# comment\n n = 10 \nd=20\nmethods = gsm2, lsomp # trailing\n\n"
        )
        assert raw == {"n": "10", "d": "20", "methods": "gsm2, lsomp"}
        with pytest.raises(ConfigError):
            bio.parse_config_text("just a line without equals")


class TestExperimentSpec:
    def test_from_dict(self):
        spec = ExperimentSpec.from_dict(
            {"n": "30", "d": "60", "k": "4,6", "nu": "0.0", "trials": "2",
             "seed": "7", "methods": "gsm2,lsomp", "lambda_points": "6"}
        )
        assert spec.k == (4, 6) and spec.methods == ("gsm2", "lsomp")

    def test_rejects_unknown_method(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(methods=("nope",))

    def test_rejects_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentSpec.from_dict({"frobnicate": "1"})


class TestRunner:
    def _tiny_spec(self):
        return ExperimentSpec(
            matrix="uncorrelated",
            signal="gaussian",
            n=20,
            d=40,
            k=(3,),
            nu=1e-6,
            trials=2,
            seed=123,
            methods=("gsm2", "lsomp"),
            lambda_points=5,
        )

    def test_smoke_rows_and_summary(self, tmp_path):
        spec = self._tiny_spec()
        rows, summary = run_recovery(
            spec,
            out_results=str(tmp_path / "results.csv"),
            out_summary=str(tmp_path / "summary.csv"),
        )
        assert len(rows) == 2 * 2  # trials x methods
        header = (tmp_path / "results.csv").read_text().splitlines()[0]
        assert header.startswith("k,trial,method")
        # aggregate equals the mean of the flags
        sel = [r for r in rows if r.method == "gsm2"]
        agg = [s for s in summary if s[1] == "gsm2"][0]
        assert agg[4] == pytest.approx(np.mean([r.rec_success for r in sel]))

    def test_outputs_k_sparse(self):
        rows, _ = run_recovery(self._tiny_spec())
        assert all(r.supp_prec <= 1.0 for r in rows)

    def test_metric_determinism(self, tmp_path):
        spec = self._tiny_spec()
        run_recovery(spec, out_results=str(tmp_path / "r1.csv"))
        run_recovery(spec, out_results=str(tmp_path / "r2.csv"))
        strip = lambda text: [
            ",".join(line.split(",")[:-1]) for line in text.splitlines()
        ]
        assert strip((tmp_path / "r1.csv").read_text()) == strip(
            (tmp_path / "r2.csv").read_text()
        )

    def test_kernel_accuracy_smoke(self):
        rows = run_kernel_accuracy(dims=(64,), ks=(4,), gammas=(1e-5, 2.0, 1e5), trials=3)
        assert len(rows) == 3 * 2
        assert all(r[5] <= 1e-12 and r[6] <= 1e-11 for r in rows)

    def test_kernel_timing_smoke(self):
        rows = run_kernel_timing(dims=(500, 1000), ks=(10,), trials=2)
        assert len(rows) == 2 and all(r[3] > 0 for r in rows)


class TestCli:
    def test_print_config(self):
        out = CliRunner().invoke(cli, ["solve", "--print-config"])
        assert out.exit_code == 0 and "delta_gamma" in out.output

    def test_kernel_eval_matches_brute(self, tmp_path):
        z = np.random.default_rng(0).uniform(0, 1, 10)
        path = tmp_path / "z.csv"
        bio.save_array_csv(path, z.reshape(-1, 1))
        base = CliRunner().invoke(cli, ["kernel", "eval", "--input", str(path), "--k", "3", "--gamma", "2"])
        brute = CliRunner().invoke(
            cli, ["kernel", "eval", "--input", str(path), "--k", "3", "--gamma", "2", "--brute"]
        )
        assert base.exit_code == 0 and brute.exit_code == 0
        assert float(base.output) == pytest.approx(float(brute.output), abs=1e-10)

    def test_thresholds_and_solve(self, tmp_path):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(12, 25))
        A /= np.linalg.norm(A, axis=0)
        x0 = np.zeros(25)
        x0[[3, 8]] = [1.0, -2.0]
        bio.save_array_csv(tmp_path / "A.csv", A)
        bio.save_array_csv(tmp_path / "y.csv", (A @ x0).reshape(-1, 1))
        res = CliRunner().invoke(
            cli,
            ["thresholds", "--matrix", str(tmp_path / "A.csv"), "--y", str(tmp_path / "y.csv"), "--k", "2"],
        )
        assert res.exit_code == 0 and res.output.startswith("lambda_bar,")
        res = CliRunner().invoke(
            cli,
            [
                "solve",
                "--matrix", str(tmp_path / "A.csv"),
                "--y", str(tmp_path / "y.csv"),
                "--k", "2",
                "--lambda-grid", "5",
                "--out", str(tmp_path / "sol.csv"),
            ],
        )
        assert res.exit_code == 0
        lines = (tmp_path / "sol.csv").read_text().splitlines()
        assert lines[0] == "i,x,x_sparse" and len(lines) == 26

    def test_bench_recovery_cli(self, tmp_path):
        cfg = tmp_path / "spec.cfg"
        cfg.write_text(
            "matrix = uncorrelated\nsignal = gaussian\nn = 16\nd = 32\nk = 2\n"
            "nu = 0\ntrials = 1\nseed = 5\nmethods = lsomp\nlambda_points = 4\n"
        )
        res = CliRunner().invoke(
            cli, ["bench", "recovery", "--config", str(cfg), "--out", str(tmp_path / "out")]
        )
        assert res.exit_code == 0, res.output
        assert (tmp_path / "out" / "results.csv").exists()
        assert (tmp_path / "out" / "summary.csv").exists()

    def test_exit_codes(self, tmp_path):
        env = dict(os.environ, PYTHONPATH="src")
        proc = subprocess.run(
            [sys.executable, "-m", "gsmlasso.bench.cli", "thresholds", "--matrix",
             "missing.csv", "--y", "missing.csv", "--k", "1"],
            capture_output=True,
            cwd=os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
            env=env,
        )
        assert proc.returncode == 2

    def test_numeric_failure_exit_code(self, monkeypatch):
        from gsmlasso.bench import cli as cli_mod
        from gsmlasso.errors import NumericError

        def boom(*a, **kw):
            raise NumericError("synthetic")

        monkeypatch.setattr(cli_mod, "run_kernel_timing", boom)
        with pytest.raises(SystemExit) as exc:
            main(["bench", "kernel-timing", "--dims", "100", "--ks", "2"])
        assert exc.value.code == 3
