"""Cross-checks between the three reference oracles and the stable kernel."""

import math

import numpy as np
import pytest

from gsmlasso import (
    NumericError,
    BudgetError,
    brute_force_mu_theta,
    highprec_mu_theta,
    mu_theta,
    naive_recursion_mu_theta,
)


class TestBruteForce:
    def test_definition_example(self):
        mu, _ = brute_force_mu_theta([1.0, 2.0, 3.0], 2, 1.0)
        assert mu == pytest.approx(
            math.log((math.exp(3) + math.exp(4) + math.exp(5)) / 3), abs=1e-13
        )

    def test_gamma_zero(self, rng):
        z = rng.normal(size=9)
        mu, th = brute_force_mu_theta(z, 4, 0.0)
        assert mu == pytest.approx((4 / 9) * z.sum(), rel=1e-14)
        np.testing.assert_allclose(th, 4 / 9)

    def test_theta_sums_to_k(self, rng):
        for _ in range(20):
            d = int(rng.integers(2, 12))
            k = int(rng.integers(0, d + 1))
            z = rng.normal(size=d)
            _, th = brute_force_mu_theta(z, k, 1.3)
            assert th.sum() == pytest.approx(k, abs=1e-11)

    def test_budget_guard(self):
        with pytest.raises(BudgetError):
            brute_force_mu_theta(np.zeros(40), 20, 1.0)


class TestNaiveRecursion:
    def test_mutual_agreement(self, rng):
        cases = [
            (np.array([1.0, 2.0, 3.0]), 2, 1.0),
            (rng.normal(size=10), 3, 0.8),
            (rng.uniform(0, 1, 8), 4, 2.0),
        ]
        for z, k, gamma in cases:
            mu_n, th_n = naive_recursion_mu_theta(z, k, gamma)
            mu_b, th_b = brute_force_mu_theta(z, k, gamma)
            res = mu_theta(z, min(k, z.size // 2), gamma) if k <= z.size // 2 else None
            assert mu_n == pytest.approx(mu_b, abs=1e-10)
            np.testing.assert_allclose(th_n, th_b, atol=1e-10)
            if res is not None:
                assert mu_n == pytest.approx(res.mu, abs=1e-10)
                np.testing.assert_allclose(th_n, res.theta, atol=1e-10)

    def test_overflow_guard(self):
        z = np.array([500.0, 400.0, -300.0, 200.0])
        with pytest.raises(NumericError):
            naive_recursion_mu_theta(z, 2, 10.0)


class TestHighPrecision:
    def test_agrees_with_brute_small(self, rng):
        for _ in range(30):
            d = int(rng.integers(2, 19))
            k = int(rng.integers(1, d // 2 + 1))
            gamma = float(rng.choice([0.3, 2.0, 30.0]))
            z = rng.normal(size=d)
            mu_h, th_h = highprec_mu_theta(z, k, gamma)
            mu_b, th_b = brute_force_mu_theta(z, k, gamma)
            assert abs(mu_h - mu_b) <= 1e-14 * max(1.0, abs(mu_b))
            np.testing.assert_allclose(th_h, th_b, atol=5e-13)

    def test_constant_vector_exact(self):
        mu, th = highprec_mu_theta(np.full(12, 1.75), 4, 3.0)
        assert mu == 4 * 1.75
        np.testing.assert_allclose(th, 4 / 12, atol=1e-16)

    def test_complement_identity_residual(self, rng):
        # outputs are float64, so the floor is a few ulps of the magnitudes
        # entering the cancellation (the extended internals contribute ~1e-19)
        for _ in range(30):
            d = int(rng.integers(4, 30))
            k = int(rng.integers(1, d))
            z = rng.normal(size=d)
            mu1, _ = highprec_mu_theta(z, k, 2.2)
            mu2, _ = highprec_mu_theta(z, d - k, -2.2)
            total = float(z.sum())
            scale = 1.0 + abs(total) + abs(mu1) + abs(mu2)
            assert abs(mu1 + mu2 - total) <= 4e-16 * scale

    def test_matches_mpmath_brute_force(self, rng):
        # certify the extended-precision path itself on a tiny instance
        import mpmath

        mpmath.mp.dps = 50
        d, k, gamma = 9, 3, 7.5
        z = rng.normal(size=d)
        from itertools import combinations

        terms = [
            mpmath.e ** (gamma * mpmath.mpf(float(z[list(S)].sum())))
            for S in combinations(range(d), k)
        ]
        mu_ref = float(mpmath.log(mpmath.fsum(terms) / len(terms)) / gamma)
        den = mpmath.fsum(terms)
        th_ref = np.empty(d)
        for i in range(d):
            num = mpmath.fsum(
                t
                for t, S in zip(terms, combinations(range(d), k))
                if i in S
            )
            th_ref[i] = float(num / den)
        mu_h, th_h = highprec_mu_theta(z, k, gamma)
        assert mu_h == pytest.approx(mu_ref, rel=5e-16, abs=5e-16)
        np.testing.assert_allclose(th_h, th_ref, atol=5e-15)

    def test_better_than_double_at_scale(self, rng):
        # the reference must sit well below the double path's error floor
        z = rng.uniform(0.0, 1.0, 600)
        res = mu_theta(z, 60, 8.0)
        mu_h, th_h = highprec_mu_theta(z, 60, 8.0)
        assert abs(res.mu - mu_h) / abs(mu_h) < 1e-13
        assert np.max(np.abs(res.theta - th_h)) < 1e-12
