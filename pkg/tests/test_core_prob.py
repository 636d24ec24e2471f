import math

import mpmath
import numpy as np
import pytest

from noisyperm.core_prob import (
    Distribution,
    binomial_tail,
    kl_divergence,
    llr_moments,
    std_normal_cdf,
    std_normal_quantile,
    total_variation,
)
from noisyperm.errors import DomainError, InputValidationError, SupportError

mpmath.mp.dps = 50


def mp_kl(p, q):
    return float(mpmath.fsum(mpmath.mpf(a) * mpmath.log(mpmath.mpf(a) / mpmath.mpf(b), 2)
                             for a, b in zip(p, q) if a > 0))


def mp_binomial_tail(n, lo, hi, p):
    p = mpmath.mpf(p)
    return float(mpmath.fsum(mpmath.binomial(n, t) * p ** t * (1 - p) ** (n - t) for t in range(lo, hi + 1)))


class TestDistribution:

    def test_renormalizes_within_tolerance(self):
        d = Distribution([0.5, 0.5 + 1e-10])
        assert math.isclose(math.fsum(d.probs), 1.0, abs_tol=1e-12)

    def test_rejects_bad_sum(self):
        with pytest.raises(InputValidationError):
            Distribution([0.5, 0.6])

    def test_rejects_negative_and_short(self):
        with pytest.raises(InputValidationError):
            Distribution([1.2, -0.2])
        with pytest.raises(InputValidationError):
            Distribution([1.0])

    def test_is_read_only(self):
        d = Distribution([0.3, 0.7])
        with pytest.raises(ValueError):
            d.probs[0] = 0.5


class TestKLDivergence:

    def test_identical_is_zero(self):
        assert kl_divergence((0.5, 0.5), (0.5, 0.5)) == 0.0

    def test_binary_value(self):
        assert kl_divergence((0.5, 0.5), (0.25, 0.75)) == pytest.approx(0.2075187496394219, rel=1e-12)

    def test_zero_probability_term_drops(self):
        assert kl_divergence((1, 0), (0.5, 0.5)) == pytest.approx(1.0, abs=1e-15)

    def test_support_violation(self):
        with pytest.raises(SupportError):
            kl_divergence((0.5, 0.5), (1.0, 0.0))

    def test_length_mismatch(self):
        with pytest.raises(InputValidationError):
            kl_divergence((0.5, 0.5), (0.2, 0.3, 0.5))

    def test_matches_high_precision(self, rng):
        for _ in range(50):
            p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
            assert kl_divergence(p, q) == pytest.approx(mp_kl(p, q), rel=1e-10, abs=1e-14)


class TestTotalVariation:

    @pytest.mark.parametrize("p, q, expected", [
        ((0.3, 0.7), (0.3, 0.7), 0.0),
        ((1, 0), (0, 1), 1.0),
        ((0.5, 0.5), (0.25, 0.75), 0.25),
    ])
    def test_values(self, p, q, expected):
        assert total_variation(p, q) == pytest.approx(expected, abs=1e-15)

    def test_pinsker(self, rng):
        for _ in range(100):
            p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
            assert kl_divergence(p, q) >= 2 * math.log2(math.e) * total_variation(p, q) ** 2 - 1e-12


class TestLLRMoments:

    def test_identical_is_zero(self):
        m = llr_moments((0.5, 0.5), (0.5, 0.5))
        assert (m.mean, m.variance, m.third_abs) == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize("p, q", [
        ((0.5, 0.5), (0.25, 0.75)),
        ((0.89, 0.11), (0.695, 0.305)),
    ])
    def test_against_direct_summation(self, p, q):
        llr = [mpmath.log(mpmath.mpf(a) / mpmath.mpf(b), 2) for a, b in zip(p, q)]
        mean = mpmath.fsum(a * v for a, v in zip(p, llr))
        var = mpmath.fsum(a * (v - mean) ** 2 for a, v in zip(p, llr))
        third = mpmath.fsum(a * abs(v - mean) ** 3 for a, v in zip(p, llr))
        m = llr_moments(p, q)
        np.testing.assert_allclose([m.mean, m.variance, m.third_abs],
                                   [float(mean), float(var), float(third)], rtol=1e-12)

    def test_mean_is_kl(self, rng):
        p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        assert llr_moments(p, q).mean == pytest.approx(kl_divergence(p, q), rel=1e-12)


class TestNormal:

    def test_cdf_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(1.0) == pytest.approx(0.8413447460685429, rel=1e-14)
        assert std_normal_cdf(-3.2905267314918945) == pytest.approx(5.0e-4, rel=1e-9)

    def test_cdf_deep_tail_against_mpmath(self):
        for x in (-5.0, -10.0, -20.0, -30.0):
            assert std_normal_cdf(x) == pytest.approx(float(mpmath.ncdf(x)), rel=1e-12)

    def test_quantile_values(self):
        assert std_normal_quantile(0.5) == pytest.approx(0.0, abs=1e-15)
        assert std_normal_quantile(5e-4) == pytest.approx(-3.2905267314918945, rel=1e-12)
        assert std_normal_quantile(0.9986501) == pytest.approx(2.9999998, abs=1e-6)

    def test_round_trip(self):
        for u in np.logspace(-15, math.log10(0.5), 40):
            assert std_normal_cdf(std_normal_quantile(u)) == pytest.approx(u, rel=1e-12)

    def test_quantile_inverts_cdf(self):
        for x in np.linspace(-8.0, 5.0, 131):
            assert abs(std_normal_quantile(std_normal_cdf(x)) - x) <= 1e-9
        # past 5 the upper tail only resolves through its mirror
        for x in np.linspace(5.1, 8.0, 30):
            assert abs(-std_normal_quantile(std_normal_cdf(-x)) - x) <= 1e-9

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_quantile_domain(self, u):
        with pytest.raises(DomainError):
            std_normal_quantile(u)


class TestBinomialTail:

    def test_full_support(self):
        assert binomial_tail(10, 0, 10, 0.3) == 1.0

    def test_single_term(self):
        assert binomial_tail(2, 0, 0, 0.11) == pytest.approx(0.89 ** 2, rel=1e-14)

    def test_empty_and_clamped_ranges(self):
        assert binomial_tail(10, 7, 3, 0.3) == 0.0
        assert binomial_tail(10, -5, 3, 0.3) == pytest.approx(binomial_tail(10, 0, 3, 0.3), rel=1e-15)
        assert binomial_tail(10, 11, 20, 0.3) == 0.0

    def test_against_exact_summation(self):
        assert binomial_tail(100, 0, 27, 0.11) == pytest.approx(mp_binomial_tail(100, 0, 27, 0.11), rel=1e-12)
        assert binomial_tail(100, 28, 100, 0.11) == pytest.approx(mp_binomial_tail(100, 28, 100, 0.11), rel=1e-12)

    def test_deep_tail_relative_accuracy(self):
        exact = mp_binomial_tail(1000, 400, 1000, 0.11)
        assert exact > 0
        assert binomial_tail(1000, 400, 1000, 0.11) == pytest.approx(exact, rel=1e-10)

    def test_degenerate_p(self):
        assert binomial_tail(5, 0, 0, 0.0) == 1.0
        assert binomial_tail(5, 1, 5, 0.0) == 0.0
