import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from lbsreg import distribution as dist
from lbsreg.distribution import LbsParams
from lbsreg.errors import DomainError

from conftest import lbs_cdf_oracle, lbs_pdf_oracle, lbs_sf_oracle

ALPHAS = [0.25, 0.5, 1.0, 2.0, 2.5, 4.0]
THETAS = [0.5, 1.0, 10.0]

pos = st.floats(min_value=0.05, max_value=5.0)
scale = st.floats(min_value=0.1, max_value=20.0)


class TestParams:
    @pytest.mark.parametrize("alpha,theta", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (math.nan, 1.0), (1.0, math.inf)])
    def test_rejects_invalid(self, alpha, theta):
        with pytest.raises(DomainError):
            LbsParams(alpha, theta)

    def test_nonpositive_t(self):
        p = LbsParams(1.0, 1.0)
        for fn in (dist.pdf, dist.survival, dist.cdf, dist.hazard):
            with pytest.raises(DomainError):
                fn(p, 0.0)


class TestDensity:
    def test_value_at_theta(self):
        assert dist.pdf(LbsParams(1, 1), 1.0) == pytest.approx(2 / (3 * math.sqrt(2 * math.pi)), rel=1e-14)

    def test_matches_length_biased_oracle(self, rng):
        for _ in range(200):
            a, th = rng.uniform(0.1, 4), rng.uniform(0.2, 10)
            t = th * math.exp(rng.normal(0, 1))
            assert dist.pdf(LbsParams(a, th), t) == pytest.approx(lbs_pdf_oracle(a, th, t), rel=1e-10)

    def test_log_pdf_at_theta(self):
        # log(2 / (3 sqrt(2 pi)))
        assert dist.log_pdf(LbsParams(1, 1), 1.0) == pytest.approx(-1.3244036, abs=1e-7)

    def test_exp_log_pdf(self, rng):
        a = rng.uniform(0.1, 5, 1000)
        th = rng.uniform(0.1, 10, 1000)
        t = th * np.exp(rng.normal(0, 1, 1000))
        p = LbsParams(a, th)
        np.testing.assert_allclose(np.exp(dist.log_pdf(p, t)), dist.pdf(p, t), rtol=1e-12)

    def test_far_tail_finite(self):
        v = dist.log_pdf(LbsParams(1, 1), 1e6)
        assert math.isfinite(v)
        assert v == pytest.approx(-0.5 * 1e6, rel=1e-4)

    def test_zero_limit(self):
        assert dist.pdf(LbsParams(0.5, 2.0), 1e-8) < 1e-300

    @given(a=pos, th=scale, t=st.floats(0.01, 50.0))
    def test_scaling(self, a, th, t):
        c = 3.7
        lhs = dist.pdf(LbsParams(a, th), t)
        rhs = c * dist.pdf(LbsParams(a, c * th), c * t)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("alpha", ALPHAS)
    @pytest.mark.parametrize("theta", THETAS)
    def test_normalization(self, alpha, theta):
        p = LbsParams(alpha, theta)
        f = lambda t: dist.pdf(p, t)
        pieces = [0.0, theta / 10, theta, 10 * theta, np.inf]
        total = sum(integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
                    for lo, hi in zip(pieces[:-1], pieces[1:]))
        assert abs(total - 1.0) < 1e-8


class TestSurvival:
    def test_limits(self):
        p = LbsParams(1.3, 2.0)
        assert dist.survival(p, 1e-9) == pytest.approx(1.0, abs=1e-15)
        assert dist.survival(p, 1e6) == 0.0

    @pytest.mark.parametrize("t", [1.0, 3.0])
    def test_quadrature(self, t):
        p = LbsParams(1, 1)
        assert dist.survival(p, t) == pytest.approx(lbs_sf_oracle(1, 1, t), abs=1e-8)
        assert dist.cdf(p, t) == pytest.approx(lbs_cdf_oracle(1, 1, t), abs=1e-8)

    def test_complement(self, rng):
        a = rng.uniform(0.1, 5, 1000)
        th = rng.uniform(0.1, 10, 1000)
        t = th * np.exp(rng.normal(0, 1.5, 1000))
        p = LbsParams(a, th)
        np.testing.assert_allclose(dist.cdf(p, t) + dist.survival(p, t), 1.0, atol=1e-14)

    def test_cdf_scaling(self, rng):
        for _ in range(50):
            a, th, t, c = rng.uniform(0.2, 3), rng.uniform(0.5, 5), rng.uniform(0.1, 20), rng.uniform(0.1, 10)
            assert dist.cdf(LbsParams(a, c * th), c * t) == pytest.approx(dist.cdf(LbsParams(a, th), t), abs=1e-13)

    def test_derivative_is_pdf(self):
        for a in (0.5, 1.0, 3.0):
            p = LbsParams(a, 2.0)
            for t in np.geomspace(0.3, 12, 15):
                h = 1e-5 * t
                fd = (dist.cdf(p, t + h) - dist.cdf(p, t - h)) / (2 * h)
                assert fd == pytest.approx(dist.pdf(p, t), rel=1e-6)

    def test_right_tail_positive(self):
        # survival beyond the point where 1 - cdf would cancel
        p = LbsParams(0.5, 1.0)
        s = dist.survival(p, 30.0)
        assert 0 < s < 1e-20
        assert s == pytest.approx(lbs_sf_oracle(0.5, 1.0, 30.0), rel=1e-7)

    def test_left_tail_cdf_relative(self):
        p = LbsParams(0.3, 1.0)
        t = 0.2
        assert dist.cdf(p, t) == pytest.approx(lbs_cdf_oracle(0.3, 1.0, t), rel=1e-7)


class TestHazard:
    def test_identity(self, rng):
        a = rng.uniform(0.1, 5, 1000)
        th = rng.uniform(0.1, 10, 1000)
        t = th * np.exp(rng.normal(0, 1, 1000))
        p = LbsParams(a, th)
        np.testing.assert_allclose(dist.hazard(p, t) * dist.survival(p, t), dist.pdf(p, t), rtol=1e-10)

    def test_value_at_one(self):
        expected = lbs_pdf_oracle(1, 1, 1.0) / lbs_sf_oracle(1, 1, 1.0)
        assert dist.hazard(LbsParams(1, 1), 1.0) == pytest.approx(expected, rel=1e-9)

    def test_increasing_below_theta(self):
        h = dist.hazard(LbsParams(1, 1), np.linspace(0.01, 0.99, 200))
        assert np.all(np.diff(h) > 0)

    def test_long_run_level(self):
        # tends to 1/(2 alpha^2 theta) from below
        for a, th in [(1.0, 1.0), (0.5, 2.0)]:
            lim = 1 / (2 * a * a * th)
            h = dist.hazard(LbsParams(a, th), np.array([50, 500, 5000.0]) * th)
            assert np.all(h < lim)
            assert h[-1] == pytest.approx(lim, rel=1e-2)


class TestQuantile:
    def test_round_trip(self, rng):
        for _ in range(100):
            a, th = rng.uniform(0.1, 4), rng.uniform(0.2, 10)
            t = th * math.exp(rng.normal(0, 1))
            p = LbsParams(a, th)
            u = dist.cdf(p, t)
            # u near 1 carries few digits of the survival probability
            if 1e-8 < u < 1 - 1e-8:
                assert dist.quantile(p, u) == pytest.approx(t, rel=1e-8)

    def test_scaling(self):
        u = np.array([0.01, 0.3, 0.5, 0.9, 0.999])
        np.testing.assert_allclose(dist.quantile(LbsParams(1.5, 7.0), u),
                                   7.0 * dist.quantile(LbsParams(1.5, 1.0), u), rtol=1e-9)

    def test_median_by_bisection(self):
        oracle = optimize.brentq(lambda t: lbs_cdf_oracle(1, 1, t) - 0.5, 0.5, 10, xtol=1e-13)
        assert dist.quantile(LbsParams(1, 1), 0.5) == pytest.approx(oracle, rel=1e-9)

    def test_residual(self):
        p = LbsParams(2.5, 3.0)
        u = np.array([1e-6, 0.2, 0.7, 1 - 1e-6])
        assert np.all(np.abs(dist.cdf(p, dist.quantile(p, u)) - u) < 1e-10)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, u):
        with pytest.raises(DomainError):
            dist.quantile(LbsParams(1, 1), u)


class TestSampler:
    def test_empty(self, rng):
        assert dist.sample(LbsParams(1, 1), 0, rng).shape == (0,)

    def test_deterministic(self):
        p = LbsParams(1.2, 3.0)
        a = dist.sample(p, 50, np.random.default_rng(9))
        b = dist.sample(p, 50, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_mean(self, rng):
        x = dist.sample(LbsParams(1, 1), 100_000, rng)
        se = math.sqrt(51 / 9 / x.size)
        assert abs(x.mean() - 3.0) < 3 * se

    def test_u_transform_law(self, rng):
        a, th = 1.0, 1.0
        x = dist.sample(LbsParams(a, th), 100_000, rng)
        u = (x / th + th / x - 2) / a**2
        mix = dist.mixture_for(LbsParams(a, th))
        assert stats.kstest(u, mix.cdf).pvalue > 0.01

    def test_matches_inversion(self, rng):
        p = LbsParams(1.0, 2.0)
        x = dist.sample(p, 10_000, rng)
        y = dist.sample_by_inversion(p, 10_000, rng)
        assert stats.ks_2samp(x, y).pvalue > 0.01

    def test_heterogeneous_params(self, rng):
        p = LbsParams(np.array([0.5, 1.0, 2.0]), np.array([1.0, 10.0, 100.0]))
        assert dist.sample(p, rng=rng).shape == (3,)
        with pytest.raises(DomainError):
            dist.sample(p, 4, rng)


class TestMoments:
    def test_closed_forms(self):
        p = LbsParams(1, 1)
        assert dist.mean(p) == 3.0
        assert dist.variance(p) == pytest.approx(51 / 9, rel=1e-15)

    @pytest.mark.parametrize("a,th", [(0.3, 1.0), (1.0, 2.0), (2.5, 0.7)])
    def test_against_quadrature(self, a, th):
        p = LbsParams(a, th)
        f = lambda t, k: t**k * lbs_pdf_oracle(a, th, t)
        m1 = integrate.quad(f, 0, np.inf, args=(1,), epsrel=1e-12, limit=400)[0]
        m2 = integrate.quad(f, 0, np.inf, args=(2,), epsrel=1e-12, limit=400)[0]
        assert dist.mean(p) == pytest.approx(m1, rel=1e-9)
        assert dist.variance(p) == pytest.approx(m2 - m1**2, rel=1e-8)

    def test_mean_monte_carlo(self, rng):
        p = LbsParams(0.8, 1.5)
        x = dist.sample(p, 1_000_000, rng)
        assert abs(x.mean() - dist.mean(p)) < 3 * math.sqrt(dist.variance(p) / x.size)

    @pytest.mark.parametrize("r", [0, 1, 2, 3])
    def test_negative_moments(self, r):
        a, th = 0.7, 2.0
        f = lambda t: t ** -(r + 1) * lbs_pdf_oracle(a, th, t)
        oracle = integrate.quad(f, 0, np.inf, epsrel=1e-12, limit=400)[0]
        assert dist.neg_moment(LbsParams(a, th), r) == pytest.approx(oracle, rel=1e-8)

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_bs_moments(self, r):
        base = stats.fatiguelife(0.9, scale=1.7)
        assert dist.bs_moment(LbsParams(0.9, 1.7), r) == pytest.approx(base.moment(r), rel=1e-8)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            dist.bs_moment(LbsParams(1, 1), -1)


@settings(max_examples=60, deadline=None)
@given(a=pos, th=scale, t=st.floats(0.01, 100.0))
def test_cdf_in_unit_interval_and_monotone(a, th, t):
    p = LbsParams(a, th)
    c1, c2 = dist.cdf(p, t), dist.cdf(p, t * 1.01)
    assert 0.0 <= c1 <= c2 <= 1.0
