import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lbsreg import distribution as dist
from lbsreg.diagnostics import (
    ResidualKind,
    _residuals_from,
    envelope,
    envelopes,
    ljung_box,
    raw_residuals,
    reference_moments,
    residuals,
    sample_moments,
    theoretical_quantiles,
)
from lbsreg.errors import DomainError
from lbsreg.regression import RegressionSpec, fit
from lbsreg.simstudy import ScenarioConfig, simulate_dataset


def mixture_moments(alpha):
    """Mean, SD, skewness and kurtosis of the U law from raw gamma moments."""
    pi = 2 / (alpha**2 + 2)
    raw = [pi * stats.gamma(0.5, scale=2).moment(r) + (1 - pi) * stats.gamma(1.5, scale=2).moment(r)
           for r in range(1, 5)]
    m1, m2, m3, m4 = raw
    var = m2 - m1**2
    c3 = m3 - 3 * m1 * m2 + 2 * m1**3
    c4 = m4 - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4
    return m1, math.sqrt(var), c3 / var**1.5, c4 / var**2


@pytest.fixture(scope="module")
def fitted():
    spec = simulate_dataset(ScenarioConfig(n=70, seed=31), 0)
    return spec, fit(spec)


class TestResiduals:
    def test_at_theta(self):
        p = dist.LbsParams(np.array([0.7]), np.array([2.0]))
        assert _residuals_from(np.array([2.0]), p).u[0] == 0.0

    def test_median_case(self):
        p = dist.LbsParams(1.0, 1.0)
        med = dist.quantile(p, 0.5)
        r = _residuals_from(np.array([med]), p)
        assert r.gcs[0] == pytest.approx(math.log(2), rel=1e-9)
        assert r.rq[0] == pytest.approx(0.0, abs=1e-9)

    def test_clamp_warns(self):
        p = dist.LbsParams(0.2, 1.0)
        with pytest.warns(RuntimeWarning):
            r = _residuals_from(np.array([1e-3, 50.0]), p)
        assert np.isfinite(r.gcs).all() and np.isfinite(r.rq).all()

    def test_nonnegative_and_indexable(self, fitted):
        spec, res = fitted
        r = residuals(spec, res)
        assert (r.gcs >= 0).all() and (r.u >= 0).all()
        assert r["gcs"] is r.gcs and r[ResidualKind.RQ] is r.rq

    def test_true_model_laws(self, rng):
        a, th = 0.8, 2.0
        t = dist.sample(dist.LbsParams(a, th), 500, rng)
        r = _residuals_from(t, dist.LbsParams(a, th))
        assert stats.kstest(r.gcs, "expon").pvalue > 0.01
        assert stats.kstest(r.rq, "norm").pvalue > 0.01

    def test_u_moments_under_truth(self, rng):
        a = 1.3
        t = dist.sample(dist.LbsParams(a, 1.0), 20_000, rng)
        u = _residuals_from(t, dist.LbsParams(a, 1.0)).u
        ref = reference_moments("u", a)
        assert abs(u.mean() - ref.mean) < 4 * ref.sd / math.sqrt(u.size)
        assert u.std(ddof=1) == pytest.approx(ref.sd, rel=0.03)

    def test_raw_residuals(self, fitted):
        spec, res = fitted
        raw = raw_residuals(spec, res)
        mu = dist.mean(dist.LbsParams(np.exp(spec.W @ res.rho), np.exp(spec.X @ res.beta)))
        np.testing.assert_allclose(raw, spec.t - mu)


class TestReference:
    def test_fixed(self):
        assert reference_moments("gcs").as_tuple() == (1, 1, 2, 9)
        assert reference_moments("rq").as_tuple() == (0, 1, 0, 3)

    def test_u_at_one(self):
        r = reference_moments("u", 1.0)
        assert r.mean == pytest.approx(5 / 3)
        assert r.sd == pytest.approx(math.sqrt(38 / 9))

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0, 2.5, 5.0])
    def test_u_against_gamma_mixture(self, alpha):
        np.testing.assert_allclose(reference_moments("u", alpha).as_tuple(), mixture_moments(alpha), rtol=1e-12)

    def test_u_needs_alpha(self):
        with pytest.raises(DomainError):
            reference_moments("u")


class TestSampleMoments:
    def test_known(self):
        m = sample_moments([1.0, 2.0, 3.0, 4.0])
        assert m.mean == 2.5
        assert m.sd == pytest.approx(math.sqrt(5 / 3))
        assert m.cs == pytest.approx(0.0, abs=1e-15)
        assert m.ck == pytest.approx(1.64)

    @settings(max_examples=30)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=50))
    def test_matches_scipy(self, xs):
        x = np.array(xs)
        if np.ptp(x) < 1e-6:
            return
        m = sample_moments(x)
        assert m.cs == pytest.approx(stats.skew(x), rel=1e-6, abs=1e-9)
        assert m.ck == pytest.approx(stats.kurtosis(x, fisher=False), rel=1e-6)


class TestTheoretical:
    def test_gcs_rq(self):
        q = theoretical_quantiles("gcs", 4)
        np.testing.assert_allclose(q, stats.expon.ppf([0.125, 0.375, 0.625, 0.875]))
        np.testing.assert_allclose(theoretical_quantiles("rq", 4), stats.norm.ppf([0.125, 0.375, 0.625, 0.875]))

    def test_u(self):
        q = theoretical_quantiles("u", 10, np.full(10, 1.0))
        mix = dist.mixture_for(dist.LbsParams(1.0, 1.0))
        np.testing.assert_allclose(mix.cdf(q), (np.arange(1, 11) - 0.5) / 10, atol=1e-12)


class TestEnvelope:
    def test_degenerate_stream(self, fitted):
        spec, res = fitted
        band = envelope(spec, res, "gcs", M=5, rng_factory=lambda m: np.random.default_rng(0))
        np.testing.assert_allclose(band.lo, band.hi)
        np.testing.assert_allclose(band.lo, band.median)

    def test_ordering_and_determinism(self, fitted):
        spec, res = fitted
        a = envelopes(spec, res, ("gcs", "rq", "u"), M=30, seed=4)
        b = envelopes(spec, res, ("gcs", "rq", "u"), M=30, seed=4)
        for k in a:
            assert np.all(a[k].lo <= a[k].median) and np.all(a[k].median <= a[k].hi)
            assert np.array_equal(a[k].hi, b[k].hi)
            assert a[k].observed.size == spec.n

    def test_well_specified_coverage(self, fitted):
        spec, res = fitted
        band = envelope(spec, res, "gcs", M=100, seed=1)
        assert band.outside <= math.ceil(0.075 * spec.n)

    @pytest.mark.filterwarnings("ignore:.*clamped")
    def test_misspecified_excess(self):
        # heavy-tailed log-Cauchy data fitted by the model
        rng = np.random.default_rng(8)
        t = np.exp(stats.cauchy.rvs(size=70, random_state=rng) * 0.8)
        spec = RegressionSpec.intercept_only(t)
        res = fit(spec)
        band = envelope(spec, res, "rq", M=100, seed=1)
        assert band.outside > math.ceil(0.075 * spec.n)

    def test_bad_args(self, fitted):
        spec, res = fitted
        with pytest.raises(DomainError):
            envelope(spec, res, M=0)


class TestLjungBox:
    def test_formula(self):
        x = np.array([1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 5.0, 8.0])
        d = x - x.mean()
        r = [np.sum(d[k:] * d[:-k]) / np.sum(d * d) for k in (1, 2)]
        n = x.size
        q_exp = n * (n + 2) * (r[0] ** 2 / (n - 1) + r[1] ** 2 / (n - 2))
        q, p = ljung_box(x, 2)
        assert q == pytest.approx(q_exp, rel=1e-13)
        assert p == pytest.approx(stats.chi2.sf(q_exp, 2), rel=1e-12)

    def test_multiple_lags(self, rng):
        x = rng.normal(size=50)
        assert ljung_box(x, [4, 16]) == [ljung_box(x, 4), ljung_box(x, 16)]

    def test_errors(self):
        with pytest.raises(DomainError):
            ljung_box(np.ones(20), 4)
        with pytest.raises(DomainError):
            ljung_box(np.arange(5.0), 5)

    def test_detects_autocorrelation(self, rng):
        e = rng.normal(size=500)
        x = np.convolve(e, [1, 0.8, 0.6], mode="valid")
        assert ljung_box(x, 4)[1] < 1e-6
