from functools import lru_cache

import numpy as np
import pytest
from scipy import integrate, stats


@lru_cache(maxsize=64)
def _base(alpha, theta):
    base = stats.fatiguelife(alpha, scale=theta)
    return base, base.mean()


def lbs_pdf_oracle(alpha, theta, t):
    """Length-biased BS density built from scipy's fatigue-life law."""
    base, mu = _base(float(alpha), float(theta))
    return t * base.pdf(t) / mu


def lbs_cdf_oracle(alpha, theta, t):
    # split at theta so quad sees the bulk of the mass
    f = lambda x: lbs_pdf_oracle(alpha, theta, x)
    pts = [theta] if t > theta else None
    val, _ = integrate.quad(f, 0.0, t, points=pts, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def lbs_sf_oracle(alpha, theta, t):
    f = lambda x: lbs_pdf_oracle(alpha, theta, x)
    val, _ = integrate.quad(f, t, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
