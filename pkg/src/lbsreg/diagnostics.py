"""Residuals (generalized Cox-Snell, randomized quantile, U), their reference
moments, simulated QQ envelopes and the Ljung-Box portmanteau test."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

from . import distribution as dist
from .errors import DomainError, InfeasiblePointError, UnavailableError
from .parallel import replica_rng
from .regression import FitOptions, FitResult, RegressionSpec, fit, fitted_params

__all__ = [
    "ResidualKind",
    "ResidualSet",
    "ReferenceMoments",
    "EnvelopeBand",
    "residuals",
    "raw_residuals",
    "reference_moments",
    "sample_moments",
    "theoretical_quantiles",
    "envelope",
    "envelopes",
    "ljung_box",
]

S_CLAMP = 1e-15


class ResidualKind(str, enum.Enum):
    GCS = "gcs"
    RQ = "rq"
    U = "u"


def _kind(kind) -> ResidualKind:
    try:
        return ResidualKind(str(getattr(kind, "value", kind)).lower())
    except ValueError:
        raise DomainError(f"unknown residual kind {kind!r}") from None


@dataclass(frozen=True)
class ResidualSet:
    gcs: np.ndarray
    rq: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    theta: np.ndarray

    def __getitem__(self, kind) -> np.ndarray:
        return getattr(self, _kind(kind).value)


@dataclass(frozen=True)
class ReferenceMoments:
    mean: float
    sd: float
    cs: float
    ck: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.mean, self.sd, self.cs, self.ck)


@dataclass(frozen=True)
class EnvelopeBand:
    kind: ResidualKind
    level: float
    theoretical: np.ndarray
    observed: np.ndarray
    lo: np.ndarray
    median: np.ndarray
    hi: np.ndarray
    failures: int = 0

    @property
    def outside(self) -> int:
        return int(np.sum((self.observed < self.lo) | (self.observed > self.hi)))

    @property
    def inside_fraction(self) -> float:
        return 1.0 - self.outside / self.observed.size


def _residuals_from(t: np.ndarray, params: dist.LbsParams, *, warn: bool = True) -> ResidualSet:
    logS = np.asarray(dist.log_survival(params, t), dtype=float)
    S = np.exp(logS)
    clipped = (S < S_CLAMP) | (S > 1.0 - S_CLAMP)
    if np.any(clipped):
        if warn:
            warnings.warn(
                f"{int(clipped.sum())} fitted survival values clamped to [1e-15, 1-1e-15]",
                RuntimeWarning, stacklevel=3,
            )
        S = np.clip(S, S_CLAMP, 1.0 - S_CLAMP)
        logS = np.log(S)
    al = np.broadcast_to(params.alpha, t.shape).astype(float)
    th = np.broadcast_to(params.theta, t.shape).astype(float)
    return ResidualSet(
        gcs=-logS,
        # sign as written: quantile of the survival probability
        rq=special.ndtri(S),
        u=(t - th) ** 2 / (t * th) / al**2,
        alpha=al,
        theta=th,
    )


def residuals(spec: RegressionSpec, fit_result: FitResult) -> ResidualSet:
    """GCS, RQ and U residuals at the fitted ``(alpha_i, theta_i)``."""
    if not fit_result.converged:
        raise UnavailableError("residuals need a converged fit")
    return _residuals_from(spec.t, fitted_params(spec, fit_result.delta))


def raw_residuals(spec: RegressionSpec, fit_result: FitResult) -> np.ndarray:
    """``t_i`` minus the fitted LBS mean."""
    return spec.t - dist.mean(fitted_params(spec, fit_result.delta))


def reference_moments(kind, alpha: float | None = None) -> ReferenceMoments:
    """Mean, SD, skewness and (non-excess) kurtosis of the reference law."""
    kind = _kind(kind)
    if kind is ResidualKind.GCS:
        return ReferenceMoments(1.0, 1.0, 2.0, 9.0)
    if kind is ResidualKind.RQ:
        return ReferenceMoments(0.0, 1.0, 0.0, 3.0)
    if alpha is None or not alpha > 0:
        raise DomainError("U reference moments need alpha > 0")
    a2 = alpha**2
    base = 6 * a2**2 + 24 * a2 + 8
    return ReferenceMoments(
        mean=3.0 - 4.0 / (a2 + 2.0),
        sd=math.sqrt(6.0 - 16.0 / (a2 + 2.0) ** 2),
        cs=8.0 * (3 * a2**3 + 18 * a2**2 + 36 * a2 + 8) / base**1.5,
        ck=12.0 * (21 * a2**4 + 168 * a2**3 + 456 * a2**2 + 480 * a2 + 80) / base**2,
    )


def sample_moments(x) -> ReferenceMoments:
    """Mean, SD (n-1 divisor), ``m3/m2^1.5`` and ``m4/m2^2`` (non-excess)."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise DomainError("need at least two values")
    mu = math.fsum(x) / x.size
    d = x - mu
    m2 = math.fsum(d**2) / x.size
    if m2 == 0:
        return ReferenceMoments(mu, 0.0, math.nan, math.nan)
    m3 = math.fsum(d**3) / x.size
    m4 = math.fsum(d**4) / x.size
    sd = math.sqrt(m2 * x.size / (x.size - 1))
    return ReferenceMoments(mu, sd, m3 / m2**1.5, m4 / m2**2)


def _mixture_quantiles(probs: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Quantiles of the average of the U-mixture laws over ``alpha``."""
    pis = 2.0 / (np.asarray(alpha, dtype=float) ** 2 + 2.0)
    pi_bar = float(np.mean(pis))
    mix = dist.GammaMixture(pi=pi_bar)
    out = np.empty_like(probs)
    for k, pr in enumerate(probs):
        lo, hi = 0.0, 1.0
        while mix.cdf(hi) < pr:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mix.cdf(mid) < pr:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, hi):
                break
        out[k] = 0.5 * (lo + hi)
    return out


def theoretical_quantiles(kind, n: int, alpha=None) -> np.ndarray:
    """Reference quantiles at plotting positions ``(i - 0.5) / n``.

    For U with observation-specific alpha the reference is the average of the
    per-observation mixtures (pi averages linearly).
    """
    kind = _kind(kind)
    probs = (np.arange(1, n + 1) - 0.5) / n
    if kind is ResidualKind.GCS:
        return -np.log1p(-probs)
    if kind is ResidualKind.RQ:
        return special.ndtri(probs)
    if alpha is None:
        raise DomainError("U quantiles need alpha")
    return _mixture_quantiles(probs, np.atleast_1d(alpha))


def envelopes(
    spec: RegressionSpec,
    fit_result: FitResult,
    kinds=("gcs", "rq", "u"),
    M: int = 100,
    level: float = 0.95,
    seed: int = 0,
    *,
    rng_factory: Callable[[int], np.random.Generator] | None = None,
) -> dict[ResidualKind, EnvelopeBand]:
    """Simulated pointwise QQ bands for several residual kinds.

    Each of the ``M`` datasets is simulated from the fitted model and refitted
    (starting at the original estimate); its sorted residuals give one draw of
    every order statistic. Bands are the ``(1-level)/2`` and ``(1+level)/2``
    quantiles plus the median. Failed refits are skipped and counted.
    """
    if not fit_result.converged:
        raise UnavailableError("envelope needs a converged fit")
    if M < 1:
        raise DomainError("M must be >= 1")
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    kinds = [_kind(k) for k in kinds]
    params = fitted_params(spec, fit_result.delta)
    observed = _residuals_from(spec.t, params)
    sims: dict[ResidualKind, list[np.ndarray]] = {k: [] for k in kinds}
    failures = 0
    for m in range(M):
        rng = rng_factory(m) if rng_factory is not None else replica_rng(seed, m)
        t_star = dist.sample(params, rng=rng)
        try:
            sim_spec = spec.with_response(t_star)
            res = fit(sim_spec, FitOptions(start=fit_result.delta))
        except (InfeasiblePointError, DomainError, np.linalg.LinAlgError):
            failures += 1
            continue
        if not res.converged:
            failures += 1
            continue
        r = _residuals_from(t_star, fitted_params(sim_spec, res.delta), warn=False)
        for k in kinds:
            sims[k].append(np.sort(r[k]))
    if not any(sims[k] for k in kinds):
        raise UnavailableError("every envelope simulation failed")
    out: dict[ResidualKind, EnvelopeBand] = {}
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    for k in kinds:
        mat = np.vstack(sims[k])
        lo, med, hi = np.quantile(mat, [lo_q, 0.5, hi_q], axis=0)
        out[k] = EnvelopeBand(
            kind=k,
            level=level,
            theoretical=theoretical_quantiles(k, spec.n, observed.alpha),
            observed=np.sort(observed[k]),
            lo=lo,
            median=med,
            hi=hi,
            failures=failures,
        )
    return out


def envelope(spec, fit_result, kind="gcs", M: int = 100, level: float = 0.95, seed: int = 0,
             *, rng_factory=None) -> EnvelopeBand:
    return envelopes(spec, fit_result, (kind,), M, level, seed, rng_factory=rng_factory)[_kind(kind)]


def ljung_box(x, lags) -> tuple[float, float] | list[tuple[float, float]]:
    """Ljung-Box statistic and chi-square p-value for ``lags`` (int or sequence).

    ``Q = n (n + 2) sum_{k<=h} r_k^2 / (n - k)`` with ``h`` degrees of freedom.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    single = np.ndim(lags) == 0
    hs = [int(lags)] if single else [int(h) for h in lags]
    if any(h < 1 or h >= n for h in hs):
        raise DomainError("lags must satisfy 1 <= h < n")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0 or not math.isfinite(denom):
        raise DomainError("autocorrelations undefined for a constant series")
    hmax = max(hs)
    r = np.array([float(d[k:] @ d[:-k]) / denom for k in range(1, hmax + 1)])
    terms = r**2 / (n - np.arange(1, hmax + 1))
    out = []
    for h in hs:
        q = n * (n + 2) * float(np.sum(terms[:h]))
        out.append((q, float(stats.chi2.sf(q, h))))
    return out[0] if single else out
