"""Length-biased Birnbaum-Saunders distribution LBS(alpha, theta).

If ``Y ~ BS(alpha, theta)`` then the length-biased variable ``T`` has density
``t f_Y(t) / E(Y)``. All functions broadcast over numpy arrays: the fields of
:class:`LbsParams` may be scalars or arrays (one pair per observation, as in
the regression model), and ``t`` broadcasts against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError

__all__ = [
    "LbsParams",
    "StandardizeTerms",
    "GammaMixture",
    "standardize",
    "pdf",
    "log_pdf",
    "survival",
    "log_survival",
    "cdf",
    "hazard",
    "log_hazard",
    "quantile",
    "sample",
    "sample_by_inversion",
    "mean",
    "variance",
    "bs_moment",
    "neg_moment",
    "mixture_for",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Below this value of a(t) the closed-form CDF loses relative accuracy to
# cancellation; the left tail is integrated in the standardized variable.
_LEFT_TAIL_A = -4.0


def _positive_finite(name: str, value) -> np.ndarray | float:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if not np.all(arr > 0):
        raise DomainError(f"{name} must be > 0")
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class LbsParams:
    """Shape ``alpha`` and scale ``theta``; scalars or broadcastable arrays."""

    alpha: float | np.ndarray
    theta: float | np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _positive_finite("alpha", self.alpha))
        object.__setattr__(self, "theta", _positive_finite("theta", self.theta))

    @property
    def bs_mean(self):
        """Mean of the underlying (unweighted) BS law, ``theta (alpha^2 + 2) / 2``."""
        return self.theta * (self.alpha**2 + 2.0) / 2.0

    @property
    def shape(self) -> tuple[int, ...]:
        return np.broadcast(self.alpha, self.theta).shape


@dataclass(frozen=True)
class StandardizeTerms:
    """Values of ``a(t)`` and ``A(t) = sqrt(4 + alpha^2 a^2) / alpha``."""

    a: float | np.ndarray
    bigA: float | np.ndarray


@dataclass(frozen=True)
class GammaMixture:
    """Law of ``(T/theta + theta/T - 2) / alpha^2`` for ``T ~ LBS(alpha, theta)``.

    Weight ``pi`` on Gamma(1/2, scale 2) and ``1 - pi`` on Gamma(3/2, scale 2).
    """

    pi: float | np.ndarray
    shape1: float = 0.5
    scale1: float = 2.0
    shape2: float = 1.5
    scale2: float = 2.0

    def cdf(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        return self.pi * special.gammainc(self.shape1, u / self.scale1) + (
            1.0 - self.pi
        ) * special.gammainc(self.shape2, u / self.scale2)

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        f1 = np.exp(
            (self.shape1 - 1) * np.log(u) - u / self.scale1
            - special.gammaln(self.shape1) - self.shape1 * math.log(self.scale1)
        )
        f2 = np.exp(
            (self.shape2 - 1) * np.log(u) - u / self.scale2
            - special.gammaln(self.shape2) - self.shape2 * math.log(self.scale2)
        )
        return self.pi * f1 + (1.0 - self.pi) * f2

    def mean(self):
        return self.pi * self.shape1 * self.scale1 + (1 - self.pi) * self.shape2 * self.scale2

    def sample(self, rng: np.random.Generator, size=None):
        pi = np.broadcast_to(np.asarray(self.pi, dtype=float), size if size is not None else np.shape(self.pi))
        first = rng.random(pi.shape) < pi
        g1 = rng.gamma(self.shape1, self.scale1, size=pi.shape)
        g2 = rng.gamma(self.shape2, self.scale2, size=pi.shape)
        return np.where(first, g1, g2)


def mixture_for(params: LbsParams) -> GammaMixture:
    return GammaMixture(pi=2.0 / (params.alpha**2 + 2.0))


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t <= 0):
        raise DomainError("t must be > 0")
    return t


def _ret(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def standardize(params: LbsParams, t) -> StandardizeTerms:
    t = _check_t(t)
    al, th = params.alpha, params.theta
    a = (np.sqrt(t / th) - np.sqrt(th / t)) / al
    bigA = np.sqrt(4.0 + (al * a) ** 2) / al
    return StandardizeTerms(a=_ret(a), bigA=_ret(bigA))


def _u_stat(t, al, th):
    # (t/th + th/t - 2) / al^2 without cancellation near t = th
    return (t - th) ** 2 / (t * th) / al**2


def log_pdf(params: LbsParams, t):
    t = _check_t(t)
    al, th = params.alpha, params.theta
    out = (
        -0.5 * _u_stat(t, al, th)
        - np.log(al) - np.log(2.0 + al**2)
        - 1.5 * np.log(th)
        + np.log(t + th)
        - 0.5 * np.log(t)
        - _LOG_SQRT_2PI
    )
    return _ret(out)


def pdf(params: LbsParams, t):
    return _ret(np.exp(log_pdf(params, t)))


def _log_survival_terms(t, al, th):
    """Log of the three nonnegative terms whose sum is S(t).

    S = Phi(-a) + k [exp(2/al^2) Phi(-A) + phi(a) (a + A)], k = al^2/(al^2+2),
    a rearrangement of the closed form in which every term is positive.
    """
    a = (np.sqrt(t / th) - np.sqrt(th / t)) / al
    bigA = np.sqrt(4.0 + (al * a) ** 2) / al
    logk = 2.0 * np.log(al) - np.log(al**2 + 2.0)
    # a + A = (4/al^2) / (A - a), stable for a << 0
    with np.errstate(divide="ignore"):
        a_plus_A = np.where(a >= 0, a + bigA, (4.0 / al**2) / (bigA - a))
    term1 = special.log_ndtr(-a)
    term2 = logk + 2.0 / al**2 + special.log_ndtr(-bigA)
    term3 = logk - 0.5 * a**2 - _LOG_SQRT_2PI + np.log(a_plus_A)
    return a, term1, term2, term3


def log_survival(params: LbsParams, t):
    t = _check_t(t)
    a, t1, t2, t3 = _log_survival_terms(t, params.alpha, params.theta)
    out = np.logaddexp(np.logaddexp(t1, t2), t3)
    return _ret(np.minimum(out, 0.0))


def survival(params: LbsParams, t):
    return _ret(np.exp(log_survival(params, t)))


def _g_of_z(z, al):
    # t/theta as a function of the standardized value z = a(t)
    h = al * np.abs(z) / 2.0
    r = np.sqrt(1.0 + h * h)
    return np.where(z >= 0, (h + r) ** 2, 1.0 / (h + r) ** 2)


def _left_tail_cdf(a: float, al: float) -> float:
    val, _ = integrate.quad(
        lambda z: _g_of_z(z, al) * math.exp(-0.5 * z * z - _LOG_SQRT_2PI),
        -np.inf, a, epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return 2.0 / (al**2 + 2.0) * val


def cdf(params: LbsParams, t):
    t = _check_t(t)
    al, th = np.broadcast_arrays(np.asarray(params.alpha, float), np.asarray(params.theta, float))
    t, al, th = np.broadcast_arrays(t, al, th)
    a, t1, t2, t3 = _log_survival_terms(t, al, th)
    # 1 - S with S close to 1 when a < 0: Phi(a) - k[...]
    upper = -np.expm1(np.minimum(np.logaddexp(np.logaddexp(t1, t2), t3), 0.0))
    lower = special.ndtr(a) - np.exp(t2) - np.exp(t3)
    out = np.where(a >= 0, upper, lower)
    tail = a < _LEFT_TAIL_A
    if np.any(tail):
        out = np.array(out, dtype=float, copy=True)
        for idx in np.argwhere(tail):
            idx = tuple(idx)
            out[idx] = _left_tail_cdf(float(a[idx]), float(al[idx]))
    return _ret(np.clip(out, 0.0, 1.0))


def log_hazard(params: LbsParams, t):
    return _ret(log_pdf(params, t) - log_survival(params, t))


def hazard(params: LbsParams, t):
    """Hazard rate ``pdf / survival`` evaluated in log space.

    Tends to ``1 / (2 alpha^2 theta)`` as t grows.
    """
    return _ret(np.exp(log_hazard(params, t)))


def quantile(params: LbsParams, u, *, tol: float = 1e-10, max_iter: int = 200):
    """Inverse CDF by bracketed Newton iteration on ``log t``.

    The bracket starts at ``theta`` and grows geometrically; Newton steps that
    leave the bracket are replaced by bisection. Upper quantiles are solved on
    the survival scale so that ``u`` close to 1 keeps its accuracy.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("u must lie in (0, 1)")
    al, th, u = np.broadcast_arrays(
        np.asarray(params.alpha, float), np.asarray(params.theta, float), u
    )
    shape = u.shape
    al, th, u = al.ravel(), th.ravel(), u.ravel()
    upper = u > 0.5
    target = np.where(upper, np.log1p(-u), u)

    def resid(x):
        t = np.exp(x)
        p = LbsParams(al, th)
        r_up = log_survival(p, t) - target
        r_lo = cdf(p, t) - target
        return np.where(upper, -r_up, r_lo)

    lo = np.log(th)
    hi = np.log(th)
    step = np.ones_like(th)
    # grow bracket: lo has resid < 0, hi has resid > 0
    for _ in range(max_iter):
        bad = resid(lo) > 0
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step = np.where(bad, step * 2, step)
    step = np.ones_like(th)
    for _ in range(max_iter):
        bad = resid(hi) < 0
        if not bad.any():
            break
        hi = np.where(bad, hi + step, hi)
        step = np.where(bad, step * 2, step)

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = resid(x)
        t = np.exp(x)
        p = LbsParams(al, th)
        lp = log_pdf(p, t)
        # derivative of the residual with respect to log t
        dr = np.where(upper, np.exp(lp - log_survival(p, t)) * t, np.exp(lp) * t)
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - r / dr
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        x_new = np.where(inside, newton, 0.5 * (lo + hi))
        done = np.abs(x_new - x) <= 1e-15 * np.maximum(1.0, np.abs(x))
        x = x_new
        if np.all(done | (r == 0)):
            break
    out = np.exp(x).reshape(shape)
    return _ret(out)


def sample(params: LbsParams, n: int | None = None, rng: np.random.Generator | None = None):
    """Draw from LBS(alpha, theta) through the gamma-mixture representation.

    ``U`` is drawn from the two-component gamma mixture; with
    ``s = alpha^2 U + 2`` the equation ``t^2 - s theta t + theta^2 = 0`` has
    roots ``t_+ >= t_-`` and the upper root is kept with probability
    ``t_+ / (s theta)``.
    """
    if rng is None:
        rng = np.random.default_rng()
    if n is not None and n < 0:
        raise DomainError("n must be >= 0")
    shape = params.shape
    if n is not None:
        if shape == ():
            shape = (int(n),)
        elif shape != (int(n),):
            raise DomainError("n does not match the shape of params")
    al = np.broadcast_to(np.asarray(params.alpha, float), shape)
    th = np.broadcast_to(np.asarray(params.theta, float), shape)
    u = GammaMixture(pi=2.0 / (al**2 + 2.0)).sample(rng, shape)
    s = al**2 * u + 2.0
    # s^2 - 4 = alpha^2 u (alpha^2 u + 4)
    disc = np.sqrt(al**2 * u * (al**2 * u + 4.0))
    t_plus = th * (s + disc) / 2.0
    t_minus = th * th / t_plus
    take_upper = rng.random(shape) * s * th < t_plus
    return np.where(take_upper, t_plus, t_minus)


def sample_by_inversion(params: LbsParams, n: int, rng: np.random.Generator):
    """Inverse-transform sampler; slower, used to cross-check :func:`sample`."""
    u = rng.random(int(n))
    u = np.clip(u, 1e-300, 1 - 1e-16)
    return quantile(params, u)


def mean(params: LbsParams):
    a2 = params.alpha**2
    return params.theta * (2.0 + 4.0 * a2 + 3.0 * a2**2) / (2.0 + a2)


def variance(params: LbsParams):
    a2 = params.alpha**2
    return params.theta**2 * a2 * (4.0 + 17.0 * a2 + 24.0 * a2**2 + 6.0 * a2**3) / (2.0 + a2) ** 2


def bs_moment(params: LbsParams, r: int):
    """``E(Y^r)`` for ``Y ~ BS(alpha, theta)``.

    Closed forms for r <= 2; larger r by quadrature over the standard normal
    variable underlying Y.
    """
    if r < 0 or int(r) != r:
        raise DomainError("r must be a nonnegative integer")
    al, th = params.alpha, params.theta
    a2 = al**2
    if r == 0:
        return np.ones_like(np.asarray(al * th, dtype=float))[()]
    if r == 1:
        return th * (1.0 + a2 / 2.0)
    if r == 2:
        return th**2 * (1.0 + 2.0 * a2 + 1.5 * a2**2)

    def one(al_):
        val, _ = integrate.quad(
            lambda z: _g_of_z(z, al_) ** r * math.exp(-0.5 * z * z - _LOG_SQRT_2PI),
            -np.inf, np.inf, epsrel=1e-12,
        )
        return val

    vals = np.vectorize(one)(np.asarray(al, float))
    return _ret(th**r * vals)


def neg_moment(params: LbsParams, r: int):
    """``E[T^{-(r+1)}] = E(Y^r) / (theta^{2r} E(Y))``."""
    return _ret(bs_moment(params, r) / (params.theta ** (2 * r) * params.bs_mean))
