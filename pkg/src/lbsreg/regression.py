"""LBS regression: dual linear predictors for theta and alpha, analytic
log-likelihood, score and Hessian, least-squares starting values and a BFGS
maximizer.

The coefficient vector is ordered ``delta = (beta, rho)``: ``p`` theta-component
coefficients followed by ``q`` alpha-component coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import distribution as dist
from .errors import DomainError, InfeasiblePointError, SingularDesignError
from .links import LOG, LinkFunction, get_link

__all__ = [
    "RegressionSpec",
    "ScoreWorkspace",
    "HessianWorkspace",
    "FitOptions",
    "FitResult",
    "fitted_params",
    "log_likelihood",
    "score",
    "hessian",
    "numeric_hessian",
    "initial_values",
    "fit",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_design(name: str, M, n: int) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] != n:
        raise DomainError(f"{name} must have {n} rows")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} contains non-finite values")
    return M


@dataclass(frozen=True)
class RegressionSpec:
    """Response ``t`` with theta-design ``X`` (n x p) and alpha-design ``W`` (n x q).

    Designs are used as given; include a column of ones for an intercept.
    """

    t: np.ndarray
    X: np.ndarray
    W: np.ndarray
    link1: LinkFunction = LOG
    link2: LinkFunction = LOG
    beta_names: tuple[str, ...] | None = None
    rho_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float).ravel()
        if t.size == 0 or not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise DomainError("response values must be finite and > 0")
        n = t.size
        X = _as_design("X", self.X, n)
        W = _as_design("W", self.W, n)
        p, q = X.shape[1], W.shape[1]
        if p + q >= n:
            raise DomainError(f"need p + q < n, got p={p}, q={q}, n={n}")
        if np.linalg.matrix_rank(X) < p:
            raise SingularDesignError("X is not of full column rank")
        if np.linalg.matrix_rank(W) < q:
            raise SingularDesignError("W is not of full column rank")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "link1", get_link(self.link1))
        object.__setattr__(self, "link2", get_link(self.link2))
        bn = tuple(self.beta_names) if self.beta_names else tuple(f"beta{j}" for j in range(p))
        rn = tuple(self.rho_names) if self.rho_names else tuple(f"rho{j}" for j in range(q))
        if len(bn) != p or len(rn) != q:
            raise DomainError("coefficient names do not match the design widths")
        object.__setattr__(self, "beta_names", bn)
        object.__setattr__(self, "rho_names", rn)

    @classmethod
    def intercept_only(cls, t, link1="log", link2="log") -> RegressionSpec:
        n = np.asarray(t).size
        ones = np.ones((n, 1))
        return cls(t, ones, ones, get_link(link1), get_link(link2))

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.W.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        return self.beta_names + self.rho_names

    def with_response(self, t) -> RegressionSpec:
        """Same designs and links with a new response (no re-validation of X, W)."""
        t = np.asarray(t, dtype=float).ravel()
        if t.shape != self.t.shape or np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise DomainError("replacement response must be positive with the same length")
        new = object.__new__(RegressionSpec)
        for name in self.__dataclass_fields__:
            object.__setattr__(new, name, getattr(self, name))
        object.__setattr__(new, "t", t)
        return new

    def subset(self, keep: np.ndarray) -> RegressionSpec:
        """Rows ``keep`` of the data, validated afresh."""
        return RegressionSpec(
            self.t[keep], self.X[keep], self.W[keep], self.link1, self.link2,
            self.beta_names, self.rho_names,
        )

    def split(self, delta) -> tuple[np.ndarray, np.ndarray]:
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (self.p + self.q,):
            raise DomainError(f"delta must have length p + q = {self.p + self.q}")
        return delta[: self.p], delta[self.p:]


def _parameters(spec: RegressionSpec, delta) -> tuple[np.ndarray, np.ndarray]:
    beta, rho = spec.split(delta)
    with np.errstate(over="ignore", invalid="ignore"):
        theta = spec.link1.inverse(spec.X @ beta)
        alpha = spec.link2.inverse(spec.W @ rho)
    if not (np.all(np.isfinite(theta)) and np.all(theta > 0)):
        raise InfeasiblePointError("theta must be finite and positive")
    if not (np.all(np.isfinite(alpha)) and np.all(alpha > 0)):
        raise InfeasiblePointError("alpha must be finite and positive")
    return theta, alpha


def fitted_params(spec: RegressionSpec, delta) -> dist.LbsParams:
    theta, alpha = _parameters(spec, delta)
    return dist.LbsParams(alpha=alpha, theta=theta)


def log_likelihood(spec: RegressionSpec, delta, *, full: bool = True) -> float:
    """Log-likelihood at ``delta``.

    With ``full=True`` (default) this is the sum of log densities. With
    ``full=False`` the data-only constant ``-n log(2 pi)/2 - sum(log t)/2`` is
    dropped, leaving the kernel in terms of theta and alpha alone.
    """
    theta, alpha = _parameters(spec, delta)
    t = spec.t
    u = (t - theta) ** 2 / (t * theta)
    kernel = np.sum(
        -u / (2.0 * alpha**2)
        - np.log(alpha) - np.log(2.0 + alpha**2)
        - 1.5 * np.log(theta)
        + np.log(t + theta)
    )
    if not full:
        return float(kernel)
    return float(kernel - spec.n * _LOG_SQRT_2PI - 0.5 * np.sum(np.log(t)))


@dataclass(frozen=True)
class ScoreWorkspace:
    z: np.ndarray
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class HessianWorkspace:
    zprime: np.ndarray
    cprime: np.ndarray
    d: np.ndarray
    e: np.ndarray
    k: np.ndarray
    v: np.ndarray
    h: np.ndarray
    u: np.ndarray


def _score_workspace(spec: RegressionSpec, theta, alpha) -> ScoreWorkspace:
    t = spec.t
    u = (t - theta) ** 2 / (t * theta)
    z = 1.0 / (t + theta) - (1.0 / t - t / theta**2) / (2.0 * alpha**2) - 1.5 / theta
    c = u / alpha**3 - (2.0 + 3.0 * alpha**2) / (2.0 * alpha + alpha**3)
    a = 1.0 / spec.link1.deriv(theta)
    b = 1.0 / spec.link2.deriv(alpha)
    return ScoreWorkspace(z=z, c=c, a=a, b=b)


def _hessian_workspace(spec: RegressionSpec, theta, alpha, ws: ScoreWorkspace) -> HessianWorkspace:
    t = spec.t
    u = (t - theta) ** 2 / (t * theta)
    zp = 1.5 / theta**2 - t / (alpha**2 * theta**3) - 1.0 / (t + theta) ** 2
    cp = (4.0 + 3.0 * alpha**4) / (2.0 * alpha + alpha**3) ** 2 - 3.0 * u / alpha**4
    d = -spec.link1.deriv2(theta) / spec.link1.deriv(theta) ** 2
    e = -spec.link2.deriv2(alpha) / spec.link2.deriv(alpha) ** 2
    k = (1.0 / t - t / theta**2) / alpha**3
    v = zp * ws.a**2 + ws.z * d * ws.a
    h = k * ws.b * ws.a
    uu = cp * ws.b**2 + ws.c * e * ws.b
    return HessianWorkspace(zprime=zp, cprime=cp, d=d, e=e, k=k, v=v, h=h, u=uu)


def score(spec: RegressionSpec, delta) -> np.ndarray:
    theta, alpha = _parameters(spec, delta)
    ws = _score_workspace(spec, theta, alpha)
    return np.concatenate([spec.X.T @ (ws.a * ws.z), spec.W.T @ (ws.b * ws.c)])


def hessian(spec: RegressionSpec, delta) -> np.ndarray:
    theta, alpha = _parameters(spec, delta)
    ws = _score_workspace(spec, theta, alpha)
    hw = _hessian_workspace(spec, theta, alpha, ws)
    X, W = spec.X, spec.W
    bb = X.T @ (hw.v[:, None] * X)
    br = X.T @ (hw.h[:, None] * W)
    rr = W.T @ (hw.u[:, None] * W)
    # matmul rounding can leave the diagonal blocks slightly asymmetric
    bb = 0.5 * (bb + bb.T)
    rr = 0.5 * (rr + rr.T)
    return np.block([[bb, br], [br.T, rr]])


def numeric_hessian(spec: RegressionSpec, delta, rel_step: float = 1e-5) -> np.ndarray:
    """Central differences of the analytic score, symmetrized."""
    delta = np.asarray(delta, dtype=float)
    m = delta.size
    H = np.empty((m, m))
    for j in range(m):
        h = rel_step * (1.0 + abs(delta[j]))
        e = np.zeros(m)
        e[j] = h
        H[:, j] = (score(spec, delta + e) - score(spec, delta - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def initial_values(spec: RegressionSpec, *, floor: float = 1e-8) -> np.ndarray:
    """Least-squares starting values.

    beta from regressing ``g1(t)`` on X; rho from regressing ``g2(y)`` on W with
    ``y = sqrt(t/theta + theta/t - 2)`` at the fitted theta, floored at ``floor``.
    """
    if np.linalg.matrix_rank(spec.X) < spec.p or np.linalg.matrix_rank(spec.W) < spec.q:
        raise SingularDesignError("design matrix is rank deficient")
    beta0, *_ = np.linalg.lstsq(spec.X, spec.link1.forward(spec.t), rcond=None)
    theta0 = spec.link1.inverse(spec.X @ beta0)
    if np.any(theta0 <= 0):
        # identity/sqrt links can leave the admissible region
        theta0 = np.maximum(theta0, floor)
    t = spec.t
    y = np.sqrt((t - theta0) ** 2 / (t * theta0))
    y = np.maximum(y, floor)
    rho0, *_ = np.linalg.lstsq(spec.W, spec.link2.forward(y), rcond=None)
    return np.concatenate([beta0, rho0])


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-8
    max_iter: int = 500
    armijo: float = 1e-4
    max_backtrack: int = 60
    start: np.ndarray | None = None


@dataclass
class FitResult:
    delta: np.ndarray
    covariance: np.ndarray | None
    loglik: float
    converged: bool
    iterations: int
    gradient_norm: float
    p: int
    q: int
    names: tuple[str, ...] = ()
    initial_loglik: float = float("nan")
    hessian_source: str | None = None
    message: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def beta(self) -> np.ndarray:
        return self.delta[: self.p]

    @property
    def rho(self) -> np.ndarray:
        return self.delta[self.p:]

    @property
    def se(self) -> np.ndarray | None:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def has_covariance(self) -> bool:
        return self.covariance is not None


def _neg_objective(spec, x):
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = -log_likelihood(spec, x)
    except InfeasiblePointError:
        return math.inf
    return val if math.isfinite(val) else math.inf


def _inverse_information(H: np.ndarray) -> np.ndarray | None:
    """``(-H)^-1`` when ``-H`` is positive definite, else None."""
    info = -0.5 * (H + H.T)
    if not np.all(np.isfinite(info)):
        return None
    try:
        L = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return None
    Linv = np.linalg.inv(L)
    cov = Linv.T @ Linv
    return 0.5 * (cov + cov.T)


def _bfgs(spec: RegressionSpec, x0: np.ndarray, opts: FitOptions):
    """Maximize the log-likelihood by BFGS with Armijo backtracking.

    Infeasible trial points count as -inf and shrink the step. The inverse
    Hessian approximation starts from the inverse observed information at x0
    when that is positive definite.
    """
    x = x0.copy()
    f = _neg_objective(spec, x)
    if not math.isfinite(f):
        raise InfeasiblePointError("starting point is infeasible")
    g = -score(spec, x)
    m = x.size
    Hinv = None
    try:
        Hinv = _inverse_information(hessian(spec, x))
    except (InfeasiblePointError, FloatingPointError):
        Hinv = None
    if Hinv is None:
        Hinv = np.eye(m) / max(1.0, float(np.max(np.abs(g))))
    it = 0
    message = "maximum iterations reached"
    eps_f = 1e-14
    while it < opts.max_iter:
        gnorm = float(np.max(np.abs(g)))
        if gnorm < opts.tol:
            message = "gradient tolerance reached"
            break
        it += 1
        p = -Hinv @ g
        slope = float(g @ p)
        if not slope < 0:
            Hinv = np.eye(m) / max(1.0, gnorm)
            p = -Hinv @ g
            slope = float(g @ p)
        step = 1.0
        accepted = False
        for _ in range(opts.max_backtrack):
            x_new = x + step * p
            f_new = _neg_objective(spec, x_new)
            if math.isfinite(f_new) and f_new <= f + opts.armijo * step * slope + eps_f * abs(f):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            message = "line search failed"
            break
        g_new = -score(spec, x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        x, f, g = x_new, f_new, g_new
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)) and sy > 0:
            rho_ = 1.0 / sy
            Hy = Hinv @ y
            Hinv = (
                Hinv
                - rho_ * (np.outer(s, Hy) + np.outer(Hy, s))
                + (rho_ * rho_ * float(y @ Hy) + rho_) * np.outer(s, s)
            )
    gnorm = float(np.max(np.abs(g)))
    return x, -f, it, gnorm, gnorm < opts.tol, message


def fit(spec: RegressionSpec, options: FitOptions | None = None, **kwargs) -> FitResult:
    """Maximum-likelihood fit.

    Converged means the sup-norm of the score fell below ``options.tol``. The
    covariance is the inverse observed information; if the analytic Hessian is
    not negative definite a finite-difference Hessian is tried, and if that also
    fails the covariance is left as None.
    """
    opts = options or FitOptions(**kwargs)
    if options is not None and kwargs:
        raise TypeError("pass either options or keyword arguments, not both")
    x0 = initial_values(spec) if opts.start is None else np.asarray(opts.start, dtype=float).copy()
    if x0.shape != (spec.p + spec.q,):
        raise DomainError("start vector has the wrong length")
    init_ll = -_neg_objective(spec, x0)
    delta, ll, iters, gnorm, converged, message = _bfgs(spec, x0, opts)
    warnings: list[str] = []
    cov = None
    source = None
    try:
        cov = _inverse_information(hessian(spec, delta))
        source = "analytic" if cov is not None else None
        if cov is None:
            cov = _inverse_information(numeric_hessian(spec, delta))
            source = "finite-difference" if cov is not None else None
            warnings.append("analytic Hessian not negative definite")
    except InfeasiblePointError:
        cov = None
    if cov is None:
        warnings.append("covariance unavailable: information matrix singular or indefinite")
    return FitResult(
        delta=delta,
        covariance=cov,
        loglik=ll,
        converged=converged,
        iterations=iters,
        gradient_norm=gnorm,
        p=spec.p,
        q=spec.q,
        names=spec.names,
        initial_loglik=init_ll,
        hessian_source=source,
        message=message,
        warnings=warnings,
    )
