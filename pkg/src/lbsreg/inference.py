"""Asymptotic, percentile-bootstrap and BCa confidence intervals."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import distribution as dist
from .errors import DomainError, InfeasiblePointError, UnavailableError
from .parallel import map_tasks, replica_rng
from .regression import FitOptions, FitResult, RegressionSpec, fit, fitted_params

__all__ = [
    "CIMethod",
    "IntervalEstimate",
    "BootstrapRun",
    "aci",
    "parametric_bootstrap",
    "jackknife",
    "pci",
    "bci",
    "bca_acceleration",
]

# replicas failing beyond this share of B mark the intervals unreliable
FAILURE_BUDGET = 0.10


class CIMethod(str, enum.Enum):
    ACI = "ACI"
    PCI = "PCI"
    BCI = "BCI"


@dataclass(frozen=True)
class IntervalEstimate:
    index: int
    method: CIMethod
    level: float
    lower: float
    upper: float
    name: str = ""
    reliable: bool = True

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise DomainError("interval lower bound exceeds upper bound")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def significant(self) -> bool:
        """True when the interval excludes zero."""
        return not self.contains(0.0)


@dataclass
class BootstrapRun:
    B: int
    replicates: np.ndarray
    seeds: list[tuple[int, int]] = field(default_factory=list)
    failures: int = 0

    @property
    def n_ok(self) -> int:
        return self.replicates.shape[0]

    @property
    def unreliable(self) -> bool:
        return self.B > 0 and self.failures > FAILURE_BUDGET * self.B


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")


def aci(fit_result: FitResult, level: float = 0.95) -> list[IntervalEstimate]:
    """Wald intervals ``delta_j -/+ z_{1-kappa/2} SE_j``."""
    _check_level(level)
    if fit_result.covariance is None:
        raise UnavailableError("fit has no covariance matrix")
    z = special.ndtri(0.5 + level / 2.0)
    se = fit_result.se
    names = fit_result.names or ("",) * fit_result.delta.size
    return [
        IntervalEstimate(j, CIMethod.ACI, level, d - z * s, d + z * s, names[j])
        for j, (d, s) in enumerate(zip(fit_result.delta, se))
    ]


def _one_replica(args):
    spec, params, delta_hat, master_seed, b, opts = args
    rng = replica_rng(master_seed, b)
    t_star = dist.sample(params, rng=rng)
    try:
        res = fit(spec.with_response(t_star), FitOptions(
            tol=opts.tol, max_iter=opts.max_iter, start=delta_hat,
        ))
    except (InfeasiblePointError, DomainError, np.linalg.LinAlgError):
        return None
    if not res.converged:
        return None
    return res.delta


def parametric_bootstrap(
    spec: RegressionSpec,
    fit_result: FitResult,
    B: int = 500,
    seed: int = 0,
    *,
    options: FitOptions | None = None,
    threads: int = 1,
) -> BootstrapRun:
    """Simulate ``B`` responses from the fitted model and refit each.

    Replica ``b`` draws from its own stream derived from ``(seed, b)``, so the
    result does not depend on ``threads``. Refits start at the original
    estimate; non-converged refits are counted in ``failures`` and dropped.
    """
    if B < 0:
        raise DomainError("B must be >= 0")
    m = spec.p + spec.q
    if B == 0:
        return BootstrapRun(B=0, replicates=np.empty((0, m)))
    if not fit_result.converged:
        raise UnavailableError("bootstrap needs a converged fit")
    opts = options or FitOptions()
    params = fitted_params(spec, fit_result.delta)
    tasks = [(spec, params, fit_result.delta, seed, b, opts) for b in range(B)]
    out = map_tasks(_one_replica, tasks, threads=threads)
    rows = [r for r in out if r is not None]
    reps = np.array(rows) if rows else np.empty((0, m))
    return BootstrapRun(
        B=B,
        replicates=reps,
        seeds=[(seed, b) for b in range(B)],
        failures=B - len(rows),
    )


def pci(run: BootstrapRun, level: float = 0.95, names=None) -> list[IntervalEstimate]:
    """Percentile intervals from type-7 (linear) empirical quantiles."""
    _check_level(level)
    if run.n_ok < 2:
        raise UnavailableError("percentile interval needs at least 2 converged replicas")
    kappa = 1.0 - level
    lo = np.quantile(run.replicates, kappa / 2.0, axis=0)
    hi = np.quantile(run.replicates, 1.0 - kappa / 2.0, axis=0)
    names = names or ("",) * lo.size
    return [
        IntervalEstimate(j, CIMethod.PCI, level, float(lo[j]), float(hi[j]), names[j],
                         reliable=not run.unreliable)
        for j in range(lo.size)
    ]


def jackknife(spec: RegressionSpec, fit_result: FitResult, *, options: FitOptions | None = None) -> np.ndarray:
    """Leave-one-out estimates (n x (p+q)); failed refits are NaN rows."""
    opts = options or FitOptions()
    n = spec.n
    out = np.full((n, spec.p + spec.q), np.nan)
    idx = np.arange(n)
    for i in range(n):
        try:
            sub = spec.subset(idx != i)
            res = fit(sub, FitOptions(tol=opts.tol, max_iter=opts.max_iter, start=fit_result.delta))
        except (InfeasiblePointError, DomainError, np.linalg.LinAlgError):
            continue
        if res.converged:
            out[i] = res.delta
    return out


def bca_acceleration(jack: np.ndarray) -> np.ndarray:
    """Acceleration from jackknife skewness, one value per column."""
    jack = np.asarray(jack, dtype=float)
    if jack.ndim == 1:
        jack = jack[:, None]
    acc = np.zeros(jack.shape[1])
    for j in range(jack.shape[1]):
        col = jack[:, j]
        col = col[np.isfinite(col)]
        if col.size < 3:
            continue
        dev = col.mean() - col
        den = 6.0 * np.sum(dev**2) ** 1.5
        acc[j] = np.sum(dev**3) / den if den > 0 else 0.0
    return acc


def bci(
    run: BootstrapRun,
    fit_result: FitResult,
    spec: RegressionSpec | None = None,
    level: float = 0.95,
    *,
    acceleration: np.ndarray | None = None,
    jack: np.ndarray | None = None,
) -> list[IntervalEstimate]:
    """Bias-corrected and accelerated intervals.

    ``z0`` is the normal quantile of the share of replicas strictly below the
    estimate. The acceleration comes from ``acceleration`` if given, otherwise
    from ``jack`` or a jackknife over the observations of ``spec``. Where every
    replica falls on one side of the estimate the percentile interval is used.
    """
    _check_level(level)
    if run.n_ok < 2:
        raise UnavailableError("BCa interval needs at least 2 converged replicas")
    m = run.replicates.shape[1]
    if acceleration is None:
        if jack is None:
            if spec is None:
                raise UnavailableError("BCa needs spec, a jackknife matrix or an acceleration")
            jack = jackknife(spec, fit_result)
        acceleration = bca_acceleration(jack)
    acceleration = np.broadcast_to(np.asarray(acceleration, dtype=float), (m,))
    kappa = 1.0 - level
    z_lo = special.ndtri(kappa / 2.0)
    z_hi = -z_lo
    names = fit_result.names or ("",) * m
    pct = pci(run, level, names)
    out: list[IntervalEstimate] = []
    for j in range(m):
        col = run.replicates[:, j]
        frac = np.mean(col < fit_result.delta[j])
        if frac <= 0.0 or frac >= 1.0:
            warnings.warn(
                f"all replicas on one side of estimate {j}; using the percentile interval",
                RuntimeWarning, stacklevel=2,
            )
            p = pct[j]
            out.append(IntervalEstimate(j, CIMethod.BCI, level, p.lower, p.upper, names[j],
                                        reliable=False))
            continue
        z0 = special.ndtri(frac)
        a = acceleration[j]
        q1 = special.ndtr(z0 + (z0 + z_lo) / (1.0 - a * (z0 + z_lo)))
        q2 = special.ndtr(z0 + (z0 + z_hi) / (1.0 - a * (z0 + z_hi)))
        lo, hi = np.quantile(col, [q1, q2])
        out.append(IntervalEstimate(j, CIMethod.BCI, level, float(lo), float(hi), names[j],
                                    reliable=not run.unreliable))
    return out
