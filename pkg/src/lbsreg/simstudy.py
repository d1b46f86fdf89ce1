"""Monte Carlo harness for estimator bias/MSE, interval coverage and residual
moments under the LBS regression model."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import distribution as dist
from .diagnostics import ResidualKind, _kind, _residuals_from, reference_moments, sample_moments
from .errors import DomainError, InfeasiblePointError, StudyError
from .inference import CIMethod, aci, bca_acceleration, bci, jackknife, parametric_bootstrap, pci
from .parallel import map_tasks, replica_rng
from .regression import RegressionSpec, fit, fitted_params

__all__ = [
    "ScenarioConfig",
    "StudyReport",
    "scenario",
    "simulate_dataset",
    "run_estimation_study",
    "run_coverage_study",
    "run_residual_study",
]

# share of failed replications tolerated in a unimodal scenario
FAILURE_LIMIT = 0.02

_TABLE_BLOCKS = {
    "table1": (0.25, 0.75, 1.25),
    "table3": (0.25, 0.75, 1.25),
    "table5": (0.25, 0.75, 1.25),
    "table2": (0.25, 0.5, 1.0, 2.0, 2.5),
    "table4": (0.25, 0.5, 1.0, 2.0, 2.5),
    "table6": (0.25, 0.5, 1.0, 2.0, 2.5),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.

    ``rho`` of length 2 means a covariate in the alpha component; length 1 means
    an intercept-only alpha with ``alpha = exp(rho[0])``. Covariates are
    Uniform(-1, 1).
    """

    n: int
    beta: tuple[float, ...] = (1.0, -1.0)
    rho: tuple[float, ...] = (-1.0, 0.25)
    reps: int = 1000
    boot: int = 200
    seed: int = 20240501
    redraw_covariates: bool = True
    threads: int = 1
    name: str = ""

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise DomainError("reps must be >= 1")
        if self.n < 5:
            raise DomainError("n must be >= 5")
        if len(self.beta) not in (1, 2) or len(self.rho) not in (1, 2):
            raise DomainError("beta and rho must have one or two entries")
        if self.boot < 0:
            raise DomainError("boot must be >= 0")

    @property
    def true_delta(self) -> np.ndarray:
        return np.array(self.beta + self.rho, dtype=float)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f"beta{j}" for j in range(len(self.beta))) + tuple(
            f"rho{j}" for j in range(len(self.rho))
        )

    @property
    def bimodal(self) -> bool:
        if len(self.rho) == 1:
            return math.exp(self.rho[0]) > 2.0
        # covariate in (-1, 1): largest alpha at the edge of the design
        return math.exp(self.rho[0] + abs(self.rho[1])) > 2.0


def scenario(table: str, n: int, block: float | None = None, **overrides) -> ScenarioConfig:
    """Preset for a block of the published simulation tables.

    ``block`` is rho1 for tables 1, 3 and 5 and alpha for tables 2, 4 and 6.
    """
    key = table.lower()
    if key not in _TABLE_BLOCKS:
        raise DomainError(f"unknown table {table!r}")
    choices = _TABLE_BLOCKS[key]
    block = choices[0] if block is None else float(block)
    if block not in choices:
        raise DomainError(f"{table} has blocks {choices}")
    if key in ("table1", "table3", "table5"):
        rho = (-1.0, block)
    else:
        rho = (math.log(block),)
    return ScenarioConfig(n=n, rho=rho, name=f"{key}:{block}", **overrides)


def _design(config: ScenarioConfig, rng: np.random.Generator):
    n = config.n
    ones = np.ones(n)
    cols_x = [ones]
    cols_w = [ones]
    if len(config.beta) == 2:
        cols_x.append(rng.uniform(-1.0, 1.0, n))
    if len(config.rho) == 2:
        cols_w.append(rng.uniform(-1.0, 1.0, n))
    return np.column_stack(cols_x), np.column_stack(cols_w)


def simulate_dataset(config: ScenarioConfig, rep: int) -> RegressionSpec:
    """Dataset for replication ``rep``; deterministic in ``(config.seed, rep)``."""
    rng = replica_rng(config.seed, rep)
    if config.redraw_covariates:
        X, W = _design(config, rng)
    else:
        X, W = _design(config, replica_rng(config.seed, 0, 1))
    theta = np.exp(X @ np.asarray(config.beta))
    alpha = np.exp(W @ np.asarray(config.rho))
    t = dist.sample(dist.LbsParams(alpha=alpha, theta=theta), rng=rng)
    return RegressionSpec(t, X, W)


@dataclass(frozen=True)
class _Task:
    config: ScenarioConfig
    rep: int
    methods: tuple[CIMethod, ...] = ()
    level: float = 0.95
    kinds: tuple[ResidualKind, ...] = ()


def _one(task: _Task) -> dict | None:
    config = task.config
    try:
        spec = simulate_dataset(config, task.rep)
        res = fit(spec)
    except (InfeasiblePointError, DomainError, np.linalg.LinAlgError):
        return None
    if not res.converged:
        return None
    out: dict = {"delta": res.delta}
    truth = config.true_delta
    if task.methods:
        cover: dict[str, np.ndarray] = {}
        if CIMethod.ACI in task.methods:
            if res.covariance is None:
                return None
            cover["ACI"] = np.array([iv.contains(v) for iv, v in zip(aci(res, task.level), truth)])
        boot_methods = {CIMethod.PCI, CIMethod.BCI} & set(task.methods)
        if boot_methods:
            run = parametric_bootstrap(spec, res, config.boot, seed=_boot_seed(config, task.rep))
            if run.n_ok < 2:
                return None
            if CIMethod.PCI in task.methods:
                cover["PCI"] = np.array([iv.contains(v) for iv, v in zip(pci(run, task.level), truth)])
            if CIMethod.BCI in task.methods:
                acc = bca_acceleration(jackknife(spec, res))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    ivs = bci(run, res, level=task.level, acceleration=acc)
                cover["BCI"] = np.array([iv.contains(v) for iv, v in zip(ivs, truth)])
        out["cover"] = cover
    if task.kinds:
        r = _residuals_from(spec.t, fitted_params(spec, res.delta), warn=False)
        out["moments"] = {k.value: sample_moments(r[k]).as_tuple() for k in task.kinds}
        out["alpha_bar"] = float(np.mean(r.alpha))
    return out


def _boot_seed(config: ScenarioConfig, rep: int) -> int:
    # distinct from the data streams (seed, rep)
    ss = np.random.SeedSequence(entropy=int(config.seed), spawn_key=(int(rep), 7))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class StudyReport:
    config: ScenarioConfig
    names: tuple[str, ...]
    true_values: np.ndarray
    n_ok: int
    failures: int
    mean: np.ndarray | None = None
    bias: np.ndarray | None = None
    mse: np.ndarray | None = None
    coverage: dict[str, np.ndarray] = field(default_factory=dict)
    residual_moments: dict[str, tuple[float, float, float, float]] = field(default_factory=dict)
    reference: dict[str, tuple[float, float, float, float]] = field(default_factory=dict)
    level: float = 0.95

    def coverage_tolerance(self, p: float | None = None) -> float:
        """Three binomial standard errors (in percentage points) at rate ``p``."""
        p = self.level if p is None else p
        return 300.0 * math.sqrt(p * (1.0 - p) / max(self.n_ok, 1))

    def rows(self) -> list[dict]:
        out = []
        for j, name in enumerate(self.names):
            row = {"coefficient": name, "true": float(self.true_values[j])}
            if self.mean is not None:
                row.update(mean=float(self.mean[j]), bias=float(self.bias[j]), mse=float(self.mse[j]))
            for method, cov in self.coverage.items():
                row[f"coverage_{method}"] = float(cov[j])
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        fields = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", *fields])
        for row in rows:
            w.writerow(["coefficients", *(_fmt(row[f]) for f in fields)])
        for kind, mom in self.residual_moments.items():
            w.writerow(["residual", kind, *(_fmt(v) for v in mom)])
            ref = self.reference.get(kind)
            if ref is not None:
                w.writerow(["reference", kind, *(_fmt(v) for v in ref)])
        w.writerow(["meta", "n_ok", self.n_ok])
        w.writerow(["meta", "failures", self.failures])
        for key, val in asdict(self.config).items():
            w.writerow(["config", key, val])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(f"{v:.17g}"))
    return str(v)


def _run(config: ScenarioConfig, methods=(), level=0.95, kinds=()) -> tuple[list[dict], int]:
    tasks = [_Task(config, r, tuple(methods), level, tuple(kinds)) for r in range(config.reps)]
    results = map_tasks(_one, tasks, threads=config.threads)
    ok = [r for r in results if r is not None]
    failures = len(results) - len(ok)
    if not config.bimodal and failures > FAILURE_LIMIT * config.reps:
        raise StudyError(
            f"{failures} of {config.reps} replications failed in a unimodal scenario"
        )
    if not ok:
        raise StudyError("every replication failed")
    return ok, failures


def _estimation_summary(config: ScenarioConfig, ok: list[dict]):
    est = np.vstack([r["delta"] for r in ok])
    truth = config.true_delta
    m = est.shape[1]
    mean = np.array([math.fsum(est[:, j]) / est.shape[0] for j in range(m)])
    mse = np.array([math.fsum((est[:, j] - truth[j]) ** 2) / est.shape[0] for j in range(m)])
    return mean, mean - truth, mse


def run_estimation_study(config: ScenarioConfig) -> StudyReport:
    """Empirical mean, bias and MSE of the ML estimates over ``config.reps`` datasets."""
    ok, failures = _run(config)
    mean, bias, mse = _estimation_summary(config, ok)
    return StudyReport(config, config.names, config.true_delta, len(ok), failures,
                       mean=mean, bias=bias, mse=mse)


def run_coverage_study(config: ScenarioConfig, methods=("ACI",), level: float = 0.95) -> StudyReport:
    """Percentage of replications whose interval contains the true coefficient."""
    methods = tuple(CIMethod(str(getattr(m, "value", m)).upper()) for m in methods)
    if not methods:
        return StudyReport(config, config.names, config.true_delta, 0, 0, level=level)
    ok, failures = _run(config, methods, level)
    mean, bias, mse = _estimation_summary(config, ok)
    coverage = {
        m.value: 100.0 * np.mean(np.vstack([r["cover"][m.value] for r in ok]), axis=0)
        for m in methods
    }
    return StudyReport(config, config.names, config.true_delta, len(ok), failures,
                       mean=mean, bias=bias, mse=mse, coverage=coverage, level=level)


def run_residual_study(config: ScenarioConfig, kinds=("gcs", "rq", "u")) -> StudyReport:
    """Mean, SD, skewness and kurtosis of each residual kind, computed per
    replication and averaged over replications."""
    kinds = tuple(_kind(k) for k in kinds)
    ok, failures = _run(config, kinds=kinds)
    moments = {}
    for k in kinds:
        mat = np.array([r["moments"][k.value] for r in ok])
        moments[k.value] = tuple(math.fsum(mat[:, c]) / mat.shape[0] for c in range(4))
    reference = {}
    for k in kinds:
        if k is ResidualKind.U:
            if len(config.rho) == 1:
                reference["u"] = reference_moments("u", math.exp(config.rho[0])).as_tuple()
        else:
            reference[k.value] = reference_moments(k).as_tuple()
    return StudyReport(config, config.names, config.true_delta, len(ok), failures,
                       residual_moments=moments, reference=reference)


def with_reps(config: ScenarioConfig, reps: int) -> ScenarioConfig:
    return replace(config, reps=reps)
