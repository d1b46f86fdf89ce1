"""End-to-end analysis of a dataset: fit, intervals, residuals, envelopes and
serial-correlation checks, with plot-ready CSV output."""

from __future__ import annotations

import hashlib
import json
import platform
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import distribution as dist
from .dataio import Dataset, ModelConfig, fmt_num, write_csv
from .diagnostics import EnvelopeBand, ResidualSet, envelopes, ljung_box, raw_residuals, residuals
from .errors import UnavailableError
from .inference import IntervalEstimate, aci, bca_acceleration, bci, jackknife, parametric_bootstrap, pci
from .links import get_link
from .regression import FitResult, RegressionSpec, fit, fitted_params

__all__ = ["FitReport", "build_spec", "fit_report"]


def build_spec(config: ModelConfig, dataset: Dataset) -> RegressionSpec:
    config.validate(dataset)
    n = dataset.n
    cols_x, names_x = [], []
    cols_w, names_w = [], []
    if config.intercept:
        cols_x.append(np.ones(n))
        names_x.append("theta:(Intercept)")
        cols_w.append(np.ones(n))
        names_w.append("alpha:(Intercept)")
    for c in config.theta_covariates:
        cols_x.append(dataset[c])
        names_x.append(f"theta:{c}")
    for c in config.alpha_covariates:
        cols_w.append(dataset[c])
        names_w.append(f"alpha:{c}")
    return RegressionSpec(
        dataset[config.response],
        np.column_stack(cols_x),
        np.column_stack(cols_w),
        get_link(config.theta_link),
        get_link(config.alpha_link),
        tuple(names_x),
        tuple(names_w),
    )


@dataclass
class FitReport:
    spec: RegressionSpec
    fit: FitResult
    intervals: dict[str, list[IntervalEstimate]] = field(default_factory=dict)
    residuals: ResidualSet | None = None
    envelopes: dict = field(default_factory=dict)
    ljung_box: list[tuple[int, float, float]] = field(default_factory=list)
    bootstrap_failures: int = 0
    files: list[Path] = field(default_factory=list)

    def coefficient_rows(self) -> list[list]:
        se = self.fit.se if self.fit.se is not None else np.full(self.fit.delta.size, np.nan)
        rows = []
        for j, name in enumerate(self.spec.names):
            component, _, label = name.partition(":")
            row = [component, label, float(self.fit.delta[j]), float(se[j])]
            for method, ivs in self.intervals.items():
                iv = ivs[j]
                row += [iv.lower, iv.upper, int(iv.significant)]
            rows.append(row)
        return rows

    def coefficient_header(self) -> list[str]:
        head = ["component", "coefficient", "estimate", "se"]
        for method in self.intervals:
            m = method.lower()
            head += [f"{m}_lower", f"{m}_upper", f"{m}_significant"]
        return head

    def table(self) -> str:
        """Display table rounded to four decimals."""
        lines = []
        head = self.coefficient_header()
        lines.append("  ".join(f"{h:>14}" for h in head))
        for row in self.coefficient_rows():
            cells = []
            for v in row:
                cells.append(f"{v:>14.4f}" if isinstance(v, float) else f"{v!s:>14}")
            lines.append("  ".join(cells))
        return "\n".join(lines)


def _sha256(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.hexdigest()


def fit_report(
    config: ModelConfig,
    dataset: Dataset,
    out_dir: str | Path | None = None,
    *,
    threads: int = 1,
) -> FitReport:
    """Run the full analysis; write CSVs and a manifest when ``out_dir`` is set.

    Files: ``coefficients.csv``, ``residuals.csv``, ``envelope_<kind>.csv``,
    ``ljung_box.csv`` and ``manifest.json``.
    """
    spec = build_spec(config, dataset)
    result = fit(spec)
    report = FitReport(spec=spec, fit=result)
    methods = [m.upper() for m in config.ci]
    if result.converged:
        if "ACI" in methods and result.covariance is not None:
            report.intervals["ACI"] = aci(result, config.level)
        if {"PCI", "BCI"} & set(methods) and config.boot > 0:
            run = parametric_bootstrap(spec, result, config.boot, seed=config.seed, threads=threads)
            report.bootstrap_failures = run.failures
            if run.n_ok >= 2:
                if "PCI" in methods:
                    report.intervals["PCI"] = pci(run, config.level, spec.names)
                if "BCI" in methods:
                    acc = bca_acceleration(jackknife(spec, result))
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RuntimeWarning)
                        report.intervals["BCI"] = bci(run, result, level=config.level,
                                                      acceleration=acc)
        report.residuals = residuals(spec, result)
        if config.envelope > 0 and config.residual_kinds:
            report.envelopes = envelopes(
                spec, result, config.residual_kinds, M=config.envelope,
                level=config.level, seed=config.seed + 1,
            )
        raw = raw_residuals(spec, result)
        for h in config.lags:
            if h < spec.n:
                q, pval = ljung_box(raw, h)
                report.ljung_box.append((h, q, pval))
    if out_dir is not None:
        _emit(report, config, dataset, Path(out_dir))
    return report


def _emit(report: FitReport, config: ModelConfig, dataset: Dataset, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    spec, res = report.spec, report.fit
    files = [write_csv(out / "coefficients.csv", report.coefficient_header(), report.coefficient_rows())]
    if report.residuals is not None:
        params = fitted_params(spec, res.delta)
        mu = dist.mean(params)
        r = report.residuals
        rows = zip(range(1, spec.n + 1), spec.t, r.theta, r.alpha, mu, spec.t - mu, r.gcs, r.rq, r.u)
        files.append(write_csv(
            out / "residuals.csv",
            ["index", "t", "theta_hat", "alpha_hat", "fitted_mean", "raw", "gcs", "rq", "u"],
            rows,
        ))
    for kind, band in report.envelopes.items():
        files.append(_write_band(out / f"envelope_{kind.value}.csv", band))
    if report.ljung_box:
        files.append(write_csv(out / "ljung_box.csv", ["lag", "statistic", "p_value"], report.ljung_box))
    manifest = {
        "package": "lbsreg",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config": config.to_text(),
        "data_rows": dataset.n,
        "data_sha256": _sha256([dataset.columns[h] for h in dataset.names]),
        "converged": res.converged,
        "iterations": res.iterations,
        "gradient_norm": fmt_num(res.gradient_norm),
        "loglik": fmt_num(res.loglik),
        "hessian_source": res.hessian_source,
        "bootstrap_failures": report.bootstrap_failures,
        "warnings": res.warnings,
        "files": [f.name for f in files],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    files.append(path)
    report.files = files


def _write_band(path: Path, band: EnvelopeBand) -> Path:
    rows = zip(range(1, band.observed.size + 1), band.observed, band.theoretical,
               band.lo, band.median, band.hi)
    return write_csv(path, ["index", "residual", "theoretical_quantile", "lo", "median", "hi"], rows)


def require_converged(report: FitReport) -> None:
    if not report.fit.converged:
        raise UnavailableError(f"fit did not converge: {report.fit.message}")
