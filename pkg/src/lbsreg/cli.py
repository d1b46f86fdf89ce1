"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import distribution as dist
from .dataio import (
    CsvParseError,
    ModelConfig,
    fmt_num,
    ingest_csv,
    load_config,
    summarize,
    synthetic_evaporation,
    write_csv,
    write_dataset,
)
from .diagnostics import envelopes, residuals
from .errors import DomainError, LbsError, UnavailableError
from .report import build_spec, fit_report
from .regression import fit
from .shape import classify_modes
from .simstudy import run_coverage_study, run_estimation_study, run_residual_study, scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _load(args) -> tuple[ModelConfig, object]:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    for key in ("ci", "level", "boot"):
        val = getattr(args, key, None)
        if val is not None:
            if key == "ci":
                val = [v.strip().upper() for v in val.split(",") if v.strip()]
            cfg = replace(cfg, **{key: val})
    cfg.validate()
    return cfg, ingest_csv(args.data)


def cmd_fit(args) -> int:
    cfg, data = _load(args)
    report = fit_report(cfg, data, args.out_dir, threads=args.threads)
    print(report.table())
    for h, q, p in report.ljung_box:
        print(f"Ljung-Box lag {h}: Q = {q:.4f}, p = {p:.4f}")
    if not report.fit.converged:
        print(f"fit did not converge: {report.fit.message}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_residuals(args) -> int:
    cfg, data = _load(args)
    spec = build_spec(cfg, data)
    res = fit(spec)
    if not res.converged:
        print(f"fit did not converge: {res.message}", file=sys.stderr)
        return EXIT_CONVERGENCE
    kind = args.kind
    header = ["index", "residual", "theoretical_quantile", "lo", "median", "hi"]
    if args.envelope > 0:
        band = envelopes(spec, res, (kind,), M=args.envelope, level=args.level, seed=cfg.seed)
        band = next(iter(band.values()))
        rows = zip(range(1, spec.n + 1), band.observed, band.theoretical, band.lo, band.median, band.hi)
    else:
        r = np.sort(residuals(spec, res)[kind])
        rows = ((i + 1, v, "", "", "", "") for i, v in enumerate(r))
    if args.out:
        write_csv(args.out, header, rows)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(fmt_num(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return EXIT_OK


def cmd_simulate(args) -> int:
    overrides = dict(reps=args.reps, seed=args.seed, threads=args.threads)
    if args.boot is not None:
        overrides["boot"] = args.boot
    cfg = scenario(args.scenario, args.n, args.block, **overrides)
    table = args.scenario.lower()
    study = args.study or {"table1": "estimation", "table2": "estimation",
                           "table3": "coverage", "table4": "coverage",
                           "table5": "residual", "table6": "residual"}[table]
    if study == "estimation":
        rep = run_estimation_study(cfg)
    elif study == "coverage":
        rep = run_coverage_study(cfg, [m.strip() for m in args.methods.split(",")], args.level)
    else:
        rep = run_residual_study(cfg)
    text = rep.to_csv()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dist(args) -> int:
    params = dist.LbsParams(args.alpha, args.theta)
    op = args.op
    if op == "modes":
        for key, val in classify_modes(params).as_rows():
            print(f"{key},{fmt_num(val) if isinstance(val, float) else val}")
        return EXIT_OK
    if op == "sample":
        rng = np.random.default_rng(args.seed)
        values = dist.sample(params, args.n, rng)
        for v in values:
            print(fmt_num(v))
        return EXIT_OK
    if op == "quantile":
        if args.u is None:
            raise DomainError("quantile needs --u")
        xs = _floats(args.u)
        ys = dist.quantile(params, np.array(xs))
    else:
        if args.t is None:
            raise DomainError(f"{op} needs --t")
        xs = _floats(args.t)
        fn = {"pdf": dist.pdf, "cdf": dist.cdf, "sf": dist.survival, "hazard": dist.hazard}[op]
        ys = fn(params, np.array(xs))
    print(f"{'u' if op == 'quantile' else 't'},{op}")
    for x, y in zip(xs, np.atleast_1d(ys)):
        print(f"{fmt_num(x)},{fmt_num(y)}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    data = ingest_csv(args.data)
    cols = [args.column] if args.column else data.names
    print("variable,n,min,median,mean,max,sd,cv_percent,cs,ck_excess")
    for c in cols:
        s = summarize(data, c)
        print(",".join([c, str(s.n)] + [fmt_num(v) for v in s.as_row()[1:]]))
    return EXIT_OK


def cmd_synth(args) -> int:
    data = synthetic_evaporation(args.n, args.seed)
    write_dataset(args.out, data)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lbsreg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def model_args(p):
        p.add_argument("--config", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("fit", help="fit the regression model and write a report")
    model_args(p)
    p.add_argument("--out-dir")
    p.add_argument("--ci", help="comma list of aci,pci,bci")
    p.add_argument("--level", type=float)
    p.add_argument("--boot", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("residuals", help="residuals with a simulated QQ envelope")
    model_args(p)
    p.add_argument("--kind", choices=["gcs", "rq", "u"], default="gcs")
    p.add_argument("--envelope", type=int, default=100, metavar="M")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("simulate", help="Monte Carlo study for a table preset")
    p.add_argument("--scenario", required=True,
                   choices=["table1", "table2", "table3", "table4", "table5", "table6"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--block", type=float, help="rho1 (tables 1/3/5) or alpha (2/4/6)")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--boot", type=int)
    p.add_argument("--seed", type=int, default=20240501)
    p.add_argument("--study", choices=["estimation", "coverage", "residual"])
    p.add_argument("--methods", default="ACI")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dist", help="distribution functions and mode report")
    p.add_argument("op", choices=["pdf", "cdf", "sf", "hazard", "quantile", "sample", "modes"])
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--t", help="comma list of points")
    p.add_argument("--u", help="comma list of probabilities")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("summarize", help="summary statistics of data columns")
    p.add_argument("--data", required=True)
    p.add_argument("--column")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("synth", help="write the synthetic evaporation look-alike data")
    p.add_argument("--n", type=int, default=70)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CsvParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except UnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (LbsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
