"""CSV ingestion and emission, summary statistics, model configuration files
and a synthetic stand-in for the evaporation data."""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import distribution as dist
from .errors import DomainError

__all__ = [
    "CsvParseError",
    "Dataset",
    "ModelConfig",
    "Summary",
    "ingest_csv",
    "write_csv",
    "fmt_num",
    "summarize",
    "load_config",
    "synthetic_evaporation",
    "SYNTHETIC_BETA",
    "SYNTHETIC_RHO",
]

_MISSING = {"", "na", "nan", "null", "none", "."}


class CsvParseError(DomainError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message}" + (f" ({', '.join(loc)})" if loc else ""))
        self.row = row
        self.column = column


@dataclass
class Dataset:
    names: list[str]
    columns: dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DomainError(f"no column named {name!r}") from None


def fmt_num(x: float) -> str:
    """Shortest repr that round-trips (at most 17 significant digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def ingest_csv(path: str | Path) -> Dataset:
    """Read a headed CSV of numeric columns.

    Rows are numbered from 1 for the first data line. Missing cells (empty,
    NA, NaN) and non-numeric cells raise :class:`CsvParseError` naming the
    location.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file") from None
        header = [h.strip() for h in header]
        if not any(header):
            raise CsvParseError("empty header")
        seen = set()
        for h in header:
            if not h:
                raise CsvParseError("blank column name")
            if h in seen:
                raise CsvParseError(f"duplicate column name {h!r}", column=h)
            seen.add(h)
        data: list[list[float]] = [[] for _ in header]
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvParseError(
                    f"expected {len(header)} fields, found {len(row)}", row=rownum
                )
            for j, cell in enumerate(row):
                cell = cell.strip()
                if cell.lower() in _MISSING:
                    raise CsvParseError("missing value", row=rownum, column=header[j])
                try:
                    data[j].append(float(cell))
                except ValueError:
                    raise CsvParseError(
                        f"non-numeric value {cell!r}", row=rownum, column=header[j]
                    ) from None
    if not data[0]:
        raise CsvParseError("no data rows")
    return Dataset(names=header, columns={h: np.array(c) for h, c in zip(header, data)})


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_dataset(path: str | Path, dataset: Dataset) -> Path:
    cols = [dataset.columns[h] for h in dataset.names]
    return write_csv(path, dataset.names, zip(*cols))


@dataclass(frozen=True)
class Summary:
    n: int
    min: float
    median: float
    mean: float
    max: float
    sd: float
    cv: float
    cs: float
    ck_excess: float
    degenerate: bool = False

    def as_row(self) -> list[float]:
        return [self.n, self.min, self.median, self.mean, self.max, self.sd, self.cv,
                self.cs, self.ck_excess]


def summarize(dataset: Dataset, column: str) -> Summary:
    """Descriptive statistics. SD uses the n-1 divisor; CV is 100 sd/mean;
    skewness is m3/m2^1.5 and kurtosis is reported in excess form m4/m2^2 - 3."""
    x = np.asarray(dataset[column], dtype=float)
    if x.size == 0:
        raise DomainError("empty column")
    mu = math.fsum(x) / x.size
    d = x - mu
    m2 = math.fsum(d**2) / x.size
    sd = math.sqrt(m2 * x.size / (x.size - 1)) if x.size > 1 else 0.0
    if m2 == 0.0:
        cs = ck = math.nan
        degenerate = True
    else:
        cs = (math.fsum(d**3) / x.size) / m2**1.5
        ck = (math.fsum(d**4) / x.size) / m2**2 - 3.0
        degenerate = False
    cv = 100.0 * sd / mu if mu != 0 else math.nan
    return Summary(
        n=int(x.size), min=float(x.min()), median=float(np.median(x)), mean=mu,
        max=float(x.max()), sd=sd, cv=cv, cs=cs, ck_excess=ck, degenerate=degenerate,
    )


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]


@dataclass
class ModelConfig:
    """Model and analysis settings, read from a flat ``key = value`` file."""

    response: str
    theta_covariates: list[str] = field(default_factory=list)
    alpha_covariates: list[str] = field(default_factory=list)
    theta_link: str = "log"
    alpha_link: str = "log"
    ci: list[str] = field(default_factory=lambda: ["ACI"])
    level: float = 0.95
    boot: int = 500
    seed: int = 1
    envelope: int = 100
    residual_kinds: list[str] = field(default_factory=lambda: ["gcs", "rq", "u"])
    lags: list[int] = field(default_factory=lambda: [4, 16])
    intercept: bool = True

    def validate(self, dataset: Dataset | None = None) -> None:
        if not 0 < self.level < 1:
            raise DomainError("level must lie in (0, 1)")
        if self.boot < 0 or self.envelope < 0:
            raise DomainError("boot and envelope must be >= 0")
        bad = [m for m in self.ci if m.upper() not in ("ACI", "PCI", "BCI")]
        if bad:
            raise DomainError(f"unknown interval method(s): {bad}")
        if dataset is not None:
            for col in [self.response, *self.theta_covariates, *self.alpha_covariates]:
                if col not in dataset.columns:
                    raise DomainError(f"column {col!r} not in data")
            if np.any(dataset[self.response] <= 0):
                raise DomainError(f"response {self.response!r} must be strictly positive")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ModelConfig:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
        parser.read_string("[model]\n" + text)
        raw = dict(parser["model"])
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise DomainError(f"unknown config key(s): {sorted(unknown)}")
        if "response" not in raw:
            raise DomainError("config needs a 'response' key")
        kw: dict = {}
        for key, value in raw.items():
            if key in ("theta_covariates", "alpha_covariates", "residual_kinds"):
                kw[key] = _split_list(value)
            elif key == "ci":
                kw[key] = [v.upper() for v in _split_list(value)]
            elif key == "lags":
                kw[key] = [int(v) for v in _split_list(value)]
            elif key in ("boot", "seed", "envelope"):
                kw[key] = int(value)
            elif key == "level":
                kw[key] = float(value)
            elif key == "intercept":
                kw[key] = value.strip().lower() in ("1", "true", "yes", "on")
            else:
                kw[key] = value.strip()
        cfg = cls(**kw)
        cfg.validate()
        return cfg


def load_config(path: str | Path) -> ModelConfig:
    return ModelConfig.from_text(Path(path).read_text())


# generating coefficients for the synthetic stand-in (theta: 5, alpha: 3)
SYNTHETIC_BETA = (6.743, 0.0015, 0.0011, 0.0434, -0.0366)
SYNTHETIC_RHO = (1.0396, -0.0130, -0.2324)


def synthetic_evaporation(n: int = 70, seed: int = 0) -> Dataset:
    """Synthetic monthly look-alike of the evaporation data (not real data).

    Columns ``evaporation``, ``evapotranspiration`` (x1), ``insolation`` (x2),
    ``cloudiness`` (x3) and ``humidity`` (x4); the response follows the LBS
    model with log links, theta on x1..x4 and alpha on x2, x3.
    """
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(20.0, 140.0, n)
    x2 = rng.uniform(100.0, 300.0, n)
    x3 = rng.uniform(1.0, 9.0, n)
    x4 = rng.uniform(40.0, 85.0, n)
    X = np.column_stack([np.ones(n), x1, x2, x3, x4])
    W = np.column_stack([np.ones(n), x2, x3])
    theta = np.exp(X @ np.array(SYNTHETIC_BETA))
    alpha = np.exp(W @ np.array(SYNTHETIC_RHO))
    t = dist.sample(dist.LbsParams(alpha=alpha, theta=theta), rng=rng)
    names = ["evaporation", "evapotranspiration", "insolation", "cloudiness", "humidity"]
    return Dataset(names=names, columns=dict(zip(names, [t, x1, x2, x3, x4])))
