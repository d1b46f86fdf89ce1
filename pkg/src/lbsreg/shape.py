"""Modes, bimodality and hazard-rate monotonicity of the LBS density."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import distribution as dist
from .distribution import LbsParams
from .errors import DomainError

__all__ = [
    "ModeKind",
    "ModeReport",
    "HazardShapeReport",
    "cubic_coefficients",
    "cubic",
    "discriminant",
    "classify_modes",
    "a_derivatives",
    "hazard_shape",
]


class ModeKind(str, enum.Enum):
    UNIMODAL = "Unimodal"
    BIMODAL = "Bimodal"


@dataclass(frozen=True)
class ModeReport:
    kind: ModeKind
    alpha: float
    theta: float
    discriminant: float
    mode: float | None = None
    modes: tuple[float, float] | None = None
    antimode: float | None = None

    def as_rows(self) -> list[tuple[str, float | str]]:
        rows: list[tuple[str, float | str]] = [
            ("alpha", self.alpha),
            ("theta", self.theta),
            ("kind", self.kind.value),
            ("discriminant", self.discriminant),
        ]
        if self.kind is ModeKind.UNIMODAL:
            rows.append(("mode", self.mode))
        else:
            rows += [
                ("mode_lower", self.modes[0]),
                ("mode_upper", self.modes[1]),
                ("antimode", self.antimode),
            ]
        return rows


@dataclass(frozen=True)
class HazardShapeReport:
    increasing: list[tuple[float, float]] = field(default_factory=list)
    decreasing: list[tuple[float, float]] = field(default_factory=list)
    turning_points: list[float] = field(default_factory=list)

    def direction_at(self, t: float) -> str | None:
        for lo, hi in self.increasing:
            if lo <= t <= hi:
                return "increasing"
        for lo, hi in self.decreasing:
            if lo <= t <= hi:
                return "decreasing"
        return None


def cubic_coefficients(params: LbsParams) -> tuple[float, float, float, float]:
    """Coefficients (highest degree first) of the cubic whose roots are the
    critical points of the density."""
    al2m1 = params.alpha**2 - 1.0
    th = params.theta
    return (1.0, -th * al2m1, th**2 * al2m1, -(th**3))


def cubic(params: LbsParams, t):
    """Evaluate the critical-point cubic in the factored form
    ``(t - theta) (t^2 - theta (alpha^2 - 2) t + theta^2)``."""
    th = params.theta
    t = np.asarray(t, dtype=float)
    return (t - th) * (t * t - th * (params.alpha**2 - 2.0) * t + th * th)


def discriminant(params: LbsParams) -> float:
    al, th = params.alpha, params.theta
    return th**6 * al**2 * (al - 2.0) ** 3 * (al + 2.0) ** 3


def classify_modes(params: LbsParams) -> ModeReport:
    """Unimodal with mode theta when alpha <= 2, otherwise bimodal with
    antimode theta."""
    al, th = float(params.alpha), float(params.theta)
    delta = discriminant(params)
    if al <= 2.0:
        return ModeReport(ModeKind.UNIMODAL, al, th, delta, mode=th)
    s = th * (al * al - 2.0)
    root = th * al * math.sqrt((al - 2.0) * (al + 2.0))
    t_plus = 0.5 * (s + root)
    # product of the quadratic roots is theta^2
    t_minus = th * th / t_plus
    return ModeReport(
        ModeKind.BIMODAL, al, th, delta, modes=(t_minus, t_plus), antimode=th
    )


def a_derivatives(params: LbsParams, t, order: int = 0):
    """``a(t)`` and its first three derivatives."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be > 0")
    al, th = params.alpha, params.theta
    r1 = np.sqrt(t / th)
    r2 = np.sqrt(th / t)
    if order == 0:
        out = (r1 - r2) / al
    elif order == 1:
        out = (r1 + r2) / (2.0 * al * t)
    elif order == 2:
        out = -(r1 + 3.0 * r2) / (4.0 * al * t**2)
    elif order == 3:
        out = 3.0 * (r1 + 5.0 * r2) / (8.0 * al * t**3)
    else:
        raise DomainError("only orders 0 to 3 are supported")
    return float(out) if out.ndim == 0 else out


def _log_hazard_slope(params: LbsParams, t: np.ndarray) -> np.ndarray:
    # derivative of log hazard in t, central differences with step 1e-5 t
    h = 1e-5 * t
    up = dist.log_hazard(params, t + h)
    dn = dist.log_hazard(params, t - h)
    return (up - dn) / (2.0 * h)


def hazard_shape(
    params: LbsParams, scan_range: tuple[float, float], grid_size: int = 512
) -> HazardShapeReport:
    """Locate monotone stretches of the hazard rate on ``scan_range``.

    The sign of the hazard derivative is scanned on a log-spaced grid and every
    sign change is refined by bisection to 1e-8 relative.
    """
    lo, hi = float(scan_range[0]), float(scan_range[1])
    if not (0 < lo < hi) or not math.isfinite(hi):
        raise DomainError("scan range must satisfy 0 < lo < hi < inf")
    if grid_size < 16:
        raise DomainError("grid_size must be >= 16")
    grid = np.geomspace(lo, hi, grid_size)
    slope = _log_hazard_slope(params, grid)
    sign = np.sign(slope)
    # flat (underflowed) stretches inherit the previous sign
    for i in range(1, len(sign)):
        if sign[i] == 0 or not np.isfinite(slope[i]):
            sign[i] = sign[i - 1]
    turning: list[float] = []
    for i in range(len(grid) - 1):
        if sign[i] != sign[i + 1] and sign[i] != 0 and sign[i + 1] != 0:
            a, b = grid[i], grid[i + 1]
            sa = sign[i]
            while (b - a) > 1e-8 * a:
                m = 0.5 * (a + b)
                sm = np.sign(_log_hazard_slope(params, np.array([m]))[0])
                if sm == sa:
                    a = m
                else:
                    b = m
            turning.append(float(0.5 * (a + b)))
    edges = [lo, *turning, hi]
    inc: list[tuple[float, float]] = []
    dec: list[tuple[float, float]] = []
    first = sign[0] if sign[0] != 0 else 1.0
    for k in range(len(edges) - 1):
        direction = first if k % 2 == 0 else -first
        (inc if direction > 0 else dec).append((edges[k], edges[k + 1]))
    return HazardShapeReport(increasing=inc, decreasing=dec, turning_points=turning)
