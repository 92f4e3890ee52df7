"""Pointwise intervals and simultaneous bands from bootstrap deviations."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri

from .sgd import StateError


class InsufficientEnsembleError(StateError):
    """Fewer than two bootstrap draws."""


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    lower: float
    upper: float
    level: float
    method: str

    def __post_init__(self):
        for name in ("center", "lower", "upper", "level"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ConfidenceBand:
    grid: np.ndarray
    center_values: np.ndarray
    lower_values: np.ndarray
    upper_values: np.ndarray
    level: float
    mode: str
    meta: dict = field(default_factory=dict)

    @property
    def width(self) -> np.ndarray:
        return self.upper_values - self.lower_values

    def covers(self, values) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all((self.lower_values <= v) & (v <= self.upper_values)))

    def to_dict(self) -> dict:
        return {"grid": self.grid.tolist(), "center": self.center_values.tolist(),
                "lower": self.lower_values.tolist(), "upper": self.upper_values.tolist(),
                "level": self.level, "mode": self.mode, **self.meta}


def _check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    return level


def normal_quantile(p: float) -> float:
    """Standard normal inverse CDF."""
    return float(ndtri(p))


def empirical_quantile(values, q: float) -> float:
    """Order statistic number ceil(q * J) (1-based) of the sorted values.

    No interpolation; q * J is rounded to 12 significant digits first so that
    e.g. 0.95 * 20 is treated as exactly 19.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise StateError("quantile of an empty sample")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    k = _rank(q, v.size)
    return float(np.partition(v, k - 1)[k - 1])


def _rank(q: float, J: int) -> int:
    return min(max(int(math.ceil(round(q * J, 9))), 1), J)


def normal_interval(center: float, bootstrap_evals, level: float = 0.95) -> ConfidenceInterval:
    """center +/- z_{1-alpha/2} * sqrt(T) with T = sum (f_b - center)^2 / (J - 1)."""
    level = _check_level(level)
    ev = np.asarray(bootstrap_evals, dtype=float).ravel()
    if ev.size < 2:
        raise InsufficientEnsembleError("normal interval needs J >= 2")
    T = float(np.sum((ev - center) ** 2) / (ev.size - 1))
    half = normal_quantile(1.0 - (1.0 - level) / 2.0) * math.sqrt(T)
    return ConfidenceInterval(float(center), center - half, center + half, level, "normal")


def percentile_interval(center: float, bootstrap_evals, level: float = 0.95,
                        paper_literal: bool = False) -> ConfidenceInterval:
    """Percentile interval from the deviations d_j = f_b - center.

    Default orientation is [center + C_{a/2}, center + C_{1-a/2}]. With
    ``paper_literal`` the printed form [center - C_{a/2}, center + C_{1-a/2}]
    is returned; its endpoints may be out of order, in which case they are
    reported as given (lower may exceed upper).
    """
    level = _check_level(level)
    d = np.asarray(bootstrap_evals, dtype=float).ravel() - center
    if d.size < 2:
        raise InsufficientEnsembleError("percentile interval needs J >= 2")
    a = 1.0 - level
    lo_q, hi_q = empirical_quantile(d, a / 2.0), empirical_quantile(d, 1.0 - a / 2.0)
    if paper_literal:
        return ConfidenceInterval(float(center), center - lo_q, center + hi_q, level, "percentile_literal")
    return ConfidenceInterval(float(center), center + lo_q, center + hi_q, level, "percentile")


def pointwise_intervals(centers, evals, level: float = 0.95):
    """Normal and percentile intervals for each column of a (J, m) evaluation matrix.

    Returns ``(normal, percentile)``, each an (m, 2) array of [lower, upper].
    """
    level = _check_level(level)
    c = np.asarray(centers, dtype=float)
    d = np.asarray(evals, dtype=float) - c[None, :]
    J = d.shape[0]
    if J < 2:
        raise InsufficientEnsembleError("intervals need J >= 2")
    a = 1.0 - level
    half = normal_quantile(1.0 - a / 2.0) * np.sqrt(np.sum(d * d, axis=0) / (J - 1))
    normal = np.stack([c - half, c + half], axis=1)
    ds = np.sort(d, axis=0)
    lo, hi = ds[_rank(a / 2.0, J) - 1], ds[_rank(1.0 - a / 2.0, J) - 1]
    percentile = np.stack([c + lo, c + hi], axis=1)
    return normal, percentile


def simultaneous_band(grid, center_values, deviation_matrix, level: float = 0.95,
                      mode: str = "symmetric") -> ConfidenceBand:
    """Band from s_j = max_m |deviation(j, m)|.

    ``symmetric``: center +/- Q_{1-a}(s). ``paper_literal``:
    [center - Q_{a/2}(s), center + Q_{1-a/2}(s)].
    """
    level = _check_level(level)
    g = np.asarray(grid, dtype=float).ravel()
    c = np.asarray(center_values, dtype=float).ravel()
    D = np.asarray(deviation_matrix, dtype=float)
    if D.ndim != 2 or D.shape[1] != g.size or c.size != g.size:
        raise StateError(f"band inputs disagree: grid {g.size}, centers {c.size}, deviations {D.shape}")
    if D.shape[0] < 2:
        raise InsufficientEnsembleError("band needs J >= 2")
    if g.size > 1 and np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing")
    s = np.max(np.abs(D), axis=1)
    a = 1.0 - level
    if mode == "symmetric":
        q = empirical_quantile(s, 1.0 - a)
        lo, hi = c - q, c + q
    elif mode in ("paper_literal", "paper"):
        mode = "paper_literal"
        lo, hi = c - empirical_quantile(s, a / 2.0), c + empirical_quantile(s, 1.0 - a / 2.0)
    else:
        raise ValueError(f"unknown band mode {mode!r}")
    return ConfidenceBand(g, c, lo, hi, level, mode)


def intervals_to_json(intervals, points=None) -> str:
    rows = []
    for k, ci in enumerate(intervals):
        row = ci.to_dict()
        if points is not None:
            row["x"] = float(points[k])
        rows.append(row)
    return json.dumps(rows)


def intervals_to_csv(intervals, points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "center", "lower", "upper", "level", "method"])
    for x, ci in zip(points, intervals):
        w.writerow([repr(float(x)), repr(ci.center), repr(ci.lower), repr(ci.upper), ci.level, ci.method])
    return buf.getvalue()


def band_to_csv(band: ConfidenceBand) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "center", "lower", "upper", "level", "mode"])
    for row in zip(band.grid, band.center_values, band.lower_values, band.upper_values):
        w.writerow([repr(float(v)) for v in row] + [band.level, band.mode])
    return buf.getvalue()
