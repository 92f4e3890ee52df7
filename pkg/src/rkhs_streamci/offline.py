"""Offline kernel ridge regression with residual bootstrap intervals, and the
online-versus-refit timing comparison.

The offline fit minimises (1/t) sum (y_i - f(x_i))^2 + lambda ||f||_H^2 over
the same RKHS as the online estimator, so the dual coefficients solve
(G + t lambda I) c = y.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .bootstrap import BootstrapEnsemble, child_seed, make_rng
from .inference import ConfidenceInterval, InsufficientEnsembleError, normal_interval, percentile_interval
from .mercer import ConfigurationError, MercerBasis
from .schedules import StepSchedule, effective_regularization, steps
from .sgd import check_points

JITTER = 1e-10


class NumericalError(ArithmeticError):
    """Ridge system could not be factorised."""


@dataclass
class KrrFit:
    design_points: np.ndarray
    dual_coeffs: np.ndarray
    lam: float
    residual_sd: float
    basis: MercerBasis
    fitted: np.ndarray = field(repr=False)
    _factor: tuple = field(default=None, repr=False)

    @property
    def t(self) -> int:
        return self.design_points.size


def _factor(gram: np.ndarray, t: int, lam: float):
    a = gram + (t * lam + JITTER) * np.eye(t)
    try:
        return cho_factor(a, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NumericalError(f"ridge system not positive definite: {exc}") from exc


def krr_fit(xs, ys, lam: float, basis: MercerBasis) -> KrrFit:
    """Kernel ridge fit by Cholesky factorisation of G + (t lambda + jitter) I."""
    x = check_points(xs)
    y = np.asarray(ys, dtype=float).ravel()
    if x.size == 0 or x.size != y.size:
        raise ConfigurationError("need matching, nonempty x and y")
    if not lam > 0:
        raise ConfigurationError("lambda must be positive")
    t = x.size
    gram = basis.gram(x)
    fac = _factor(gram, t, lam)
    c = cho_solve(fac, y, check_finite=False)
    fitted = gram @ c
    sd = math.sqrt(float(np.sum((y - fitted) ** 2)) / t)
    return KrrFit(x, c, float(lam), sd, basis, fitted, fac)


def krr_eval(fit: KrrFit, x):
    """sum_j c_j K(X_j, x)."""
    pts = check_points(x)
    out = fit.basis.gram(pts, fit.design_points) @ fit.dual_coeffs
    return float(out[0]) if np.ndim(x) == 0 else out


def ridge_objective(fit: KrrFit, ys, coeffs=None) -> float:
    """(1/t) ||y - G c||^2 + lambda c' G c."""
    c = fit.dual_coeffs if coeffs is None else np.asarray(coeffs, dtype=float)
    gram = fit.basis.gram(fit.design_points)
    r = np.asarray(ys, dtype=float) - gram @ c
    return float(r @ r / fit.t + fit.lam * c @ gram @ c)


def residual_bootstrap_intervals(fit: KrrFit, J: int, level: float, z0: float, method: str = "BN",
                                 rng=None, refactor: bool = True) -> ConfidenceInterval:
    """Offline BN (normal) or BP (percentile) interval at z0.

    Synthetic responses Y = fitted + N(0, residual_sd^2) at the original design
    are refitted ``J`` times. BP uses quantiles of the refits around their own
    mean, added to the fit value. ``refactor`` repeats the factorisation for each
    refit, as a generic refit would; otherwise the factor is reused.
    """
    if J < 2:
        raise InsufficientEnsembleError("need J >= 2 refits")
    method = method.upper()
    if method not in ("BN", "BP"):
        raise ConfigurationError("method must be BN or BP")
    rng = rng if isinstance(rng, np.random.Generator) else make_rng(rng)
    k0 = fit.basis.gram(check_points([z0]), fit.design_points)[0]
    center = float(k0 @ fit.dual_coeffs)
    gram = fit.basis.gram(fit.design_points) if refactor else None
    evals, failures = [], 0
    for _ in range(J):
        ystar = fit.fitted + fit.residual_sd * rng.standard_normal(fit.t)
        try:
            fac = _factor(gram, fit.t, fit.lam) if refactor else fit._factor
            c = cho_solve(fac, ystar, check_finite=False)
        except NumericalError:
            failures += 1
            continue
        evals.append(float(k0 @ c))
    if len(evals) < max(2, J / 2):
        raise NumericalError(f"{failures} of {J} refits failed")
    if method == "BN":
        ci = normal_interval(center, evals, level)
    else:
        # deviations are taken from the bootstrap mean, which removes the
        # shift caused by smoothing the already smoothed fit a second time
        ev = np.asarray(evals)
        ci = percentile_interval(center, center + ev - ev.mean(), level)
    return ConfidenceInterval(ci.center, ci.lower, ci.upper, ci.level, f"offline_{method}")


# -- timing comparison -------------------------------------------------------

@dataclass
class BenchConfig:
    """Settings of the online-versus-offline cost comparison."""

    checkpoints: list = field(default_factory=lambda: [250, 500, 1000, 2000])
    J: int = 300
    schedule: StepSchedule | None = None
    basis: MercerBasis | None = None
    seed: int = 7
    case_id: int = 1
    sigma2: float = 0.2
    refit_repeats: int = 3
    refit_sizes: int = 14


def _slope(t, y) -> float:
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def _refit_seconds(t: int, basis: MercerBasis, lam: float, repeats: int, rng) -> float:
    x = rng.random(t)
    gram = basis.gram(x)
    y = rng.standard_normal(t)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fac = _factor(gram, t, lam)
        cho_solve(fac, y, check_finite=False)
        best = min(best, time.perf_counter() - t0)
    return best


def timing_bench(config: BenchConfig | None = None) -> dict:
    """Cumulative cost of producing bootstrap inference after every arrival.

    Online: wall-clock of one pass of the reference plus J-trajectory ensemble,
    read at each checkpoint. Offline: J ridge refits (one factorisation each)
    after every arrival s <= t. The per-refit time r(s) is measured on a
    geometric grid of sizes and log-log interpolated, and the cumulative
    cost is sum_{s<=t} J r(s); running all of those refits would take hours.
    """
    from .simulate import default_schedule, harness_basis, truth_eval

    cfg = config or BenchConfig()
    basis = cfg.basis or harness_basis()
    sched = cfg.schedule or default_schedule(basis)
    ts = sorted(int(t) for t in cfg.checkpoints)
    T = ts[-1]
    rng = make_rng(child_seed(cfg.seed, 0))
    x = rng.random(T)
    y = truth_eval(cfg.case_id, x) + math.sqrt(cfg.sigma2) * rng.standard_normal(T)
    gam = steps(sched, T, horizon=T)

    ens = BootstrapEnsemble(basis, cfg.J, "gaussian", seed=child_seed(cfg.seed, 1), capacity=T)
    online_sec, online_ops = [], []
    elapsed, done = 0.0, 0
    for t in ts:
        t0 = time.perf_counter()
        ens.ingest_many(x[done:t], y[done:t], gam[done:t])
        elapsed += time.perf_counter() - t0
        done = t
        online_sec.append(elapsed)
        online_ops.append(ens.kernel_evals)

    sizes = np.unique(np.geomspace(8, T, cfg.refit_sizes).astype(int))
    lam = effective_regularization(sched, T)
    per = np.array([_refit_seconds(int(s), basis, lam, cfg.refit_repeats, rng) for s in sizes])
    all_s = np.arange(1, T + 1)
    per_all = np.exp(np.interp(np.log(all_s), np.log(sizes), np.log(per)))
    cum = np.cumsum(cfg.J * per_all)
    offline_sec = [float(cum[t - 1]) for t in ts]
    cum_ops = np.cumsum(cfg.J * all_s.astype(float) ** 3 / 3.0)
    offline_ops = [float(cum_ops[t - 1]) for t in ts]

    rows = []
    for k, t in enumerate(ts):
        rows.append({"t": t, "method": "online", "cumulative_seconds": online_sec[k], "op_count": online_ops[k]})
        rows.append({"t": t, "method": "offline_refit", "cumulative_seconds": offline_sec[k], "op_count": offline_ops[k]})
    return {
        "config": {"checkpoints": ts, "J": cfg.J, "seed": cfg.seed, "basis": basis.to_dict(),
                   "offline_model": "kernel ridge, Cholesky per bootstrap refit, refit after every arrival"},
        "rows": rows,
        "refit_curve": {"sizes": sizes.tolist(), "seconds": per.tolist()},
        "online_slope": _slope(ts, online_sec),
        "offline_slope": _slope(ts, offline_sec),
        "online_op_slope": _slope(ts, online_ops),
        "offline_op_slope": _slope(ts, offline_ops),
    }


def cost_report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "method", "cumulative_seconds", "op_count"])
    for r in report["rows"]:
        w.writerow([r["t"], r["method"], repr(r["cumulative_seconds"]), repr(r["op_count"])])
    return buf.getvalue()
