"""Synthetic streams and Monte Carlo coverage experiments."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import betaln, ndtri
from scipy.stats import ks_2samp

from .bootstrap import BootstrapEnsemble, as_law, child_seed, make_rng, thread_count
from .inference import pointwise_intervals, simultaneous_band
from .mercer import ConfigurationError, DomainError, MercerBasis
from .schedules import StepSchedule, Undersmoothed, schedule_from_dict, schedule_to_dict, steps, validate
from .sgd import StateError

# seed labels for named substreams of the master seed
DATA_STREAM = 0
MULTIPLIER_STREAM = 1

CASES = {
    1: "sin(3 pi x / 2)",
    2: "(b(10,5) + b(7,7) + b(5,10)) / 3",
    3: "(6/19) b(30,17) + (4/10) b(3,11)",
}


def beta_density(p: float, q: float, x):
    """Beta(p, q) density x^(p-1) (1-x)^(q-1) / B(p, q)."""
    if p <= 0 or q <= 0:
        raise ConfigurationError("beta parameters must be positive")
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0) or np.any(xa > 1):
        raise DomainError("beta density is defined on [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        logd = (p - 1) * np.log(xa) + (q - 1) * np.log1p(-xa) - betaln(p, q)
    out = np.exp(logd)
    # endpoints where the log form is 0 * -inf
    if p == 1:
        out = np.where(xa == 0, np.exp(-betaln(p, q)), out)
    if q == 1:
        out = np.where(xa == 1, np.exp(-betaln(p, q)), out)
    return float(out) if out.ndim == 0 else out


def truth_eval(case_id: int, x):
    """Regression function of simulation case 1, 2 or 3."""
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0) or np.any(xa > 1):
        raise DomainError("x must lie in [0, 1]")
    if case_id == 1:
        out = np.sin(1.5 * np.pi * xa)
    elif case_id == 2:
        out = (beta_density(10, 5, xa) + beta_density(7, 7, xa) + beta_density(5, 10, xa)) / 3.0
    elif case_id == 3:
        out = 6.0 / 19.0 * beta_density(30, 17, xa) + 0.4 * beta_density(3, 11, xa)
    else:
        raise ConfigurationError(f"unknown case {case_id!r}; choose 1, 2 or 3")
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def harness_basis(truncation: int = 200, alpha: float = 2.0) -> MercerBasis:
    """Kernel used by the experiments: cosine eigenbasis plus a constant."""
    return MercerBasis(alpha=alpha, truncation=truncation, include_constant=True, pairing="cosine")


def stable_scale(basis: MercerBasis) -> float:
    """Step scale 1 / sup_x K(x, x); keeps gamma_1 K(X, X) <= 1."""
    return 1.0 / basis.sup_diag()


def default_schedule(basis: MercerBasis, epsilon: float = 0.25) -> Undersmoothed:
    return Undersmoothed(epsilon=epsilon, alpha=basis.alpha, scale=stable_scale(basis))


@dataclass
class ExperimentConfig:
    """Settings of a replicated coverage study.

    ``eval_points="stream"`` evaluates pointwise intervals at the replicate's
    own X_t for each checkpoint t; a list of floats gives fixed points.
    ``schedule=None`` selects the undersmoothed default for the basis.
    """

    case_id: int = 1
    n: int = 1500
    checkpoints: list = field(default_factory=lambda: [1500])
    replicates: int = 200
    J: int = 300
    level: float = 0.95
    schedule: StepSchedule | None = None
    sigma2: float = 0.2
    master_seed: int = 20240
    grid_size: int = 100
    eval_points: object = "stream"
    law: str = "gaussian"
    band_mode: str = "symmetric"
    alpha: float = 2.0
    truncation: int = 200
    workers: int | None = None

    def __post_init__(self):
        self.checkpoints = [int(t) for t in self.checkpoints]
        if self.case_id not in CASES:
            raise ConfigurationError(f"unknown case {self.case_id}")
        if self.n < 1 or self.replicates < 1 or self.J < 1:
            raise ConfigurationError("n, replicates and J must be positive")
        if not self.checkpoints or any(t < 1 or t > self.n for t in self.checkpoints):
            raise ConfigurationError("checkpoints must lie in 1..n")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigurationError("checkpoints must be increasing")
        if not 0 < self.level < 1:
            raise ConfigurationError("level must lie in (0, 1)")
        if self.sigma2 < 0:
            raise ConfigurationError("sigma2 must be nonnegative")
        if self.grid_size < 2:
            raise ConfigurationError("grid_size must be at least 2")
        as_law(self.law)
        if isinstance(self.schedule, dict):
            self.schedule = schedule_from_dict(self.schedule)
        if self.schedule is None:
            self.schedule = default_schedule(self.basis)
        validate(self.schedule, mu_max=1.0, horizon=self.n)
        if self.eval_points != "stream":
            pts = np.asarray(self.eval_points, dtype=float).ravel()
            if np.any(pts < 0) or np.any(pts > 1):
                raise ConfigurationError("eval_points must lie in [0, 1]")
            self.eval_points = pts.tolist()

    @property
    def basis(self) -> MercerBasis:
        return harness_basis(self.truncation, self.alpha)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = schedule_to_dict(self.schedule)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys {sorted(extra)}")
        return cls(**d)


def gen_stream(config: ExperimentConfig, replicate_index: int):
    """Arrivals (x, y) of one replicate: x ~ U(0, 1), y = f(x) + N(0, sigma2).

    Noise is an inverse-CDF transform of Philox uniforms.
    """
    rng = make_rng(child_seed(config.master_seed, DATA_STREAM, replicate_index))
    u = rng.random((2, config.n))
    x = u[0]
    eps = math.sqrt(config.sigma2) * ndtri(u[1])
    return x, truth_eval(config.case_id, x) + eps


def _ensemble(config: ExperimentConfig, r: int, J: int | None = None) -> BootstrapEnsemble:
    return BootstrapEnsemble(config.basis, J or config.J, config.law,
                             seed=child_seed(config.master_seed, MULTIPLIER_STREAM, r),
                             capacity=config.n)


def _run_replicate(config: ExperimentConfig, r: int, band: bool) -> list[dict]:
    x, y = gen_stream(config, r)
    gam = steps(config.schedule, config.n, horizon=config.n)
    ens = _ensemble(config, r)
    rows = []
    done = 0
    clock = 0.0
    for t in config.checkpoints:
        t0 = time.perf_counter()
        ens.ingest_many(x[done:t], y[done:t], gam[done:t])
        done = t
        if band:
            grid = config.grid
            vals = ens.eval_averaged_all(grid)
            centers, dev = vals[0], vals[1:] - vals[0]
            b = simultaneous_band(grid, centers, dev, config.level, config.band_mode)
            _, perc = pointwise_intervals(centers, vals[1:], config.level)
            clock += time.perf_counter() - t0
            rows.append({"replicate": r, "checkpoint": t, "method": f"band_{b.mode}",
                         "covered": int(b.covers(truth_eval(config.case_id, grid))),
                         "length": float(np.mean(b.width)), "seconds": clock,
                         "band_ge_percentile": int(np.all(b.width >= perc[:, 1] - perc[:, 0] - 1e-12))})
        else:
            pts = np.array([x[t - 1]]) if config.eval_points == "stream" else np.asarray(config.eval_points)
            vals = ens.eval_averaged_all(pts)
            normal, perc = pointwise_intervals(vals[0], vals[1:], config.level)
            clock += time.perf_counter() - t0
            truth = truth_eval(config.case_id, pts)
            for name, iv in (("normal", normal), ("percentile", perc)):
                for m, p in enumerate(pts):
                    rows.append({"replicate": r, "checkpoint": t, "method": name, "x": float(p),
                                 "covered": int(iv[m, 0] <= truth[m] <= iv[m, 1]),
                                 "length": float(iv[m, 1] - iv[m, 0]), "seconds": clock})
    return rows


@dataclass
class CoverageReport:
    """Per-replicate records plus aggregation by (checkpoint, method)."""

    config: dict
    records: list
    errors: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def aborted(self) -> int:
        return len(self.errors)

    def summary(self) -> list[dict]:
        groups: dict = {}
        for rec in self.records:
            groups.setdefault((rec["checkpoint"], rec["method"]), []).append(rec)
        out = []
        for (t, m), recs in sorted(groups.items()):
            cov = np.array([r["covered"] for r in recs], dtype=float)
            length = np.array([r["length"] for r in recs])
            secs = np.array([r["seconds"] for r in recs])
            out.append({"checkpoint": t, "method": m, "count": len(recs),
                        "coverage": float(cov.mean()),
                        "mean_length": float(length.mean()),
                        "var_length": float(length.var(ddof=1)) if len(recs) > 1 else 0.0,
                        "mean_seconds": float(secs.mean())})
        return out

    def coverage(self, method: str, checkpoint: int | None = None) -> float:
        rows = [s for s in self.summary() if s["method"] == method]
        if not rows:
            raise KeyError(method)
        if checkpoint is None:
            return rows[-1]["coverage"]
        return next(s["coverage"] for s in rows if s["checkpoint"] == checkpoint)

    def mean_length(self, method: str, checkpoint: int) -> float:
        return next(s["mean_length"] for s in self.summary()
                    if s["method"] == method and s["checkpoint"] == checkpoint)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "checkpoint", "method", "covered", "length", "seconds"])
        for r in self.records:
            w.writerow([r["replicate"], r["checkpoint"], r["method"], r["covered"],
                        repr(r["length"]), repr(r["seconds"])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"schema": "coverage-report/1", "config": self.config, "meta": self.meta,
                "summary": self.summary(), "errors": self.errors}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _run(config: ExperimentConfig, band: bool) -> CoverageReport:
    workers = config.workers or thread_count()

    def one(r):
        try:
            return r, _run_replicate(config, r, band), None
        except (ValueError, ArithmeticError, StateError, FloatingPointError) as exc:
            return r, [], {"replicate": r, "error": f"{type(exc).__name__}: {exc}"}

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(config.replicates)))
    else:
        results = [one(r) for r in range(config.replicates)]
    records, errors = [], []
    for _, rows, err in sorted(results, key=lambda t: t[0]):
        records.extend(rows)
        if err:
            errors.append(err)
    meta = {"coverage_kind": "marginal over the evaluation point" if config.eval_points == "stream"
            else "fixed evaluation points",
            "basis": config.basis.to_dict()}
    if band:
        meta["band_ge_percentile_fraction"] = (
            float(np.mean([r["band_ge_percentile"] for r in records])) if records else None)
    return CoverageReport(config.to_dict(), records, errors, meta)


def coverage_experiment(config: ExperimentConfig) -> CoverageReport:
    """Pointwise normal and percentile interval coverage over replicates."""
    return _run(config, band=False)


def band_experiment(config: ExperimentConfig) -> CoverageReport:
    """Simultaneous band coverage and mean width over replicates."""
    return _run(config, band=True)


def kolmogorov_distance(sample_a, sample_b) -> float:
    """sup_t |F_a(t) - F_b(t)| for the two empirical CDFs."""
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise StateError("Kolmogorov distance needs two nonempty samples")
    return float(ks_2samp(a, b).statistic)


def sampling_distribution(config: ExperimentConfig, z0: float, replicates: int | None = None) -> np.ndarray:
    """f_bar_n(z0) across independent data replicates (unperturbed SGD only)."""
    reps = config.replicates if replicates is None else replicates
    gam = steps(config.schedule, config.n, horizon=config.n)
    out = np.empty(reps)
    for r in range(reps):
        x, y = gen_stream(config, r)
        ens = BootstrapEnsemble(config.basis, 1, "degenerate", seed=0, with_reference=False,
                                capacity=config.n)
        ens.ingest_many(x, y, gam)
        out[r] = ens.eval_averaged([z0])[0, 0]
    return out


def bootstrap_distribution(config: ExperimentConfig, z0: float, replicate_index: int = 0):
    """(f_bar_n(z0), bootstrap draws f_bar^b_n(z0)) on one dataset."""
    x, y = gen_stream(config, replicate_index)
    gam = steps(config.schedule, config.n, horizon=config.n)
    ens = _ensemble(config, replicate_index)
    ens.ingest_many(x, y, gam)
    vals = ens.eval_averaged_all([z0])[:, 0]
    return float(vals[0]), vals[1:]


def consistency_check(config: ExperimentConfig, z0: float, mc_replicates: int = 400) -> dict:
    """Kolmogorov distance between the centred sampling distribution of f_bar_n(z0)
    (Monte Carlo over data, centred at its mean) and the bootstrap distribution
    f_bar^b - f_bar on a dataset not used by the Monte Carlo run. Both are
    rescaled by sqrt(n (n gamma_n)^(-1/alpha)), which leaves the distance unchanged.
    """
    gam_n = steps(config.schedule, config.n, horizon=config.n)[-1]
    s = math.sqrt(config.n * (config.n * gam_n) ** (-1.0 / config.alpha))
    mc = sampling_distribution(config, z0, mc_replicates)
    mc_dev = s * (mc - mc.mean())
    center, boot = bootstrap_distribution(config, z0, replicate_index=mc_replicates)
    bs_dev = s * (boot - center)
    return {"n": config.n, "z0": z0, "J": config.J, "mc_replicates": mc_replicates,
            "kolmogorov": kolmogorov_distance(mc_dev, bs_dev),
            "mc_sd": float(mc_dev.std(ddof=1)), "bootstrap_sd": float(bs_dev.std(ddof=1))}
