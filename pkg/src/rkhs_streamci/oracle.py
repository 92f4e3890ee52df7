"""Closed-form leading bias and noise of averaged functional SGD.

Everything is computed in the eigenbasis of the kernel under a uniform design,
where the population covariance operator is diagonal with entries mu_nu.
For a step sequence gamma_1..gamma_n write P_k(nu) = prod_{i<=k}(1 - gamma_i mu_nu)
and S_k(nu) = sum_{j=k}^n prod_{i=k+1}^j (1 - gamma_i mu_nu). Then

* expected bias of the average: E f_bar_n - f* = -(1/n) sum_k P_k f*,
* leading noise: (1/n) sum_k eps_k Omega_{n,k}(X_k, .) with
  Omega_{n,k}(x_k, x) = sum_nu gamma_k mu_nu S_k(nu) phi_nu(x_k) phi_nu(x),
* its variance sigma^2 / n^2 sum_k sum_nu (gamma_k mu_nu S_k(nu))^2 phi_nu(z0)^2.

The rescaled variance sigma_{z0}^2 multiplies the last display by
n (n gamma_n)^(-1/alpha). For constant steps gamma_k mu S_k = 1 - q^(n+1-k)
with q = 1 - gamma mu, which gives closed forms for all sums over k.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .mercer import C_PHI, ConfigurationError, MercerBasis, _tail_sum
from .schedules import Constant, StepSchedule, schedule_to_dict, steps


class ScheduleViolation(ConfigurationError):
    """A factor 1 - gamma_i mu_nu is not positive."""


class PrecisionWarning(UserWarning):
    """The spectral series is truncated too early for the requested accuracy."""


@dataclass
class TheoryContext:
    """Inputs of the oracle.

    Parameters
    ----------
    basis : MercerBasis
    schedule : StepSchedule
    n : int
        Horizon (number of arrivals averaged).
    sigma2 : float
        Noise variance.
    target_coeffs : array, optional
        L2 coefficients of f* in feature order (constant first if present),
        e.g. from ``MercerBasis.project``. Needed for the bias only.
    series_cutoff : int, optional
        Number of non-constant eigenpairs kept; default min(truncation, 2000).
    """

    basis: MercerBasis
    schedule: StepSchedule
    n: int
    sigma2: float = 0.2
    target_coeffs: np.ndarray | None = None
    series_cutoff: int | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("horizon n must be positive")
        if self.sigma2 < 0:
            raise ConfigurationError("sigma2 must be nonnegative")
        if self.series_cutoff is None:
            self.series_cutoff = min(self.basis.truncation, 2000)
        if not 1 <= self.series_cutoff <= self.basis.truncation:
            raise ConfigurationError("series_cutoff must lie in 1..truncation")
        if self.target_coeffs is not None:
            c = np.asarray(self.target_coeffs, dtype=float)
            if c.size < self.dim:
                c = np.concatenate([c, np.zeros(self.dim - c.size)])
            self.target_coeffs = c[: self.dim]

    # -- spectral ingredients ----------------------------------------------

    @property
    def work_basis(self) -> MercerBasis:
        if "basis" not in self._cache:
            b = self.basis
            self._cache["basis"] = MercerBasis(b.alpha, self.series_cutoff, b.include_constant, b.pairing)
        return self._cache["basis"]

    @property
    def dim(self) -> int:
        return self.series_cutoff + int(self.basis.include_constant)

    @property
    def mu(self) -> np.ndarray:
        return self.work_basis.weights

    @property
    def gammas(self) -> np.ndarray:
        if "gammas" not in self._cache:
            self._cache["gammas"] = steps(self.schedule, self.n, horizon=self.n)
        return self._cache["gammas"]

    @property
    def constant(self) -> bool:
        return isinstance(self.schedule, Constant)

    @property
    def gamma_n(self) -> float:
        return float(self.gammas[-1])

    @property
    def scale(self) -> float:
        """n (n gamma_n)^(-1/alpha): multiplies the raw variance to give sigma_{z0}^2."""
        return self.n * (self.n * self.gamma_n) ** (-1.0 / self.basis.alpha)

    def phi(self, x) -> np.ndarray:
        return self.work_basis.features(np.atleast_1d(x))

    def _factors(self) -> np.ndarray:
        """Matrix of 1 - gamma_i mu_nu, shape (n, dim); raises on non-positive entries."""
        f = 1.0 - np.outer(self.gammas, self.mu)
        if np.any(f <= 0):
            i, nu = np.argwhere(f <= 0)[0]
            raise ScheduleViolation(f"gamma_{i + 1} * mu = {1 - f[i, nu]:.3g} >= 1; step too large")
        return f

    def prod_sums(self) -> np.ndarray:
        """(1/n) sum_k P_k(nu) for each nu."""
        if "psum" in self._cache:
            return self._cache["psum"]
        n = self.n
        if self.constant:
            q = self._factors()[0]
            out = q * (1.0 - q**n) / (n * (1.0 - q))
        else:
            logs = np.cumsum(np.log(self._factors()), axis=0)
            out = np.exp(logs).sum(axis=0) / n
        self._cache["psum"] = out
        return out

    def omega_coeffs(self) -> np.ndarray:
        """gamma_k mu_nu S_k(nu), shape (n, dim); row k-1 belongs to arrival k."""
        if "omega" in self._cache:
            return self._cache["omega"]
        n = self.n
        if self.constant:
            q = self._factors()[0]
            m = np.arange(n, 0, -1, dtype=float)[:, None]  # n + 1 - k
            out = 1.0 - q[None, :] ** m
        else:
            f = self._factors()
            S = np.empty((n, self.dim))
            S[-1] = 1.0
            for k in range(n - 2, -1, -1):
                S[k] = 1.0 + f[k + 1] * S[k + 1]
            out = self.gammas[:, None] * self.mu[None, :] * S
        self._cache["omega"] = out
        return out

    def omega_square_sums(self) -> np.ndarray:
        """sum_k (gamma_k mu_nu S_k(nu))^2 per nu."""
        if "osq" in self._cache:
            return self._cache["osq"]
        if self.constant:
            n = self.n
            q = self._factors()[0]
            with np.errstate(divide="ignore", invalid="ignore"):
                s = n - 2 * q * (1 - q**n) / (1 - q) + q * q * (1 - q ** (2 * n)) / (1 - q * q)
            out = np.where(q < 1, s, 0.0)
        else:
            out = (self.omega_coeffs() ** 2).sum(axis=0)
        self._cache["osq"] = out
        return out

    def tail_estimate(self) -> float:
        """Upper bound on the omitted sum over nu > cutoff of the raw variance series
        (per unit sigma^2 and phi bounded by c_phi), using gamma mu S <= gamma mu (n-k+1)."""
        b = self.basis
        if self.series_cutoff >= b.truncation:
            tail_mu2 = 0.0 if b.truncation == self.series_cutoff else _tail_sum(2 * b.alpha, self.series_cutoff, b.pairing)
        else:
            tail_mu2 = _tail_sum(2 * b.alpha, self.series_cutoff, b.pairing) - _tail_sum(2 * b.alpha, b.truncation, b.pairing)
        m = np.arange(self.n, 0, -1, dtype=float)
        return C_PHI**2 * tail_mu2 * float(np.sum(self.gammas**2 * m * m))


def _x_array(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def leading_bias(ctx: TheoryContext, x):
    """Leading bias E f_bar_n(x) - f*(x) = -(1/n) sum_k sum_nu P_k(nu) f_nu phi_nu(x).

    The sign convention is estimator minus truth.
    """
    if ctx.target_coeffs is None:
        raise ConfigurationError("leading bias needs target coefficients")
    out = -(ctx.phi(x) @ (ctx.prod_sums() * ctx.target_coeffs))
    return float(out[0]) if np.ndim(x) == 0 else out


def omega_weight(ctx: TheoryContext, k: int, x_k, x):
    """Omega_{n,k}(x_k, x), the weight of arrival k in the leading noise."""
    if not 1 <= k <= ctx.n:
        raise ValueError(f"k must lie in 1..{ctx.n}")
    w = ctx.omega_coeffs()[k - 1]
    out = (ctx.phi(x_k) * w) @ ctx.phi(x).T
    if np.ndim(x_k) == 0 and np.ndim(x) == 0:
        return float(out[0, 0])
    return out


def noise_variance(ctx: TheoryContext, z0, check_precision: bool = True):
    """sigma_{z0}^2, the variance of the leading noise rescaled by n (n gamma_n)^(-1/alpha).

    The unscaled variance of the averaged estimator's leading noise is
    ``noise_variance * (n gamma_n)^(1/alpha) / n``.
    """
    raw = (ctx.phi(z0) ** 2) @ ctx.omega_square_sums() / ctx.n**2
    if check_precision and ctx.sigma2 > 0:
        tail = ctx.tail_estimate() / ctx.n**2
        if tail > 1e-4 * float(np.min(raw)):
            warnings.warn(
                f"series cutoff {ctx.series_cutoff} may leave a relative tail up to "
                f"{tail / float(np.min(raw)):.2e}", PrecisionWarning, stacklevel=2)
    out = ctx.sigma2 * ctx.scale * raw
    return float(out[0]) if np.ndim(z0) == 0 else out


def unscaled_noise_variance(ctx: TheoryContext, z0):
    return noise_variance(ctx, z0) / ctx.scale


def variation_vector(ctx: TheoryContext, z0: float) -> np.ndarray:
    """Per-arrival contributions to sigma_{z0}^2 / sigma^2.

    Entry k is (n gamma_n)^(-1/alpha) n^(-1) sum_nu (gamma_k mu_nu S_k(nu))^2 phi_nu(z0)^2,
    which for constant steps is the familiar [1 - (1 - gamma mu)^(n+1-k)]^2 weight.
    The entries sum to noise_variance / sigma^2.
    """
    p2 = ctx.phi(z0)[0] ** 2
    return ctx.scale / ctx.n**2 * (ctx.omega_coeffs() ** 2 @ p2)


def coefficient_of_variation(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.std(v) / np.mean(v))


def rate_prediction(ctx: TheoryContext) -> dict:
    """Unit-constant error bounds: bias 1/sqrt(n gamma_n), variance (n gamma_n)^(1/alpha) / n."""
    ng = ctx.n * ctx.gamma_n
    return {"bias_sup_bound": 1.0 / math.sqrt(ng),
            "variance_bound": ng ** (1.0 / ctx.basis.alpha) / ctx.n}


def oracle_report(ctx: TheoryContext, z0: float) -> dict:
    vv = variation_vector(ctx, z0)
    report = {
        "n": ctx.n,
        "schedule": schedule_to_dict(ctx.schedule),
        "basis": ctx.basis.to_dict(),
        "series_cutoff": ctx.series_cutoff,
        "sigma2": ctx.sigma2,
        "z0": float(z0),
        "sigma_z0_sq": noise_variance(ctx, z0),
        "unscaled_variance": noise_variance(ctx, z0) / ctx.scale,
        "bias_value": leading_bias(ctx, z0) if ctx.target_coeffs is not None else None,
        "bias_sign": "estimator_minus_truth",
        "variation_vector_summary": {
            "first": float(vv[0]), "last": float(vv[-1]), "sum": float(vv.sum()),
            "cv": coefficient_of_variation(vv),
            "deciles": np.quantile(vv, np.linspace(0, 1, 11)).tolist(),
        },
        **rate_prediction(ctx),
    }
    return report


def oracle_report_json(ctx: TheoryContext, z0: float) -> str:
    return json.dumps(oracle_report(ctx, z0), indent=2)
