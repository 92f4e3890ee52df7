"""Truncated Mercer kernels on [0, 1] with trigonometric eigenfunctions.

Two eigenbasis families are supported, both orthonormal in L2(Uniform[0, 1])
and bounded by ``sqrt(2)``:

``periodic``
    phi_{2k-1}(x) = sqrt(2) sin(2 pi k x), phi_{2k}(x) = sqrt(2) cos(2 pi k x),
    with paired eigenvalues mu_{2k-1} = mu_{2k} = k^-alpha. The kernel is
    translation invariant with period one.

``cosine``
    phi_nu(x) = sqrt(2) cos(pi nu x), mu_nu = nu^-alpha. No periodicity is
    imposed at the endpoints, which matters for targets with f(0) != f(1).

An optional constant eigenfunction phi_0 = 1 with eigenvalue 1 can be added.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.special import zeta

C_PHI = math.sqrt(2.0)
PAIRINGS = ("periodic", "cosine")


class DomainError(ValueError):
    """Raised when an input lies outside [0, 1]."""


class ConfigurationError(ValueError):
    """Raised for invalid kernel, schedule or experiment settings."""


def _check_unit(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("points must lie in [0, 1]")
    return arr


def _tail_sum(alpha: float, truncation: float, pairing: str) -> float:
    """Sum of eigenvalues with index > truncation (constant term excluded)."""
    if math.isinf(truncation):
        return 0.0
    m = int(truncation)
    if pairing == "cosine":
        return float(zeta(alpha, m + 1))
    # periodic: indices 2k-1, 2k share k^-alpha
    k_last = (m + 1) // 2
    tail = 2.0 * float(zeta(alpha, k_last + 1))
    if m % 2 == 1:
        tail += k_last ** (-alpha)
    return tail


def default_truncation(alpha: float, tol: float = 1e-6, pairing: str = "periodic") -> int:
    """Smallest even truncation whose kernel tail bound is at most ``tol``."""
    if alpha <= 1:
        raise ConfigurationError("alpha must exceed 1")
    # integral bound c^2 * 2 (M/2)^(1-alpha) / (alpha-1) <= tol, then refine
    half = (C_PHI**2 * 2.0 / ((alpha - 1.0) * tol)) ** (1.0 / (alpha - 1.0))
    m = max(2, 2 * int(math.ceil(half)))
    while m > 2 and C_PHI**2 * _tail_sum(alpha, m - 2, pairing) <= tol:
        m -= 2
    while C_PHI**2 * _tail_sum(alpha, m, pairing) > tol:
        m += 2
    return m


@dataclass(frozen=True)
class MercerBasis:
    """Eigen-system of a truncated Mercer kernel.

    Parameters
    ----------
    alpha : float
        Polynomial decay exponent of the eigenvalues, must exceed 1.
    truncation : int, optional
        Number of retained eigenpairs ``M`` (not counting the constant).
        Defaults to :func:`default_truncation` at tolerance 1e-6.
    include_constant : bool
        Whether phi_0 = 1 with eigenvalue 1 is part of the kernel.
    pairing : {"periodic", "cosine"}
        Index-to-frequency rule, see the module docstring.
    """

    alpha: float = 2.0
    truncation: int | None = None
    include_constant: bool = False
    pairing: str = "periodic"
    _mu: np.ndarray = field(init=False, repr=False, compare=False)
    _freq: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.alpha > 1:
            raise ConfigurationError("alpha must exceed 1")
        if self.pairing not in PAIRINGS:
            raise ConfigurationError(f"unknown pairing {self.pairing!r}")
        if self.truncation is None:
            object.__setattr__(
                self, "truncation", default_truncation(self.alpha, pairing=self.pairing)
            )
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ConfigurationError("truncation must be a positive integer")
        object.__setattr__(self, "truncation", int(self.truncation))
        nu = np.arange(1, self.truncation + 1)
        freq = (nu + 1) // 2 if self.pairing == "periodic" else nu
        mu = freq.astype(float) ** (-self.alpha)
        if self.include_constant:
            mu = np.concatenate([[1.0], mu])
        mu.setflags(write=False)
        object.__setattr__(self, "_mu", mu)
        object.__setattr__(self, "_freq", freq)

    # -- spectrum -----------------------------------------------------------

    @property
    def dim(self) -> int:
        """Number of feature columns (eigenpairs plus the constant, if any)."""
        return self.truncation + int(self.include_constant)

    @property
    def weights(self) -> np.ndarray:
        """Eigenvalues in feature-column order (read-only)."""
        return self._mu

    def eigenvalue(self, nu: int) -> float:
        if not 1 <= nu <= self.truncation:
            raise IndexError(f"eigen index {nu} outside 1..{self.truncation}")
        return float(self._freq[nu - 1]) ** (-self.alpha)

    def eigenvalues(self) -> np.ndarray:
        """mu_1, ..., mu_M (constant term excluded)."""
        return self._freq.astype(float) ** (-self.alpha)

    def eigenfunction(self, nu: int, x):
        if not 1 <= nu <= self.truncation:
            raise IndexError(f"eigen index {nu} outside 1..{self.truncation}")
        x = _check_unit(x)
        k = self._freq[nu - 1]
        if self.pairing == "cosine":
            out = C_PHI * np.cos(np.pi * k * x)
        elif nu % 2 == 1:
            out = C_PHI * np.sin(2 * np.pi * k * x)
        else:
            out = C_PHI * np.cos(2 * np.pi * k * x)
        return float(out) if out.ndim == 0 else out

    def features(self, x) -> np.ndarray:
        """Matrix of eigenfunction values, shape ``(len(x), dim)``."""
        x = np.atleast_1d(_check_unit(x)).ravel()
        out = np.empty((x.size, self.dim))
        col = 0
        if self.include_constant:
            out[:, 0] = 1.0
            col = 1
        k = self._freq
        if self.pairing == "cosine":
            out[:, col:] = C_PHI * np.cos(np.pi * np.outer(x, k))
        else:
            ang = 2 * np.pi * np.outer(x, k)
            odd = (np.arange(1, self.truncation + 1) % 2) == 1
            out[:, col:][:, odd] = C_PHI * np.sin(ang[:, odd])
            out[:, col:][:, ~odd] = C_PHI * np.cos(ang[:, ~odd])
        return out

    # -- kernel -------------------------------------------------------------

    def kernel(self, x, y):
        """K(x, y) = sum_nu mu_nu phi_nu(x) phi_nu(y), broadcast over x and y."""
        x = np.asarray(_check_unit(x), dtype=float)
        y = np.asarray(_check_unit(y), dtype=float)
        bx, by = np.broadcast_arrays(x, y)
        fx = self.features(bx.ravel())
        fy = self.features(by.ravel())
        out = np.einsum("ij,j,ij->i", fx, self._mu, fy).reshape(bx.shape)
        return float(out) if out.ndim == 0 else out

    def gram(self, xs, ys=None) -> np.ndarray:
        fx = self.features(xs)
        fy = fx if ys is None else self.features(ys)
        return (fx * self._mu) @ fy.T

    def tail_bound(self) -> float:
        """c_phi^2 times the eigenvalue tail beyond the truncation."""
        return C_PHI**2 * _tail_sum(self.alpha, self.truncation, self.pairing)

    def integral_tail_bound(self) -> float:
        m = self.truncation / 2 if self.pairing == "periodic" else self.truncation
        per = 2.0 if self.pairing == "periodic" else 1.0
        return per * C_PHI**2 * m ** (1 - self.alpha) / (self.alpha - 1)

    def diag_bound(self) -> float:
        """Upper bound on K(x, x): constant term plus c_phi^2 sum mu_nu."""
        return float(self.include_constant) + C_PHI**2 * float(self.eigenvalues().sum())

    def sup_diag(self, grid_size: int = 2001) -> float:
        """Maximum of K(x, x) over a uniform grid (attained at 0 for both families)."""
        x = np.linspace(0.0, 1.0, grid_size)
        f = self.features(x)
        return float(((f**2) @ self._mu).max())

    # -- projection ---------------------------------------------------------

    def project(self, f: Callable, nodes: int = 1 << 16) -> np.ndarray:
        """L2 coefficients of ``f`` in feature-column order (midpoint rule)."""
        need = 4 * int(self._freq.max()) * (2 if self.pairing == "periodic" else 1)
        if nodes < need:
            raise ConfigurationError(f"need at least {need} quadrature nodes")
        x = (np.arange(nodes) + 0.5) / nodes
        fx = np.asarray(f(x), dtype=float)
        return self.features(x).T @ fx / nodes

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("_mu", "_freq"):
            d.pop(key, None)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "MercerBasis":
        return cls(
            alpha=float(d["alpha"]),
            truncation=int(d["truncation"]),
            include_constant=bool(d.get("include_constant", False)),
            pairing=d.get("pairing", "periodic"),
        )

    @classmethod
    def from_json(cls, text: str) -> "MercerBasis":
        return cls.from_dict(json.loads(text))


def eigenvalue(spec: MercerBasis, nu: int) -> float:
    return spec.eigenvalue(nu)


def eigenfunction(spec: MercerBasis, nu: int, x):
    return spec.eigenfunction(nu, x)


def kernel_eval(spec: MercerBasis, x, y):
    return spec.kernel(x, y)


def kernel_tail_bound(spec: MercerBasis) -> float:
    return spec.tail_bound()


def project_coefficients(f: Callable, spec: MercerBasis, count: int, quadrature_nodes: int) -> np.ndarray:
    """Coefficients <f, phi_nu> for nu = 1..count by the composite midpoint rule."""
    if count > spec.truncation:
        raise ConfigurationError("count exceeds truncation")
    if quadrature_nodes < 4 * count:
        raise ConfigurationError("quadrature_nodes must be at least 4 * count")
    x = (np.arange(quadrature_nodes) + 0.5) / quadrature_nodes
    fx = np.asarray(f(x), dtype=float)
    phi = spec.features(x)[:, int(spec.include_constant):][:, :count]
    return phi.T @ fx / quadrature_nodes


def bernoulli_kernel_alpha2(x, y, include_constant: bool = True):
    """Closed form of the untruncated alpha=2 periodic kernel: 1 + 2 pi^2 B2({x - y})."""
    t = np.mod(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), 1.0)
    return float(include_constant) + 2 * np.pi**2 * (t * t - t + 1.0 / 6.0)
