"""Functional SGD in an RKHS through the kernel trick.

The iterate after i arrivals is ``f_i = sum_{j<=i} beta_j K(X_j, .)``; arrival i
only appends ``beta_i = gamma_i * w_i * (Y_i - f_{i-1}(X_i))``. The Polyak
average of f_1..f_i has coefficients ``(1 - (j-1)/i) beta_j`` on the same
design points, so it can be evaluated at any time without storing iterates.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from . import _backend
from .mercer import DomainError, MercerBasis


class DataError(ValueError):
    """A streamed arrival is not a finite point of [0, 1] x R."""


class StateError(RuntimeError):
    """Operation is inconsistent with the current estimator state."""


def _validate_arrival(x, y, gamma=None) -> tuple[float, float]:
    x = float(x)
    y = float(y)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise DataError(f"non-finite arrival ({x}, {y})")
    if not 0.0 <= x <= 1.0:
        raise DataError(f"design point {x} outside [0, 1]")
    if gamma is not None and not (math.isfinite(gamma) and gamma > 0):
        raise DataError(f"step size must be positive, got {gamma}")
    return x, y


def average_weights(count: int) -> np.ndarray:
    """Factors 1 - (j-1)/i, j = 1..i, turning raw into averaged coefficients."""
    return 1.0 - np.arange(count, dtype=float) / count if count else np.zeros(0)


class DesignStore:
    """Growable arrival storage shared by one or more trajectories.

    Holds x, y, gamma for each arrival and the eigenfunction features of each
    design point in a (D, capacity) array, so kernel rows are dot products.
    """

    def __init__(self, basis: MercerBasis, capacity: int = 256):
        self.basis = basis
        self.mu = np.ascontiguousarray(basis.weights, dtype=float)
        capacity = max(int(capacity), 1)
        self.phit = np.zeros((basis.dim, capacity))
        self.x = np.zeros(capacity)
        self.y = np.zeros(capacity)
        self.gamma = np.zeros(capacity)
        self.count = 0

    @property
    def capacity(self) -> int:
        return self.x.shape[0]

    def _grow(self, need: int) -> int:
        cap = self.capacity
        if need <= cap:
            return cap
        new = max(need, 2 * cap)
        phit = np.zeros((self.phit.shape[0], new))
        phit[:, :cap] = self.phit
        self.phit = phit
        for name in ("x", "y", "gamma"):
            arr = np.zeros(new)
            arr[:cap] = getattr(self, name)
            setattr(self, name, arr)
        return new

    def append(self, xs, ys, gammas) -> tuple[int, int]:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        k = xs.size
        start = self.count
        self._grow(start + k)
        self.phit[:, start:start + k] = self.basis.features(xs).T
        self.x[start:start + k] = xs
        self.y[start:start + k] = ys
        self.gamma[start:start + k] = gammas
        self.count += k
        return start, start + k

    def kernel_to(self, points, count: int | None = None) -> np.ndarray:
        """Matrix K(X_j, t_m), shape (count, len(points))."""
        count = self.count if count is None else count
        q = self.basis.features(np.atleast_1d(points)) * self.mu
        return self.phit[:, :count].T @ q.T


class SgdTrajectory:
    """One functional SGD estimator with zero initialization.

    Parameters
    ----------
    basis : MercerBasis
        Kernel used for the expansion.
    capacity : int
        Initial storage; grows geometrically.
    backend : str, optional
        ``"compiled"`` or ``"python"``; defaults to the import-time choice.
    """

    def __init__(self, basis: MercerBasis, capacity: int = 256, backend: str | None = None):
        self.basis = basis
        self._store = DesignStore(basis, capacity)
        self._coef = np.zeros((self._store.capacity, 1))
        self._core = _backend.get(backend)
        self.kernel_evals = 0

    @property
    def count(self) -> int:
        return self._store.count

    @property
    def design_points(self) -> np.ndarray:
        return self._store.x[: self.count].copy()

    @property
    def raw_coeffs(self) -> np.ndarray:
        return self._coef[: self.count, 0].copy()

    def update(self, x, y, gamma: float, w: float = 1.0) -> "SgdTrajectory":
        """Append one arrival; ``w`` perturbs the stochastic gradient."""
        x, y = _validate_arrival(x, y, gamma)
        if not math.isfinite(w):
            raise DataError("multiplier must be finite")
        start, stop = self._store.append(x, y, gamma)
        if self._coef.shape[0] < self._store.capacity:
            coef = np.zeros((self._store.capacity, 1))
            coef[:start] = self._coef[:start]
            self._coef = coef
        mult = np.array([[float(w)]])
        self._core.advance(self._store.phit, self._store.mu, self._coef, self._store.y,
                           self._store.gamma, mult, start, stop)
        self.kernel_evals += start
        return self

    def eval_raw(self, x):
        """f_i(x) = sum_j beta_j K(X_j, x)."""
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        n = self.count
        self.kernel_evals += n * pts.size
        if n == 0:
            out = np.zeros(pts.size)
        else:
            out = self._store.kernel_to(pts).T @ self._coef[:n, 0]
        return float(out[0]) if np.ndim(x) == 0 else out

    def averaged_coefficients(self) -> np.ndarray:
        n = self.count
        return average_weights(n) * self._coef[:n, 0]

    def eval_averaged(self, x):
        """Polyak average (1/i) sum_k f_k(x); zero (with a warning) before any arrival."""
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        n = self.count
        if n == 0:
            warnings.warn("averaged estimate requested before any arrival", RuntimeWarning)
            out = np.zeros(pts.size)
        else:
            self.kernel_evals += n * pts.size
            out = self._store.kernel_to(pts).T @ self.averaged_coefficients()
        return float(out[0]) if np.ndim(x) == 0 else out


def sgd_update(traj: SgdTrajectory, x, y, gamma_i: float) -> SgdTrajectory:
    return traj.update(x, y, gamma_i)


def perturbed_update(traj: SgdTrajectory, x, y, gamma_i: float, w_i: float) -> SgdTrajectory:
    return traj.update(x, y, gamma_i, w_i)


def eval_raw(traj: SgdTrajectory, x):
    return traj.eval_raw(x)


def averaged_coefficients(traj: SgdTrajectory) -> np.ndarray:
    return traj.averaged_coefficients()


def eval_averaged(traj: SgdTrajectory, x):
    return traj.eval_averaged(x)


def check_points(points) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if np.any(~np.isfinite(pts)) or np.any(pts < 0) or np.any(pts > 1):
        raise DomainError("evaluation points must lie in [0, 1]")
    return pts
