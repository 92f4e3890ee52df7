"""One-pass multiplier bootstrap for functional SGD.

Each bootstrap trajectory runs the SGD recursion with its stochastic gradient
scaled by an independent multiplier w with unit mean. All trajectories share
the stream, so they are stored as columns of one coefficient matrix and the
kernel row of each arrival is computed once.

Randomness: every trajectory owns a Philox generator derived from a
``SeedSequence``. Multipliers are drawn in fixed blocks of ``BLOCK`` arrivals,
so the values do not depend on how the stream is chunked or on the number
of worker threads.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from .mercer import ConfigurationError, MercerBasis
from .sgd import DataError, DesignStore, SgdTrajectory, StateError, average_weights, check_points

BLOCK = 256
COL_ALIGN = 64

LAWS = ("gaussian", "twopoint", "uniform", "degenerate")


@dataclass(frozen=True)
class MultiplierLaw:
    """Distribution of the bootstrap multipliers.

    ``gaussian`` is N(1, 1); ``twopoint`` puts mass 1/2 on 3 and -1;
    ``uniform`` is Uniform[-1, 3]; ``degenerate`` is w = 1 (no perturbation),
    useful for checks. All have mean one; only ``gaussian`` has variance one.
    """

    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in LAWS:
            raise ConfigurationError(f"unknown multiplier law {self.kind!r}; choose from {LAWS}")

    @property
    def mean(self) -> float:
        return 1.0

    @property
    def variance(self) -> float:
        return {"gaussian": 1.0, "twopoint": 4.0, "uniform": 4.0 / 3.0, "degenerate": 0.0}[self.kind]

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "gaussian":
            return 1.0 + rng.standard_normal(size)
        if self.kind == "twopoint":
            return 4.0 * rng.integers(0, 2, size=size) - 1.0
        if self.kind == "uniform":
            return rng.uniform(-1.0, 3.0, size)
        return np.ones(size) if size is not None else 1.0


def as_law(law) -> MultiplierLaw:
    return law if isinstance(law, MultiplierLaw) else MultiplierLaw(str(law))


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator for an int or ``SeedSequence``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed, *key: int) -> np.random.SeedSequence:
    """Deterministic named substream of ``seed`` (no spawn state involved)."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(key))


def draw_multiplier(law, rng: np.random.Generator, size=None):
    """Draw one multiplier (or an array of them) from ``law``."""
    return as_law(law).sample(rng, size)


class MultiplierStream:
    """Multipliers w_1, w_2, ... of one trajectory, drawn in fixed blocks."""

    def __init__(self, law, seed):
        self.law = as_law(law)
        self._rng = make_rng(seed)
        self._block = -1
        self._buf = np.zeros(0)

    def block(self, b: int) -> np.ndarray:
        if b == self._block:
            return self._buf
        if b != self._block + 1:
            raise StateError("multiplier blocks must be consumed in order")
        self._buf = np.asarray(self.law.sample(self._rng, BLOCK), dtype=float)
        self._block = b
        return self._buf

    def take(self, n: int) -> np.ndarray:
        """First ``n`` multipliers of a fresh stream."""
        nb = -(-n // BLOCK)
        return np.concatenate([self.block(b) for b in range(nb)])[:n] if n else np.zeros(0)


def perturbed_trajectory(basis: MercerBasis, xs, ys, gammas, law, seed, backend=None) -> SgdTrajectory:
    """Standalone perturbed trajectory with the multiplier stream of ``seed``."""
    xs = np.asarray(xs, dtype=float)
    w = MultiplierStream(law, seed).take(xs.size)
    traj = SgdTrajectory(basis, capacity=max(xs.size, 1), backend=backend)
    for x, y, g, wi in zip(xs, ys, gammas, w):
        traj.update(x, y, g, wi)
    return traj


def _column_ranges(c0: int, c1: int, workers: int) -> list[tuple[int, int]]:
    """Split [c0, c1) into at most ``workers`` ranges on COL_ALIGN boundaries."""
    width = c1 - c0
    if workers <= 1 or width <= COL_ALIGN:
        return [(c0, c1)]
    per = -(-width // workers)
    per = -(-per // COL_ALIGN) * COL_ALIGN
    edges = list(range(c0, c1, per)) + [c1]
    return list(zip(edges[:-1], edges[1:]))


class BootstrapEnsemble:
    """J perturbed SGD trajectories updated in lockstep, plus an optional
    unperturbed reference trajectory stored as column 0.

    Parameters
    ----------
    basis : MercerBasis
    J : int
        Number of bootstrap trajectories.
    law : MultiplierLaw or str
    seed : int or SeedSequence, optional
        Master seed; trajectory j uses the substream ``child_seed(seed, j)``.
    seeds : sequence, optional
        Explicit per-trajectory seeds, overriding ``seed``.
    with_reference : bool
        Keep the unperturbed estimator in the same pass.
    workers : int
        Threads used to split trajectory columns. Results do not depend on it.
    """

    def __init__(self, basis: MercerBasis, J: int, law="gaussian", seed=0, seeds=None,
                 with_reference: bool = True, capacity: int = 256, workers: int = 1,
                 backend: str | None = None):
        if J < 1:
            raise ConfigurationError("ensemble needs at least one trajectory")
        self.basis = basis
        self.J = int(J)
        self.law = as_law(law)
        if seeds is None:
            seeds = [child_seed(seed, j) for j in range(self.J)]
        elif len(seeds) != self.J:
            raise ConfigurationError("need one seed per trajectory")
        self.seeds = list(seeds)
        self.master_seed = seed
        self.with_reference = bool(with_reference)
        self.offset = int(self.with_reference)
        self.R = self.J + self.offset
        self.workers = max(1, int(workers))
        self._core = _backend.get(backend)
        self._store = DesignStore(basis, capacity)
        self._coef = np.zeros((self._store.capacity, self.R))
        self._streams = [MultiplierStream(self.law, s) for s in self.seeds]
        self._mult = np.ones((BLOCK, self.R))
        self._mult_block = -1
        self.kernel_evals = 0

    # -- state -------------------------------------------------------------

    @property
    def count(self) -> int:
        return self._store.count

    @property
    def design_points(self) -> np.ndarray:
        return self._store.x[: self.count].copy()

    def raw_coeffs(self, j: int) -> np.ndarray:
        """Raw coefficients of bootstrap trajectory j (0-based)."""
        return self._coef[: self.count, self.offset + j].copy()

    def reference_coeffs(self) -> np.ndarray:
        if not self.with_reference:
            raise StateError("ensemble was built without a reference trajectory")
        return self._coef[: self.count, 0].copy()

    def _load_block(self, b: int) -> None:
        if b == self._mult_block:
            return
        for j, s in enumerate(self._streams):
            self._mult[:, self.offset + j] = s.block(b)
        self._mult_block = b

    # -- updates -----------------------------------------------------------

    def ingest(self, x, y, gamma: float) -> "BootstrapEnsemble":
        """Feed one arrival to every trajectory."""
        return self.ingest_many([x], [y], [gamma])

    def ingest_many(self, xs, ys, gammas) -> "BootstrapEnsemble":
        """Feed a batch of arrivals. Validation happens first, so an invalid
        arrival leaves every trajectory untouched."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        gammas = np.broadcast_to(np.asarray(gammas, dtype=float), xs.shape)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise DataError("x and y batches must be 1-d and of equal length")
        bad = ~(np.isfinite(xs) & np.isfinite(ys)) | (xs < 0) | (xs > 1)
        if bad.any():
            k = int(np.argmax(bad))
            raise DataError(f"invalid arrival at batch position {k}: ({xs[k]}, {ys[k]})")
        if np.any(~np.isfinite(gammas)) or np.any(gammas <= 0):
            raise DataError("step sizes must be positive and finite")
        if xs.size == 0:
            return self
        start, stop = self._store.append(xs, ys, gammas)
        if self._coef.shape[0] < self._store.capacity:
            coef = np.zeros((self._store.capacity, self.R))
            coef[:start] = self._coef[:start]
            self._coef = coef
        i = start
        while i < stop:
            b = i // BLOCK
            seg_stop = min(stop, (b + 1) * BLOCK)
            self._load_block(b)
            self._advance(i, seg_stop, self._mult[i - b * BLOCK:])
            i = seg_stop
        self.kernel_evals += (stop * (stop - 1) - start * (start - 1)) // 2 * self.R
        return self

    def _advance(self, start, stop, mult):
        s = self._store
        ranges = _column_ranges(0, self.R, self.workers)
        if len(ranges) == 1:
            self._core.advance(s.phit, s.mu, self._coef, s.y, s.gamma, mult, start, stop)
            return

        def run(rng):
            self._core.advance(s.phit, s.mu, self._coef, s.y, s.gamma, mult, start, stop, *rng)

        with ThreadPoolExecutor(len(ranges)) as pool:
            list(pool.map(run, ranges))

    # -- evaluation --------------------------------------------------------

    def eval_averaged_all(self, points) -> np.ndarray:
        """Averaged estimates of every column at ``points``, shape (R, m)."""
        pts = check_points(points)
        n = self.count
        if n == 0:
            return np.zeros((self.R, pts.size))
        bar = average_weights(n)[:, None] * self._coef[:n]
        self.kernel_evals += n * pts.size
        return (self._store.kernel_to(pts).T @ bar).T

    def eval_averaged(self, points) -> np.ndarray:
        """Bootstrap averaged estimates, shape (J, m)."""
        return self.eval_averaged_all(points)[self.offset:]

    def eval_reference(self, points) -> np.ndarray:
        if not self.with_reference:
            raise StateError("ensemble was built without a reference trajectory")
        pts = check_points(points)
        n = self.count
        if n == 0:
            return np.zeros(pts.size)
        return self._store.kernel_to(pts).T @ (average_weights(n) * self._coef[:n, 0])

    def checkpoint(self, points, grid_name: str = "grid") -> dict:
        pts = check_points(points)
        vals = self.eval_averaged_all(pts)
        out = {"t": self.count, "J": self.J, "law": self.law.kind, "grid_name": grid_name,
               "grid": pts.tolist(), "evaluations": vals[self.offset:].tolist()}
        if self.with_reference:
            out["reference"] = vals[0].tolist()
        return out

    def dump_checkpoint(self, points, path, grid_name: str = "grid") -> None:
        with open(path, "w") as fh:
            json.dump(self.checkpoint(points, grid_name), fh)


def ensemble_ingest(ens: BootstrapEnsemble, x, y, gamma_i) -> BootstrapEnsemble:
    return ens.ingest(x, y, gamma_i)


def centered_deviations(ens: BootstrapEnsemble, reference: SgdTrajectory | None, points) -> np.ndarray:
    """Matrix of f_bar^{b,j}(t_m) - f_bar(t_m), shape (J, len(points)).

    ``reference=None`` uses the ensemble's own unperturbed column.
    """
    pts = check_points(points)
    if reference is None:
        vals = ens.eval_averaged_all(pts)
        if not ens.with_reference:
            raise StateError("no reference trajectory available")
        return vals[ens.offset:] - vals[0]
    if reference.count != ens.count:
        raise StateError(f"reference has {reference.count} arrivals, ensemble {ens.count}")
    return ens.eval_averaged(pts) - np.asarray(reference.eval_averaged(pts))[None, :]


def thread_count(default: int = 1) -> int:
    """Worker cap from RKHS_STREAMCI_THREADS."""
    import os

    raw = os.environ.get("RKHS_STREAMCI_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"RKHS_STREAMCI_THREADS must be an integer, got {raw!r}") from None


def sample_moments(law, n: int, seed=0) -> tuple[float, float]:
    """Sample mean and variance of ``n`` multipliers; diagnostic helper."""
    w = as_law(law).sample(make_rng(seed), n)
    return float(np.mean(w)), float(np.var(w, ddof=1)) if n > 1 else math.nan
