"""Step-size rules for functional SGD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mercer import ConfigurationError


@dataclass(frozen=True)
class Constant:
    """gamma_i = gamma. If ``gamma`` is None it is set from the horizon as
    ``scale * n^(-1/(alpha+1))``."""

    gamma: float | None = None
    alpha: float = 2.0
    scale: float = 1.0

    def resolve(self, horizon: int | None) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        if horizon is None:
            raise ConfigurationError("constant step needs gamma or a horizon")
        return self.scale * float(horizon) ** (-1.0 / (self.alpha + 1.0))


@dataclass(frozen=True)
class Polynomial:
    """gamma_i = scale * i^(-xi)."""

    xi: float
    scale: float = 1.0


@dataclass(frozen=True)
class Undersmoothed:
    """gamma_i = scale * i^(-1/(alpha+1) + epsilon)."""

    epsilon: float
    alpha: float = 2.0
    scale: float = 1.0

    @property
    def xi(self) -> float:
        return 1.0 / (self.alpha + 1.0) - self.epsilon


StepSchedule = Constant | Polynomial | Undersmoothed


def validate(schedule: StepSchedule, mu_max: float = 1.0, horizon: int | None = None) -> None:
    """Check the step-size requirements of the rate theory."""
    if isinstance(schedule, Constant):
        g = schedule.resolve(horizon)
        if not 0 < g < 1.0 / mu_max:
            raise ConfigurationError(f"constant step {g} outside (0, 1/mu_1)")
    elif isinstance(schedule, Polynomial):
        if not 0 < schedule.xi < 0.5:
            raise ConfigurationError("polynomial decay xi must lie in (0, 1/2)")
        if schedule.scale <= 0:
            raise ConfigurationError("scale must be positive")
    elif isinstance(schedule, Undersmoothed):
        if schedule.epsilon <= 0:
            raise ConfigurationError("undersmoothing epsilon must be positive")
        if not 0 < schedule.xi < 1:
            raise ConfigurationError("epsilon too large: step would not decay")
        if schedule.scale <= 0:
            raise ConfigurationError("scale must be positive")
    else:
        raise ConfigurationError(f"unknown schedule {schedule!r}")


def step_size(schedule: StepSchedule, i: int, horizon: int | None = None) -> float:
    if i < 1:
        raise ValueError("arrival index starts at 1")
    if isinstance(schedule, Constant):
        return schedule.resolve(horizon)
    if isinstance(schedule, (Polynomial, Undersmoothed)):
        return schedule.scale * float(i) ** (-schedule.xi)
    raise ConfigurationError(f"unknown schedule {schedule!r}")


def steps(schedule: StepSchedule, n: int, horizon: int | None = None) -> np.ndarray:
    """Vector gamma_1..gamma_n."""
    if isinstance(schedule, Constant):
        return np.full(n, schedule.resolve(horizon if horizon is not None else n))
    i = np.arange(1, n + 1, dtype=float)
    return schedule.scale * i ** (-schedule.xi)


def effective_regularization(schedule: StepSchedule, n: int) -> float:
    """lambda = 1 / sum_{i<=n} gamma_i (horizon n for constant steps)."""
    if n < 1:
        raise ValueError("n must be positive")
    return 1.0 / float(steps(schedule, n, horizon=n).sum())


def budget_matched_polynomial(n: int, alpha: float = 2.0, xi: float | None = None,
                              gamma: float | None = None) -> Polynomial:
    """Polynomial schedule whose total step budget equals n * gamma.

    ``gamma`` defaults to n^(-1/(alpha+1)) and ``xi`` to 1/(alpha+1).
    """
    xi = 1.0 / (alpha + 1.0) if xi is None else xi
    gamma = float(n) ** (-1.0 / (alpha + 1.0)) if gamma is None else gamma
    raw = (np.arange(1, n + 1, dtype=float) ** (-xi)).sum()
    return Polynomial(xi=xi, scale=n * gamma / raw)


def is_constant(schedule: StepSchedule) -> bool:
    return isinstance(schedule, Constant)


def parse_schedule(text: str, alpha: float = 2.0, scale: float = 1.0) -> StepSchedule:
    """Parse ``constant``, ``constant:<gamma>``, ``poly:<xi>`` or ``undersmoothed:<eps>``."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "constant":
            return Constant(gamma=float(arg) if arg else None, alpha=alpha, scale=scale)
        if kind == "poly":
            return Polynomial(xi=float(arg) if arg else 1.0 / (alpha + 1.0), scale=scale)
        if kind == "undersmoothed":
            return Undersmoothed(epsilon=float(arg) if arg else 0.02, alpha=alpha, scale=scale)
    except ValueError as exc:
        raise ConfigurationError(f"bad schedule {text!r}") from exc
    raise ConfigurationError(f"bad schedule {text!r}")


def schedule_to_dict(schedule: StepSchedule) -> dict:
    from dataclasses import asdict

    return {"kind": type(schedule).__name__.lower(), **asdict(schedule)}


def schedule_from_dict(d: dict) -> StepSchedule:
    d = dict(d)
    kind = d.pop("kind")
    cls = {"constant": Constant, "polynomial": Polynomial, "undersmoothed": Undersmoothed}.get(kind)
    if cls is None:
        raise ConfigurationError(f"unknown schedule kind {kind!r}")
    return cls(**d)
