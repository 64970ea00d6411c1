"""Kinematics and regime classification for a Klein-Gordon particle at a step.

Natural units (hbar = c = 1) throughout: energies, momenta and masses share
one unit, lengths and times carry its inverse.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


class Regime(str, enum.Enum):
    ORDINARY = "Ordinary"
    EVANESCENT = "Evanescent"
    KLEIN = "Klein"
    THRESHOLD_LOWER = "ThresholdLower"
    THRESHOLD_UPPER = "ThresholdUpper"

    @property
    def is_threshold(self) -> bool:
        return self in (Regime.THRESHOLD_LOWER, Regime.THRESHOLD_UPPER)

    @property
    def is_oscillatory(self) -> bool:
        return self in (Regime.ORDINARY, Regime.KLEIN)


# Relative slack, in units of the largest input, under which |E - V0| is
# considered to sit exactly on the mass shell edge.
_THRESHOLD_ULPS = 4


def momentum_from_energy(E: float, m: float) -> float:
    """Return p = +sqrt(E^2 - m^2) for an on-shell particle."""
    if not m > 0:
        raise DomainError(f"mass must be positive, got m={m!r}")
    if not E >= m:
        raise DomainError(f"energy below rest mass: E={E!r} < m={m!r}")
    return math.sqrt((E - m) * (E + m))


@dataclass(frozen=True)
class ParticleParams:
    m: float
    E: float
    p: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", momentum_from_energy(self.E, self.m))

    @classmethod
    def from_momentum(cls, p: float, m: float) -> "ParticleParams":
        return cls(m=m, E=math.hypot(p, m))

    def require_moving(self) -> None:
        if not self.E > self.m:
            raise DomainError(
                f"scattering needs E > m (p > 0); got E={self.E!r}, m={self.m!r}"
            )


@dataclass(frozen=True)
class StepPotential:
    """V(x) = 0 left of ``x_step`` and ``V0`` right of it.

    ``smoothing_width`` > 0 replaces the jump by ``V0/2 (1 + tanh((x - x_step)/w))``.
    """

    V0: float
    smoothing_width: float = 0.0
    x_step: float = 0.0

    def __post_init__(self):
        if self.smoothing_width < 0:
            raise DomainError("smoothing_width must be >= 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.smoothing_width > 0:
            return 0.5 * self.V0 * (1.0 + np.tanh((x - self.x_step) / self.smoothing_width))
        # the point on the step gets the midpoint value
        return np.where(x > self.x_step, self.V0, np.where(x < self.x_step, 0.0, 0.5 * self.V0))


def _gap(E: float, V0: float, m: float) -> tuple[float, bool]:
    """Local kinetic energy E - V0 and whether |E - V0| sits on m."""
    d = E - V0
    scale = max(abs(E), abs(V0), m)
    on_edge = abs(abs(d) - m) <= _THRESHOLD_ULPS * math.ulp(scale)
    return d, on_edge


def transmitted_momentum_squared(E: float, V0: float, m: float) -> float:
    """p'^2 = (E - V0)^2 - m^2; negative for an evanescent transmitted wave."""
    if not m > 0:
        raise DomainError(f"mass must be positive, got m={m!r}")
    d, on_edge = _gap(E, V0, m)
    if on_edge:
        return 0.0
    return (d - m) * (d + m)


def classify_regime(E: float, V0: float, m: float) -> Regime:
    if not E > m > 0:
        raise DomainError(f"classification needs E > m > 0; got E={E!r}, m={m!r}")
    d, on_edge = _gap(E, V0, m)
    if on_edge:
        return Regime.THRESHOLD_LOWER if d > 0 else Regime.THRESHOLD_UPPER
    if d > m:
        return Regime.ORDINARY
    if d < -m:
        return Regime.KLEIN
    return Regime.EVANESCENT


def group_velocity(p_prime: float, E: float, V0: float, m: float | None = None) -> float:
    """dE/dp' on the local mass shell (E - V0)^2 = p'^2 + m^2, i.e. p'/(E - V0).

    ``m`` is optional; when given, evanescent inputs are rejected explicitly.
    """
    if isinstance(p_prime, complex):
        if p_prime.imag != 0:
            raise DomainError("no group velocity for an evanescent transmitted wave")
        p_prime = p_prime.real
    if m is not None and transmitted_momentum_squared(E, V0, m) <= 0:
        raise DomainError("transmitted wave is not oscillatory")
    d = E - V0
    if d == 0:
        raise DomainError("group velocity undefined at E == V0")
    return p_prime / d
