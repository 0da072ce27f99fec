"""Exact sub-flows of the split Hamiltonian H = H_K + H_V and the time shift.

H_K(p, t) = -|p|^2 / (2 p0(t)) drifts q with p frozen; H_V(q, t) = -p0(t)
gamma0(t) f(q) kicks p with q frozen. Both integrate in closed form for
Zhang's coefficients. The flows take an explicit interval [from_t, to_t] and
never touch ``state.t``; advancing time is the stepper's job.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, RangeError
from .model import SigmaModel, p0_of_t, power


@dataclass(frozen=True)
class PhaseState:
    """(q, p, t) on the reduced extended phase space R^2d x (0, inf)."""

    q: np.ndarray
    p: np.ndarray
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError(f"time must be positive, got t={self.t!r}")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)) and math.isfinite(self.t))


def power_increment(a: float, b: float, k: float) -> float:
    """b**k - a**k for a, b > 0, free of cancellation when b is close to a."""
    if not (a > 0 and b > 0):
        raise DomainError(f"interval endpoints must be positive, got [{a!r}, {b!r}]")
    if a == b:
        return 0.0
    try:
        val = power(a, k) * math.expm1(k * math.log1p((b - a) / a))
    except OverflowError as exc:
        raise RangeError(f"power increment overflows on [{a!r}, {b!r}] with k={k!r}") from exc
    if not math.isfinite(val):
        raise RangeError(f"power increment overflows on [{a!r}, {b!r}] with k={k!r}")
    return val


def flow_K(model: SigmaModel, state: PhaseState, from_t: float, to_t: float) -> PhaseState:
    """Drift: q += p / (2 sigma p0(1)) * (to_t^(-2 sigma) - from_t^(-2 sigma)).

    Reversed intervals (to_t < from_t) give the inverse map.
    """
    coef = power_increment(from_t, to_t, -2.0 * model.sigma) / (2.0 * model.sigma * model.p0_at_1)
    if coef == 0.0:
        return state
    return replace(state, q=state.q + coef * state.p)


def flow_V(model: SigmaModel, objective, state: PhaseState, from_t: float, to_t: float) -> PhaseState:
    """Kick: p += sigma p0(1) / 3 * (to_t^(3 sigma) - from_t^(3 sigma)) * grad f(q).

    Evaluates the gradient exactly once, at the entry q, even for an empty
    interval, so that gradient accounting stays uniform.
    """
    coef = model.sigma * model.p0_at_1 / 3.0 * power_increment(from_t, to_t, 3.0 * model.sigma)
    g = objective.gradient(state.q)
    if coef == 0.0:
        return state
    return replace(state, p=state.p + coef * g)


def time_shift(state: PhaseState, dt: float) -> PhaseState:
    t = state.t + dt
    if not t > 0:
        raise DomainError(f"time shift would leave positive times: t={state.t!r}, dt={dt!r}")
    return replace(state, t=t)


def velocity_from_momentum(model: SigmaModel, state: PhaseState) -> np.ndarray:
    return -np.asarray(state.p, dtype=float) / p0_of_t(model, state.t)


def momentum_from_velocity(model: SigmaModel, t: float, v) -> np.ndarray:
    return -p0_of_t(model, t) * np.asarray(v, dtype=float)
