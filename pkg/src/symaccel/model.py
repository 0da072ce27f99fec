"""Problem parameters and the time-dependent coefficients of Zhang's ODE.

    x'' + gamma1(t) x' + gamma0(t) grad f(x) = 0,
    gamma0(t) = sigma^2 t^(sigma - 2),  gamma1(t) = (2 sigma + 1) / t,

together with the closed-form momentum p0(t) = p0(1) t^(2 sigma + 1) and the
Hamiltonian / contact-Hamiltonian evaluators used as diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError

# exponents above this go through exp(k * log t)
_LOG_DOMAIN_EXPONENT = 64.0


def power(t: float, k: float) -> float:
    """t**k for t > 0 with an explicit RangeError instead of inf/0-overflow."""
    if not t > 0:
        raise DomainError(f"time must be positive, got t={t!r}")
    try:
        if abs(k) > _LOG_DOMAIN_EXPONENT:
            val = math.exp(k * math.log(t))
        else:
            val = float(t) ** k
    except OverflowError as exc:
        raise RangeError(f"t**k overflows for t={t!r}, k={k!r}") from exc
    if not math.isfinite(val):
        raise RangeError(f"t**k overflows for t={t!r}, k={k!r}")
    return val


def _check_time(t: float) -> None:
    if not t > 0:
        raise DomainError(f"time must be positive, got t={t!r}")


@dataclass(frozen=True)
class SigmaModel:
    """Rate parameter sigma, initial momentum p0(1) and start time t0."""

    sigma: float = 2.0
    p0_at_1: float = 1.0
    t0: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 2):
            raise DomainError(f"sigma must be >= 2, got {self.sigma!r}")
        if self.p0_at_1 == 0 or not math.isfinite(self.p0_at_1):
            raise DomainError("p0_at_1 must be finite and non-zero")
        if not (math.isfinite(self.t0) and self.t0 > 0):
            raise DomainError(f"t0 must be positive, got {self.t0!r}")

    def gamma0(self, t):
        return gamma0(self, t)

    def gamma1(self, t):
        return gamma1(self, t)

    def p0(self, t):
        return p0_of_t(self, t)


@dataclass(frozen=True)
class ExtendedDiagnosticState:
    """A point (q0, q, p0, p, t) of the symplectized extended phase space."""

    q0: float
    q: np.ndarray
    p0: float
    p: np.ndarray
    t: float

    @property
    def gamma(self) -> np.ndarray:
        if self.p0 == 0:
            raise DomainError("p0 must be non-zero")
        return -np.asarray(self.p, dtype=float) / self.p0


def gamma0(model: SigmaModel, t: float) -> float:
    _check_time(t)
    return model.sigma**2 * power(t, model.sigma - 2.0)


def gamma1(model: SigmaModel, t: float) -> float:
    _check_time(t)
    return (2.0 * model.sigma + 1.0) / t


def p0_of_t(model: SigmaModel, t: float) -> float:
    """Closed-form solution of p0' = gamma1(t) p0 normalised at t = 1."""
    _check_time(t)
    return model.p0_at_1 * power(t, 2.0 * model.sigma + 1.0)


def hamiltonian_K(model: SigmaModel, p, t: float) -> float:
    p = np.asarray(p, dtype=float)
    return -float(p @ p) / (2.0 * p0_of_t(model, t))


def hamiltonian_V(model: SigmaModel, objective, q, t: float) -> float:
    _check_time(t)
    return -p0_of_t(model, t) * gamma0(model, t) * objective.value(np.asarray(q, dtype=float))


def hamiltonian_ZZ(model: SigmaModel, objective, state: ExtendedDiagnosticState) -> float:
    """Full extended Hamiltonian; a diagnostic, never integrated."""
    if state.p0 == 0:
        raise DomainError("p0 must be non-zero")
    _check_time(state.t)
    ratio = np.asarray(state.p, dtype=float) / state.p0
    inner = (
        0.5 * float(ratio @ ratio)
        + gamma0(model, state.t) * objective.value(np.asarray(state.q, dtype=float))
        + gamma1(model, state.t) * state.q0
    )
    return -state.p0 * inner


def contact_K(model: SigmaModel, objective, q0: float, q, gamma, t: float) -> float:
    _check_time(t)
    gamma = np.asarray(gamma, dtype=float)
    return (
        0.5 * float(gamma @ gamma)
        + gamma0(model, t) * objective.value(np.asarray(q, dtype=float))
        + gamma1(model, t) * q0
    )


def zhang_acceleration(model: SigmaModel, objective, x, v, t: float) -> np.ndarray:
    """Right-hand side x'' = -gamma1(t) v - gamma0(t) grad f(x)."""
    _check_time(t)
    v = np.asarray(v, dtype=float)
    return -gamma1(model, t) * v - gamma0(model, t) * objective.gradient(np.asarray(x, dtype=float))
