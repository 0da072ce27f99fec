"""One-step maps and the run loop.

Symplectic splitting schemes (SI1, SI2, SI4) act on the canonical state
(q, p, t); the Runge-Kutta baselines act on Zhang's first-order system in
(x, v) and convert at the boundaries with v = -p / p0(t).
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DivergenceError, DomainError, RangeError, StepFailure
from .flows import (
    PhaseState,
    flow_K,
    flow_V,
    momentum_from_velocity,
    time_shift,
    velocity_from_momentum,
)
from .model import SigmaModel, zhang_acceleration
from .trace import Trace, TraceRecord

MAX_TAU = 0.5

# triple-jump weights for the 4th-order composition
W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
W0 = 1.0 - 2.0 * W1


class Scheme(str, enum.Enum):
    SI1 = "si1"
    SI2 = "si2"
    SI2_LITERAL = "si2-literal"
    SI4 = "si4"
    RK2 = "rk2"
    RK4 = "rk4"

    @property
    def symplectic(self) -> bool:
        return self in (Scheme.SI1, Scheme.SI2, Scheme.SI2_LITERAL, Scheme.SI4)


@dataclass(frozen=True)
class Backtracking:
    """Shrink-on-increase step control.

    A trial step is rejected when f(q') > f(q) + tol_increase |f(q)| + 1e-12.
    ``tau_max`` caps growth; None means the configured starting step.
    """

    shrink: float = 0.5
    growth: float = 1.1
    tol_increase: float = 1e-3
    max_shrinks: int = 30
    tau_max: float | None = None

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ConfigError("backtracking shrink must lie in (0, 1)")
        if self.growth < 1:
            raise ConfigError("backtracking growth must be >= 1")
        if self.tol_increase < 0:
            raise ConfigError("tol_increase must be >= 0")
        if self.max_shrinks < 0:
            raise ConfigError("max_shrinks must be >= 0")
        if self.tau_max is not None and not self.tau_max > 0:
            raise ConfigError("tau_max must be positive")


@dataclass(frozen=True)
class StepperConfig:
    scheme: Scheme = Scheme.SI2
    tau: float = 0.01
    adaptation: Backtracking | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0 < self.tau <= MAX_TAU:
            raise ConfigError(f"tau must lie in (0, {MAX_TAU}], got {self.tau!r}")


@dataclass(frozen=True)
class StepReport:
    state: PhaseState
    grad_evals: int
    accepted_tau: float
    next_tau: float | None = None
    f: float | None = None


def _require_positive_tau(tau):
    if not tau > 0:
        raise DomainError(f"step size must be positive, got {tau!r}")


def step_si1(model: SigmaModel, objective, state: PhaseState, tau: float) -> StepReport:
    """Lie-Trotter: drift over [t, t+tau], then kick over [t, t+tau]."""
    _require_positive_tau(tau)
    t, t1 = state.t, state.t + tau
    s = flow_K(model, state, t, t1)
    s = flow_V(model, objective, s, t, t1)
    return StepReport(time_shift(s, tau), 1, tau)


def _si2(model, objective, state, tau):
    t = state.t
    th, t1 = t + 0.5 * tau, t + tau
    s = flow_K(model, state, t, th)
    s = flow_V(model, objective, s, t, t1)
    s = flow_K(model, s, th, t1)
    return time_shift(s, tau)


def step_si2(model: SigmaModel, objective, state: PhaseState, tau: float) -> StepReport:
    """Strang splitting whose sub-flows tile [t, t+tau]: half drift, full kick,
    half drift. One gradient evaluation."""
    _require_positive_tau(tau)
    return StepReport(_si2(model, objective, state, tau), 1, tau)


def step_si2_literal(model: SigmaModel, objective, state: PhaseState, tau: float) -> StepReport:
    """Half time shift, then drift/kick/drift all integrated from the shifted
    time, then another half shift. Kept for comparison with ``step_si2``."""
    _require_positive_tau(tau)
    s = time_shift(state, 0.5 * tau)
    tm = s.t
    s = flow_K(model, s, tm, tm + 0.5 * tau)
    s = flow_V(model, objective, s, tm, tm + tau)
    s = flow_K(model, s, tm, tm + 0.5 * tau)
    return StepReport(time_shift(s, 0.5 * tau), 1, tau)


def step_si4(model: SigmaModel, objective, state: PhaseState, tau: float) -> StepReport:
    """Triple-jump composition of SI2 with weights (W1, W0, W1); W0 < 0, so
    the middle sub-step runs backwards in time."""
    _require_positive_tau(tau)
    lowest = state.t + (W1 + W0) * tau
    if not lowest > 0:
        raise RangeError(f"SI4 sub-step would reach non-positive time {lowest!r}")
    s = _si2(model, objective, state, W1 * tau)
    s = _si2(model, objective, s, W0 * tau)
    s = _si2(model, objective, s, W1 * tau)
    # remove the rounding drift in t accumulated over the three sub-steps
    return StepReport(replace(s, t=state.t + tau), 3, tau)


def rk2_step(rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """Explicit midpoint rule."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    return y + h * k2


def rk4_step(rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def zhang_rhs(model: SigmaModel, objective):
    """First-order form y = (x, v), y' = (v, x'') of Zhang's ODE."""

    def rhs(t, y):
        if not t > 0:
            raise DomainError(f"Runge-Kutta stage time must be positive, got {t!r}")
        x, v = np.split(y, 2)
        return np.concatenate([v, zhang_acceleration(model, objective, x, v, t)])

    return rhs


def step_rk2_xv(model, objective, x, v, t, tau):
    y = rk2_step(zhang_rhs(model, objective), t, np.concatenate([x, v]), tau)
    return np.split(y, 2)


def step_rk4_xv(model, objective, x, v, t, tau):
    y = rk4_step(zhang_rhs(model, objective), t, np.concatenate([x, v]), tau)
    return np.split(y, 2)


def _rk_phase(step_xv, evals):
    def step(model: SigmaModel, objective, state: PhaseState, tau: float) -> StepReport:
        _require_positive_tau(tau)
        v = velocity_from_momentum(model, state)
        x1, v1 = step_xv(model, objective, state.q, v, state.t, tau)
        t1 = state.t + tau
        return StepReport(PhaseState(x1, momentum_from_velocity(model, t1, v1), t1), evals, tau)

    return step


step_rk2 = _rk_phase(step_rk2_xv, 2)
step_rk2.__name__ = "step_rk2"
step_rk2.__doc__ = "Midpoint RK2 on Zhang's ODE; two gradient evaluations."
step_rk4 = _rk_phase(step_rk4_xv, 4)
step_rk4.__name__ = "step_rk4"
step_rk4.__doc__ = "Classical RK4 on Zhang's ODE; four gradient evaluations."

STEPPERS = {
    Scheme.SI1: step_si1,
    Scheme.SI2: step_si2,
    Scheme.SI2_LITERAL: step_si2_literal,
    Scheme.SI4: step_si4,
    Scheme.RK2: step_rk2,
    Scheme.RK4: step_rk4,
}

GRAD_EVALS_PER_STEP = {
    Scheme.SI1: 1,
    Scheme.SI2: 1,
    Scheme.SI2_LITERAL: 1,
    Scheme.SI4: 3,
    Scheme.RK2: 2,
    Scheme.RK4: 4,
}


def get_stepper(scheme):
    return STEPPERS[Scheme(scheme)]


def step_with_backtracking(
    model: SigmaModel,
    objective,
    state: PhaseState,
    config: StepperConfig,
    tau: float | None = None,
    f_current: float | None = None,
) -> StepReport:
    """Try a step at ``tau`` (default ``config.tau``), shrinking it while the
    objective rises beyond the tolerance. Rejected attempts are charged to
    ``grad_evals``. A trial that overflows counts as a rejection."""
    policy = config.adaptation
    if policy is None:
        raise ConfigError("step_with_backtracking needs a Backtracking adaptation")
    stepper = get_stepper(config.scheme)
    tau = config.tau if tau is None else tau
    tau_max = config.tau if policy.tau_max is None else policy.tau_max
    f0 = objective.value(state.q) if f_current is None else f_current
    threshold = f0 + policy.tol_increase * abs(f0) + 1e-12
    evals = 0
    for _ in range(policy.max_shrinks + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                rep = stepper(model, objective, state, tau)
                evals += rep.grad_evals
                f1 = objective.value(rep.state.q)
        except RangeError:
            evals += GRAD_EVALS_PER_STEP[config.scheme]
            f1 = math.inf
        if math.isfinite(f1) and f1 <= threshold:
            return StepReport(rep.state, evals, tau, min(tau * policy.growth, tau_max), f1)
        tau *= policy.shrink
    raise StepFailure(f"no acceptable step after {policy.max_shrinks} shrinks (last tau={tau / policy.shrink!r})")


@dataclass(frozen=True)
class StoppingRule:
    """Stop once |f_k - f_(k-1)| / max(|f_(k-1)|, floor) < rel_tol."""

    rel_tol: float = 1e-6
    floor: float = 1e-12

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be positive")

    def satisfied(self, f_prev: float, f_new: float) -> bool:
        return abs(f_new - f_prev) / max(abs(f_prev), self.floor) < self.rel_tol


DEFAULT_STOP = StoppingRule()


def initial_state(model: SigmaModel, x0) -> PhaseState:
    """Start at t0 with zero velocity, hence zero momentum."""
    x0 = np.array(x0, dtype=float)
    return PhaseState(x0, np.zeros_like(x0), model.t0)


def run(
    model: SigmaModel,
    objective,
    initial_x,
    config: StepperConfig,
    stop: StoppingRule | None = DEFAULT_STOP,
    max_iters: int = 100_000,
    keep_states: bool = False,
    record_grad_norm: bool = True,
    min_iters: int = 1,
) -> Trace:
    """Iterate the configured stepper from (x0, v=0, t0).

    The stopping rule is checked after every accepted step that moved q
    (or left the whole state at rest); ``stop=None`` runs exactly
    ``max_iters`` steps. Raises DivergenceError (carrying the
    partial trace) when f or the state becomes non-finite.
    """
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    stepper = get_stepper(config.scheme)
    state = initial_state(model, initial_x)
    trace = Trace(scheme=config.scheme.value)

    def grad_norm(q):
        return float(np.linalg.norm(objective.gradient(q))) if record_grad_norm else math.nan

    start = time.perf_counter_ns()
    f_prev = objective.value(state.q)
    trace.records.append(TraceRecord(0, state.t, f_prev, grad_norm(state.q), 0, 0, 0.0))
    if keep_states:
        trace.states.append(state)
    evals = 0
    tau = config.tau
    t_sum = 0.0
    for k in range(1, max_iters + 1):
        prev_q, prev_p = state.q, state.p
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                if config.adaptation is None:
                    rep = stepper(model, objective, state, tau)
                    f_new = objective.value(rep.state.q)
                else:
                    rep = step_with_backtracking(model, objective, state, config, tau, f_prev)
                    f_new = rep.f
                    tau = rep.next_tau
                finite = math.isfinite(f_new) and rep.state.is_finite()
                gn = grad_norm(rep.state.q) if finite else math.nan
        except RangeError as exc:
            trace.stop_reason = "diverged"
            trace.final_state = state
            raise DivergenceError(f"range overflow at iteration {k}: {exc}", trace) from exc
        evals += rep.grad_evals
        # accumulate t exactly as t0 + sum of accepted steps
        t_sum += rep.accepted_tau
        state = replace(rep.state, t=model.t0 + t_sum)
        trace.records.append(
            TraceRecord(k, state.t, f_new, gn, evals, time.perf_counter_ns() - start, rep.accepted_tau)
        )
        if keep_states:
            trace.states.append(state)
        if not finite:
            trace.stop_reason = "diverged"
            trace.final_state = state
            raise DivergenceError(f"non-finite objective at iteration {k}", trace)
        # a step that moved only p (SI1 leaving rest) says nothing about convergence
        moved_only_p = np.array_equal(rep.state.q, prev_q) and not np.array_equal(rep.state.p, prev_p)
        if stop is not None and k >= min_iters and not moved_only_p and stop.satisfied(f_prev, f_new):
            trace.stop_reason = "rel_tol"
            break
        f_prev = f_new
    else:
        trace.stop_reason = "max_iters"
    trace.final_state = state
    return trace
