"""Nesterov's accelerated gradient with function-value restart and Armijo
backtracking, the discrete baseline for the splitting integrators."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DivergenceError, StepFailure
from .integrators import DEFAULT_STOP, StoppingRule
from .trace import Trace, TraceRecord


@dataclass(frozen=True)
class NagState:
    x: np.ndarray
    y: np.ndarray
    k: int = 1
    s: float = 1.0
    grad_evals: int = 0
    # step actually used by the last update and cumulative rejected Armijo trials
    last_s: float = 0.0
    rejected: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("momentum counter k must be >= 1")
        if not self.s > 0:
            raise ConfigError("step size s must be positive")


@dataclass(frozen=True)
class BacktrackParams:
    c: float = 1e-4
    shrink: float = 0.5
    growth: float = 1.1
    max_shrinks: int = 30

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ConfigError("Armijo constant c must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ConfigError("shrink must lie in (0, 1)")
        if self.growth < 1:
            raise ConfigError("growth must be >= 1")


def momentum_coefficient(k: int) -> float:
    return (k - 1) / (k + 2)


def nag_start(x0, s: float = 1.0) -> NagState:
    x0 = np.array(x0, dtype=float)
    return NagState(x0, x0.copy(), 1, s)


def _advance(state: NagState, x_new, s_next, s_used, rejected=0) -> NagState:
    beta = momentum_coefficient(state.k)
    y_new = x_new + beta * (x_new - state.x)
    return NagState(x_new, y_new, state.k + 1, s_next, state.grad_evals + 1, s_used, state.rejected + rejected)


def nag_step(objective, state: NagState) -> NagState:
    """x+ = y - s grad f(y); y+ = x+ + (k-1)/(k+2) (x+ - x)."""
    x_new = state.y - state.s * objective.gradient(state.y)
    return _advance(state, x_new, state.s, state.s)


def nag_step_restarted(objective, state: NagState, f_prev: float, step=nag_step) -> tuple[NagState, float]:
    """One step followed by a function-value restart check.

    Returns the new state and f(x+). On f(x+) > f_prev the momentum counter
    resets to 1 and y collapses onto x+.
    """
    new = step(objective, state)
    f_new = objective.value(new.x)
    if f_new > f_prev:
        new = replace(new, k=1, y=new.x.copy())
    return new, f_new


def armijo_search(objective, y: np.ndarray, s: float, bt: BacktrackParams):
    """Shrink s until f(y - s g) <= f(y) - c s |g|^2. Returns (s, g, rejected)
    where ``g`` is the gradient at ``y`` (one evaluation)."""
    g = objective.gradient(y)
    fy = objective.value(y)
    gg = float(g @ g)
    for rejected in range(bt.max_shrinks + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            f_trial = objective.value(y - s * g)
        if math.isfinite(f_trial) and f_trial <= fy - bt.c * s * gg:
            return s, g, rejected
        s *= bt.shrink
    raise StepFailure(f"Armijo search failed after {bt.max_shrinks} shrinks")


def nag_backtracking_step(objective, state: NagState, bt: BacktrackParams | None = None) -> NagState:
    """Armijo search at y, NAG update with the accepted step, then warm-start
    the next search at growth * s. One gradient evaluation; trial points only
    cost function values."""
    bt = bt or BacktrackParams()
    s, g, rejected = armijo_search(objective, state.y, state.s, bt)
    x_new = state.y - s * g
    return _advance(state, x_new, s * bt.growth, s, rejected)


def run_nag(
    objective,
    x0,
    s0: float = 1.0,
    backtracking: BacktrackParams | None = None,
    restart: bool = True,
    stop: StoppingRule | None = DEFAULT_STOP,
    max_iters: int = 100_000,
    record_grad_norm: bool = True,
) -> Trace:
    """Iterate NAG (optionally with backtracking and restart) under the same
    stopping rule and trace format as the ODE integrators. The ``tau`` column
    records the step size used."""
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    name = "nag" + ("-bt" if backtracking else "") + ("-restart" if restart else "")
    trace = Trace(scheme=name)
    state = nag_start(x0, s0)

    def grad_norm(x):
        return float(np.linalg.norm(objective.gradient(x))) if record_grad_norm else math.nan

    if backtracking is not None:
        def step(obj, st):
            return nag_backtracking_step(obj, st, backtracking)
    else:
        step = nag_step

    start = time.perf_counter_ns()
    f_prev = objective.value(state.x)
    trace.records.append(TraceRecord(0, 0.0, f_prev, grad_norm(state.x), 0, 0, 0.0))
    for k in range(1, max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            if restart:
                state, f_new = nag_step_restarted(objective, state, f_prev, step)
            else:
                state = step(objective, state)
                f_new = objective.value(state.x)
        finite = math.isfinite(f_new) and bool(np.all(np.isfinite(state.x)))
        gn = grad_norm(state.x) if finite else math.nan
        t_prev = trace.records[-1].t
        trace.records.append(
            TraceRecord(k, t_prev + state.last_s, f_new, gn, state.grad_evals, time.perf_counter_ns() - start,
                        state.last_s)
        )
        if not finite:
            trace.stop_reason = "diverged"
            trace.final_state = state
            raise DivergenceError(f"non-finite objective at NAG iteration {k}", trace)
        if stop is not None and stop.satisfied(f_prev, f_new):
            trace.stop_reason = "rel_tol"
            break
        f_prev = f_new
    else:
        trace.stop_reason = "max_iters"
    trace.final_state = state
    return trace
