"""Measurements backing the integrators' claims: convergence order,
symplecticity of the one-step map, decay rate of f along trajectories and
the residual of the ODE along a discrete trace."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .flows import PhaseState, momentum_from_velocity, velocity_from_momentum
from .integrators import Scheme, get_stepper, initial_state, step_rk4
from .model import SigmaModel, gamma0, gamma1

EPS = np.finfo(float).eps


class EmptyWindowError(ConfigError):
    """No usable trace records inside the requested fit window."""


class TraceTooShortError(ConfigError):
    pass


def fit_loglog(x, y):
    """Least-squares line through (log x, log y). Returns (slope, intercept, r2)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), min(max(r2, 0.0), 1.0)


@dataclass
class OrderStudyReport:
    scheme: str
    taus: list
    errors: list
    fitted_order: float
    reference_tau: float

    def to_dict(self):
        return asdict(self)


def _steps_for(t0, horizon, tau):
    n = (horizon - t0) / tau
    k = round(n)
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
        raise ConfigError(f"(horizon - t0)/tau must be a positive integer, got {n!r} for tau={tau!r}")
    return k


def integrate_to(stepper, model, objective, x0, horizon, tau) -> PhaseState:
    """Fixed-step integration from (x0, v=0, t0) to ``horizon``."""
    n = _steps_for(model.t0, horizon, tau)
    state = initial_state(model, x0)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            state = stepper(model, objective, state, tau).state
    if not state.is_finite():
        raise DivergenceError(f"integration with tau={tau!r} diverged")
    return state


def order_study(scheme, model: SigmaModel, objective, x0, horizon: float, taus, ref_factor: int = 64):
    """Global error at ``horizon`` against an RK4 reference run at
    min(taus)/ref_factor, and the fitted slope of log error vs log tau."""
    taus = [float(t) for t in taus]
    if len(taus) < 2:
        raise ConfigError("an order study needs at least two step sizes")
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ConfigError("taus must be strictly decreasing")
    scheme = Scheme(scheme)
    tau_ref = min(taus) / ref_factor
    ref = integrate_to(step_rk4, model, objective, x0, horizon, tau_ref)
    stepper = get_stepper(scheme)
    errors = [
        float(np.linalg.norm(integrate_to(stepper, model, objective, x0, horizon, tau).q - ref.q))
        for tau in taus
    ]
    if min(errors) <= 0:
        raise ConfigError("zero global error; cannot fit an order")
    slope, _, _ = fit_loglog(taus, errors)
    return OrderStudyReport(scheme.value, taus, errors, slope, tau_ref)


def one_step_jacobian(step_map, state: PhaseState, fd_h: float = 1e-6, scales=None) -> np.ndarray:
    """Central-difference Jacobian of (q, p) -> (q', p') at fixed times.

    The perturbation of coordinate i is fd_h * scales[i]; by default
    scales[i] = max(1, |z_i|)."""
    d = state.q.size
    z = np.concatenate([state.q, state.p])
    if scales is None:
        scales = np.maximum(1.0, np.abs(z))
    J = np.empty((2 * d, 2 * d))
    for i in range(2 * d):
        h = fd_h * float(scales[i])
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        sp = step_map(PhaseState(zp[:d], zp[d:], state.t))
        sm = step_map(PhaseState(zm[:d], zm[d:], state.t))
        J[:, i] = (np.concatenate([sp.q, sp.p]) - np.concatenate([sm.q, sm.p])) / (2.0 * h)
    return J


def phase_scales(model: SigmaModel, state: PhaseState) -> np.ndarray:
    """Natural finite-difference units: max(1, |q_i|) for positions and
    |p0(t)| max(1, |v_i|) for momenta, i.e. a relative step in velocity.

    Scaling momenta by their own magnitude instead makes q' move by only
    ~1e-9 per perturbation at large p0(t), where rounding of q' dominates."""
    v = velocity_from_momentum(model, state)
    p_unit = abs(model.p0(state.t))
    return np.concatenate([np.maximum(1.0, np.abs(state.q)), p_unit * np.maximum(1.0, np.abs(v))])


def symplecticity_check(scheme, model: SigmaModel, objective, state: PhaseState, tau: float,
                        fd_h: float = 1e-6) -> float:
    """|det J - 1| for the one-step map of a splitting scheme.

    ``scheme`` may also be a callable ``state -> PhaseState`` (e.g. a single
    sub-flow), which is then checked as given."""
    if callable(scheme) and not isinstance(scheme, (str, Scheme)):
        step_map = scheme
    else:
        scheme = Scheme(scheme)
        if not scheme.symplectic:
            raise ConfigError(f"symplecticity is not claimed for {scheme.value}")
        stepper = get_stepper(scheme)

        def step_map(s):
            return stepper(model, objective, s, tau).state

    J = one_step_jacobian(step_map, state, fd_h, phase_scales(model, state))
    return abs(float(np.linalg.det(J)) - 1.0)


@dataclass
class RateFitReport:
    window: tuple
    slope: float
    intercept: float
    r2: float
    n_points: int

    def to_dict(self):
        return asdict(self)


def rate_fit(trace, objective=None, window=(10.0, 100.0), f_star: float | None = None) -> RateFitReport:
    """Slope of log|f - f*| against log t over trace records with t in
    ``window``; near-zero errors are skipped."""
    if f_star is None:
        if objective is None or objective.known_optimum is None:
            raise ConfigError("rate_fit needs f* (objective.known_optimum or f_star)")
        f_star = objective.known_optimum[1]
    lo, hi = window
    floor = 1e2 * EPS * abs(f_star) + 1e-14
    ts, errs = [], []
    for rec in trace.records:
        if lo <= rec.t <= hi:
            err = abs(rec.f - f_star)
            if err > floor:
                ts.append(rec.t)
                errs.append(err)
    if len(ts) < 2:
        raise EmptyWindowError(f"fewer than two usable records in window {window}")
    slope, intercept, r2 = fit_loglog(ts, errs)
    return RateFitReport((lo, hi), slope, intercept, r2, len(ts))


def ode_residual(trace, model: SigmaModel, objective) -> float:
    """max_k |x''_k + gamma1 v_k + gamma0 grad f(q_k)| over interior records,
    with v = -p/p0(t) and x'' from central differences of v."""
    states = trace.states if hasattr(trace, "states") else trace
    if len(states) < 3:
        raise TraceTooShortError("ode_residual needs at least three stored states")
    v = [velocity_from_momentum(model, s) for s in states]
    worst = 0.0
    for k in range(1, len(states) - 1):
        s = states[k]
        acc = (v[k + 1] - v[k - 1]) / (states[k + 1].t - states[k - 1].t)
        r = acc + gamma1(model, s.t) * v[k] + gamma0(model, s.t) * objective.gradient(s.q)
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def random_phase_state(rng, model: SigmaModel, d: int, t_range=(1.0, 2.0), scale: float = 1.0) -> PhaseState:
    """Random (q, p, t) with q and the velocity v = -p/p0(t) uniform in
    [-scale, scale]^d, so p carries the physical magnitude p0(t) v."""
    t = float(rng.uniform(*t_range))
    q = rng.uniform(-scale, scale, d)
    v = rng.uniform(-scale, scale, d)
    return PhaseState(q, momentum_from_velocity(model, t, v), t)


__all__ = [
    "EmptyWindowError",
    "OrderStudyReport",
    "RateFitReport",
    "TraceTooShortError",
    "fit_loglog",
    "integrate_to",
    "one_step_jacobian",
    "phase_scales",
    "ode_residual",
    "order_study",
    "random_phase_state",
    "rate_fit",
    "symplecticity_check",
]
