"""Explicit non-autonomous symplectic integrators for Zhang's accelerated
gradient ODE, with Runge-Kutta and Nesterov baselines."""

from .errors import (
    ConfigError,
    DataFormatError,
    DivergenceError,
    DomainError,
    RangeError,
    StepFailure,
    SymAccelError,
)
from .flows import PhaseState, flow_K, flow_V, momentum_from_velocity, time_shift, velocity_from_momentum
from .integrators import (
    Backtracking,
    Scheme,
    StepperConfig,
    StepReport,
    StoppingRule,
    run,
    step_rk2,
    step_rk4,
    step_si1,
    step_si2,
    step_si2_literal,
    step_si4,
    step_with_backtracking,
)
from .model import SigmaModel, gamma0, gamma1, p0_of_t, zhang_acceleration
from .objectives import LogisticRegressionObjective, Objective, QuadraticObjective, grad_check, quadratic_objective

__version__ = "0.1.0"
